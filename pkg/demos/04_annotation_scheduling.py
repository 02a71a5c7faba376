"""Scheduling same/different annotations by mutual information.

Runs the closed annotation loop on the teaser scene twice: once planning
queries by estimated mutual information, once picking observation pairs at
random. The informative planner flanks the convergence event and collapses
the posterior within a round or two; random pairs mostly ask about relations
the posterior already agrees on.

Run:  python3 demos/04_annotation_scheduling.py
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mcmot.analysis import groundtruth_trajectories
from mcmot.design import run_bed_loop, simulated_oracle
from mcmot.sampler import SamplerConfig
from mcmot.synthetic import generate_teaser, teaser_modes, teaser_params

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

y, gt = generate_teaser(seed=0)
params = teaser_params()
gt_z = teaser_modes(seed=0)[0]
gt_trajs = groundtruth_trajectories(gt)

curves = {}
for planner in ("mi", "random"):
    oracle_rng = np.random.default_rng(11)

    def oracle(design, round_index):
        return simulated_oracle(gt_z, design, 0.99, oracle_rng, round_index)

    config = SamplerConfig(iterations=1000, burn_in_fraction=0.5,
                           replicates=3, seed=3, thin_count=150)
    results = run_bed_loop(y, params, oracle, rounds=5, planner=planner,
                           config=config, gt_trajectories=gt_trajs, budget=60)
    curves[planner] = results
    for r in results:
        chosen = "-" if r.design is None else f"{r.design.as_tuple()} a={r.answer}"
        print(f"{planner:>6} round {r.round_index}: uncertainty {r.uncertainty:.4f} "
              f"distance {r.distance_to_gt:.4f}  {chosen}")

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for planner, results in curves.items():
    rounds = [r.round_index for r in results]
    axes[0].plot(rounds, [r.uncertainty for r in results], marker="o", label=planner)
    axes[1].plot(rounds, [r.distance_to_gt for r in results], marker="o", label=planner)
axes[0].set_ylabel("mean posterior trajectory SD")
axes[1].set_ylabel("mean transport distance to groundtruth")
for ax in axes:
    ax.set_xlabel("annotation round")
    ax.legend()
fig.tight_layout()
fig.savefig(OUT / "annotation_scheduling.png", dpi=130)
print(f"wrote {OUT / 'annotation_scheduling.png'}")
