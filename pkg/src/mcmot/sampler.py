"""Chain orchestration: move scheduling, burn-in, thinning, replicates."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Annotation,
    AssociationHypothesis,
    ChainState,
    EventCounts,
    ModelParams,
    ObjectTrack,
    ObservationSet,
    all_clutter_state,
)
from .proposals import METROPOLIS, MOVES, gibbs_trajectories

DEFAULT_WEIGHTS = {
    "switch": 0.35,
    "extend": 0.25,
    "gather": 0.15,
    "disperse": 0.05,
    "ffbs": 0.20,
}

MOVE_ORDER = ("switch", "extend", "gather", "disperse", "ffbs")


@dataclass
class SamplerConfig:
    iterations: int = 2000
    burn_in_fraction: float = 0.5
    replicates: int = 5
    move_weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    switch_max_objects: int = 7
    skip_probability: float = 0.01
    switch_pin_first_two: bool = True
    seed: int = 0
    thin_count: int = 200
    ffbs_sweep_every: int = 50
    recompute_every: int = 500
    debug_proposals: bool = False

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn-in fraction must be in [0, 1)")
        if not 0.0 < self.skip_probability < 1.0:
            raise ValueError("skip probability must be in (0, 1)")
        weights = {k: float(v) for k, v in self.move_weights.items()}
        if any(v < 0 for v in weights.values()) or sum(weights.values()) <= 0:
            raise ValueError("move weights must be nonnegative with positive sum")
        unknown = set(weights) - set(MOVE_ORDER)
        if unknown:
            raise ValueError(f"unknown move kinds {sorted(unknown)}")
        self.move_weights = weights

    def burn_in_iterations(self) -> int:
        return int(self.iterations * self.burn_in_fraction)


@dataclass
class SampleRecord:
    """One retained draw; z, counts and tracks are shared immutable values."""

    iteration: int
    chain: int
    log_joint: float
    move: str
    accepted: bool
    z: AssociationHypothesis
    counts: EventCounts
    objects: dict[int, ObjectTrack]


def _move_table(config: SamplerConfig):
    kinds = [k for k in MOVE_ORDER if config.move_weights.get(k, 0.0) > 0]
    w = np.array([config.move_weights[k] for k in kinds], dtype=float)
    return kinds, np.cumsum(w / w.sum())


def step(
    state: ChainState,
    y: ObservationSet,
    params: ModelParams,
    config: SamplerConfig,
    rng: np.random.Generator,
    iteration: int = 0,
    chain: int = 0,
) -> tuple[ChainState, SampleRecord]:
    """Draw one move, apply the accept rule, and record the outcome."""
    kinds, cum = _move_table(config)
    i = int(np.searchsorted(cum, rng.random()))
    kind = kinds[min(i, len(kinds) - 1)]
    if kind == "ffbs":
        outcome = gibbs_trajectories(state, y, params, rng)
    else:
        outcome = MOVES[kind](state, y, params, config, rng)
    if outcome.decision == METROPOLIS:
        u = rng.random()
        outcome.accepted = math.log(u) < outcome.log_ratio
    new_state = outcome.state if outcome.accepted else state
    record = SampleRecord(
        iteration=iteration,
        chain=chain,
        log_joint=new_state.log_joint,
        move=outcome.move,
        accepted=outcome.accepted,
        z=new_state.z,
        counts=new_state.counts,
        objects=new_state.x.tracks,
    )
    return new_state, record


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(chain + 1)
    return np.random.Generator(np.random.PCG64(children[chain]))


def run_chain(
    y: ObservationSet,
    params: ModelParams,
    config: SamplerConfig,
    chain: int = 0,
    annotations: tuple[Annotation, ...] = (),
    collect=None,
    start_state: ChainState | None = None,
    start_iteration: int = 0,
    rng: np.random.Generator | None = None,
    checkpoint_every: int | None = None,
    checkpoint_sink=None,
):
    """Run one chain from the all-clutter start, emitting post-burn-in records.

    `collect(record)` consumes records as they are produced (post burn-in);
    when omitted the records are returned as a list.
    """
    if rng is None:
        rng = chain_rng(config.seed, chain)
    state = start_state if start_state is not None else all_clutter_state(y, params, annotations)
    burn = config.burn_in_iterations()
    out = [] if collect is None else None
    for it in range(start_iteration, config.iterations):
        if config.ffbs_sweep_every and it > 0 and it % config.ffbs_sweep_every == 0:
            sweep = gibbs_trajectories(state, y, params, rng)
            state = sweep.state
        state, record = step(state, y, params, config, rng, iteration=it, chain=chain)
        if config.recompute_every and (it + 1) % config.recompute_every == 0:
            # periodic exact rebuild keeps the incremental log-joint cache from
            # drifting; tied to the absolute iteration so resumed runs align
            state = ChainState.build(
                state.z, state.x, y, params, state.annotations, counts=state.counts
            )
        if it >= burn:
            if collect is None:
                out.append(record)
            else:
                collect(record)
        if checkpoint_every and checkpoint_sink and (it + 1) % checkpoint_every == 0:
            checkpoint_sink(state, rng, it + 1)
    if checkpoint_sink:
        checkpoint_sink(state, rng, config.iterations)
    return out


def _worker(args):
    y, params, config, chain, annotations = args
    return run_chain(y, params, config, chain=chain, annotations=annotations)


def max_workers() -> int:
    env = os.environ.get("JPT_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_replicates(
    y: ObservationSet,
    params: ModelParams,
    config: SamplerConfig,
    annotations: tuple[Annotation, ...] = (),
    workers: int | None = None,
) -> list[list[SampleRecord]]:
    """Independent chains with seeds derived from the base seed."""
    n = config.replicates
    workers = max_workers() if workers is None else workers
    if workers <= 1 or n == 1:
        return [
            run_chain(y, params, config, chain=c, annotations=annotations)
            for c in range(n)
        ]
    jobs = [(y, params, config, c, annotations) for c in range(n)]
    with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
        return list(pool.map(_worker, jobs))


def thin(records: list, count: int) -> list:
    """Evenly spaced subsample preserving order; everything if short."""
    if count <= 0 or len(records) <= count:
        return list(records)
    idx = np.unique(np.round(np.linspace(0, len(records) - 1, count)).astype(int))
    return [records[i] for i in idx]


def pooled_thinned(chains: list[list], count: int) -> list:
    out = []
    for records in chains:
        out.extend(thin(records, count))
    return out
