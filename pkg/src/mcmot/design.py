"""Annotation scheduling: mutual-information estimation and the closed loop.

A design is a pair of observations; an annotation answers whether they belong
to the same object (with stated reliability) and enters the joint as an extra
likelihood factor on z. The loop alternates: estimate MI over candidate
designs from the current posterior samples, query the oracle on the argmax,
recondition the sampler, repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import (
    TrajectoryCostConfig,
    hypothesis_distance,
    hypothesis_trajectories,
    posterior_variance_summary,
)
from .model import (
    Annotation,
    AssociationHypothesis,
    Design,
    ModelParams,
    ObservationSet,
    annotation_log_likelihood,
)
from .sampler import SamplerConfig, pooled_thinned, run_replicates

__all__ = [
    "Annotation",
    "Design",
    "MIEstimate",
    "RoundResult",
    "annotation_log_likelihood",
    "candidate_designs",
    "estimate_mi",
    "pairwise_assignment_posterior",
    "run_bed_loop",
    "select_design",
    "simulated_oracle",
]


def _labels_with_state(record, t: int):
    return sorted(k for k, tr in record.objects.items() if tr.has_time(t))


def _assignment_probs(record, y: ObservationSet, t: int, n: int, params: ModelParams):
    """Normalized assignment probabilities of observation (t, n).

    Returns (labels, probs) where labels[0] == 0 is clutter and the rest are
    the objects holding a state at time t in this sample.
    """
    obs = y.y(t, n)
    labels = [0] + _labels_with_state(record, t)
    logw = np.empty(len(labels))
    logw[0] = params.clutter_logpdf(obs)
    for i, k in enumerate(labels[1:], start=1):
        logw[i] = params.obs_logpdf_state(obs, record.objects[k].state_at(t))
    logw -= logw.max()
    p = np.exp(logw)
    p /= p.sum()
    return labels, p


@dataclass
class PairwiseCells:
    """Joint distribution over the two observations' assignments."""

    labels1: list
    labels2: list
    probs: np.ndarray  # (len(labels1), len(labels2))

    @property
    def same_probability(self) -> float:
        total = 0.0
        for i, k1 in enumerate(self.labels1):
            if k1 <= 0:
                continue
            for j, k2 in enumerate(self.labels2):
                if k1 == k2:
                    total += float(self.probs[i, j])
        return total


def pairwise_assignment_posterior(record, y: ObservationSet, design: Design,
                                  params: ModelParams) -> PairwiseCells:
    """Enumerate both observations' assignments under one sampled trajectory set.

    Cells are weighted by observation likelihood; when the two observations
    share a timestep the diagonal object cells are excluded (one claim per
    object per time).
    """
    l1, p1 = _assignment_probs(record, y, design.t1, design.n1, params)
    l2, p2 = _assignment_probs(record, y, design.t2, design.n2, params)
    joint = np.outer(p1, p2)
    if design.t1 == design.t2:
        for i, k1 in enumerate(l1):
            if k1 <= 0:
                continue
            for j, k2 in enumerate(l2):
                if k1 == k2:
                    joint[i, j] = 0.0
    total = joint.sum()
    if total <= 0:
        raise ValueError("no feasible joint assignment for design")
    joint /= total
    return PairwiseCells(l1, l2, joint)


class _SameProbCache:
    """Per-sample same-object probabilities, with per-(sample, time) reuse."""

    def __init__(self, records, y, params):
        self.records = records
        self.y = y
        self.params = params
        self._probs: dict[tuple, tuple] = {}

    def _obs_probs(self, m: int, t: int, n: int):
        key = (m, t, n)
        hit = self._probs.get(key)
        if hit is None:
            hit = _assignment_probs(self.records[m], self.y, t, n, self.params)
            self._probs[key] = hit
        return hit

    def same_probability(self, m: int, design: Design) -> float:
        if design.t1 == design.t2:
            return 0.0  # one claim per object per time
        l1, p1 = self._obs_probs(m, design.t1, design.n1)
        l2, p2 = self._obs_probs(m, design.t2, design.n2)
        common = set(l1[1:]) & set(l2[1:])
        if not common:
            return 0.0
        i1 = {k: i for i, k in enumerate(l1)}
        i2 = {k: i for i, k in enumerate(l2)}
        return sum(float(p1[i1[k]] * p2[i2[k]]) for k in common)


@dataclass
class MIEstimate:
    value: float
    std_error: float
    design: Design | None = None


def _z_same(z: AssociationHypothesis, design: Design) -> bool:
    a = z.label(design.t1, design.n1)
    b = z.label(design.t2, design.n2)
    return a == b and a > 0


def estimate_mi(design: Design, records, y: ObservationSet, params: ModelParams,
                rng: np.random.Generator, reliability: float = 0.99,
                cache: _SameProbCache | None = None) -> MIEstimate:
    """Monte-Carlo mutual information between the annotation answer and the
    latent trajectories, in nats.

    Per sample: an answer is drawn from the sample's own assignments, the
    numerator enumerates pairwise assignments under the sampled trajectories,
    and the denominator is the sample-average answer predictive. The estimate
    can come out slightly negative from Monte Carlo noise; it is not clamped.
    """
    records = list(records)
    M = len(records)
    if M < 2:
        raise ValueError("need at least two posterior samples")
    cache = cache or _SameProbCache(records, y, params)
    pa = reliability
    p_same = np.array([cache.same_probability(m, design) for m in range(M)])
    z_same = np.array([_z_same(r.z, design) for r in records], dtype=bool)
    f_same = float(z_same.mean())
    den1 = pa * f_same + (1 - pa) * (1 - f_same)
    answers = np.where(rng.random(M) < pa, z_same, ~z_same)
    num = np.where(
        answers,
        pa * p_same + (1 - pa) * (1 - p_same),
        pa * (1 - p_same) + (1 - pa) * p_same,
    )
    den = np.where(answers, den1, 1.0 - den1)
    terms = np.log(num) - np.log(den)
    value = float(terms.mean())
    se = float(terms.std(ddof=1) / math.sqrt(M)) if M > 1 else float("inf")
    return MIEstimate(value=value, std_error=se, design=design)


def _flat_index(y: ObservationSet):
    pairs = []
    for t in range(1, y.horizon + 1):
        for n in range(y.at(t).shape[0]):
            pairs.append((t, n))
    return pairs


def candidate_designs(y: ObservationSet, records, budget: int = 500,
                      band: tuple[float, float] = (0.05, 0.95)) -> list[Design]:
    """Observation pairs whose same-object probability is genuinely uncertain.

    Falls back to all pairs when fewer than `budget` survive the filter; the
    final list is capped to `budget` with an even deterministic spread.
    """
    flat = _flat_index(y)
    records = list(records)
    M = len(records)
    L = np.zeros((M, len(flat)), dtype=int)
    for m, rec in enumerate(records):
        for i, (t, n) in enumerate(flat):
            L[m, i] = rec.z.label(t, n)
    uncertain = []
    for i in range(len(flat)):
        col = L[:, i][:, None]
        same = ((L[:, i + 1:] == col) & (col > 0)).mean(axis=0)
        for off in np.flatnonzero((same > band[0]) & (same < band[1])):
            uncertain.append((i, i + 1 + int(off)))
    if len(uncertain) < budget:
        pool = [(i, j) for i in range(len(flat)) for j in range(i + 1, len(flat))]
    else:
        pool = uncertain
    if len(pool) > budget:
        idx = np.unique(np.round(np.linspace(0, len(pool) - 1, budget)).astype(int))
        pool = [pool[i] for i in idx]
    return [Design(*flat[i], *flat[j]) for i, j in pool]


def select_design(candidates: list[Design], records, y: ObservationSet,
                  params: ModelParams, rng: np.random.Generator,
                  reliability: float = 0.99) -> MIEstimate:
    """Greedy argmax of estimated MI; ties break toward the earliest design."""
    if not candidates:
        raise ValueError("no candidate designs")
    ordered = sorted(candidates, key=lambda d: d.as_tuple())
    cache = _SameProbCache(list(records), y, params)
    best = None
    for d in ordered:
        est = estimate_mi(d, records, y, params, rng, reliability, cache=cache)
        if best is None or est.value > best.value:
            best = est
    return best


def simulated_oracle(gt_hypothesis: AssociationHypothesis, design: Design,
                     reliability: float, rng: np.random.Generator,
                     round_index: int = 0) -> Annotation:
    """Answer from groundtruth labels, flipped with probability 1 - reliability."""
    truth = _z_same(gt_hypothesis, design)
    answer = truth if rng.random() < reliability else not truth
    return Annotation(
        design=design, answer=int(answer), reliability=reliability,
        provenance="simulated-oracle", round_index=round_index,
    )


@dataclass
class RoundResult:
    round_index: int
    planner: str
    design: Design | None
    answer: int | None
    mi: float
    uncertainty: float
    distance_to_gt: float


def _random_design(y: ObservationSet, rng: np.random.Generator) -> Design:
    flat = _flat_index(y)
    i = int(rng.integers(len(flat)))
    j = int(rng.integers(len(flat) - 1))
    if j >= i:
        j += 1
    (t1, n1), (t2, n2) = flat[min(i, j)], flat[max(i, j)]
    return Design(t1, n1, t2, n2)


def run_bed_loop(
    y: ObservationSet,
    params: ModelParams,
    oracle,
    rounds: int,
    planner: str,
    config: SamplerConfig,
    gt_trajectories: list | None = None,
    cost_config: TrajectoryCostConfig | None = None,
    reliability: float = 0.99,
    budget: int = 500,
    workers: int = 1,
    on_round=None,
) -> list[RoundResult]:
    """Sequential annotation loop: round 0 has no annotations, then one per round.

    `oracle(design, round_index)` returns an Annotation. The sampler restarts
    cold each round with the accumulated annotations in the joint.
    """
    if planner not in ("mi", "random"):
        raise ValueError("planner must be 'mi' or 'random'")
    cost_config = cost_config or TrajectoryCostConfig.from_observations(y)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0xBED)))
    annotations: list[Annotation] = []
    results = []
    dist_cache: dict[bytes, float] = {}

    def metrics(samples):
        unc = posterior_variance_summary(samples, y, params, config=cost_config).mean_sd
        if gt_trajectories is None:
            dist = float("nan")
        else:
            total = 0.0
            for rec in samples:
                key = rec.z.key()
                hit = dist_cache.get(key)
                if hit is None:
                    hit = hypothesis_distance(
                        hypothesis_trajectories(rec.z, y), gt_trajectories, cost_config
                    ).distance
                    dist_cache[key] = hit
                total += hit
            dist = total / max(len(samples), 1)
        return unc, dist

    pending: tuple | None = None  # (design, answer, mi) annotated entering this round
    for round_index in range(rounds + 1):
        round_cfg = replace(
            config,
            seed=int(np.random.SeedSequence((config.seed, round_index)).generate_state(1)[0]),
        )
        chains = run_replicates(y, params, round_cfg, annotations=tuple(annotations),
                                workers=workers)
        samples = pooled_thinned(chains, config.thin_count)
        unc, dist = metrics(samples)
        if pending is None:
            results.append(RoundResult(round_index, planner, None, None, 0.0, unc, dist))
        else:
            design, answer, mi = pending
            results.append(RoundResult(round_index, planner, design, answer, mi, unc, dist))
        if on_round:
            on_round(round_index, samples, results)
        if round_index == rounds:
            break
        # choose the next design from the current samples
        if planner == "mi":
            cands = candidate_designs(y, samples, budget=budget)
            est = select_design(cands, samples, y, params, rng, reliability)
            design, mi = est.design, est.value
        else:
            design, mi = _random_design(y, rng), float("nan")
        ann = oracle(design, round_index + 1)
        annotations.append(ann)
        pending = (design, ann.answer, mi)
    return results
