"""Synthetic scene generators: the three-object K33 scene and the two-object teaser.

Both scenes live in a unit-height band with time on the horizontal axis.
Objects follow piecewise-linear lanes engineered to collide at known times:
K33 has a 2-object event at t=10, another at t=20 and a 3-object event at
t=30, giving 2!*2!*3! = 24 plausible outcome hypotheses. There is no clutter
and every object is detected at every timestep.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import AssociationHypothesis, ModelParams, ObservationSet

K33_HORIZON = 39
K33_EVENTS = ((10, (0, 1)), (20, (1, 2)), (30, (0, 1, 2)))
_K33_LANES = (
    ((1, 0.15), (10, 0.40), (20, 0.15), (30, 0.50), (39, 0.15)),
    ((1, 0.65), (10, 0.40), (20, 0.85), (25, 0.60), (30, 0.50), (39, 0.50)),
    ((1, 0.90), (10, 0.90), (20, 0.85), (25, 0.95), (30, 0.50), (39, 0.85)),
)

TEASER_HORIZON = 15
_TEASER_LANES = (
    ((1, 0.30), (8, 0.50), (15, 0.30)),
    ((1, 0.70), (8, 0.50), (15, 0.70)),
)


@dataclass
class GroundTruth:
    """True identity-labeled positions: per timestep, (object id, position)."""

    entries: list

    @property
    def horizon(self) -> int:
        return len(self.entries)

    def object_ids(self) -> list[int]:
        ids = {oid for frame in self.entries for oid, _ in frame}
        return sorted(ids)

    def frame(self, t: int) -> list:
        return self.entries[t - 1]

    def trajectory_of(self, oid: int):
        times, points = [], []
        for t, frame in enumerate(self.entries, start=1):
            for o, pos in frame:
                if o == oid:
                    times.append(t)
                    points.append(np.asarray(pos, dtype=float))
        return np.array(times, dtype=int), np.array(points, dtype=float)


def _lane_positions(knots, horizon: int) -> np.ndarray:
    ts = np.array([k[0] for k in knots], dtype=float)
    hs = np.array([k[1] for k in knots], dtype=float)
    return np.interp(np.arange(1, horizon + 1, dtype=float), ts, hs)


def _generate_scene(lanes, horizon, seed, noise_sd):
    rng = np.random.default_rng(seed)
    paths = np.stack([_lane_positions(k, horizon) for k in lanes])  # (L, T)
    n_lanes = paths.shape[0]
    per_time, orders = [], []
    gt_entries = []
    for t in range(horizon):
        noisy = paths[:, t] + rng.normal(0.0, noise_sd, size=n_lanes)
        order = rng.permutation(n_lanes)
        per_time.append(noisy[order].reshape(-1, 1))
        orders.append(order)
        gt_entries.append([(lane + 1, np.array([paths[lane, t]])) for lane in range(n_lanes)])
    y = ObservationSet(per_time)
    gt = GroundTruth(gt_entries)
    return y, gt, orders


def _lane_of_obs(orders):
    """orders[t][n] is the lane that produced observation (t+1, n)."""
    return orders


def _mode_hypotheses(orders, horizon, events, n_lanes):
    """One hypothesis per combination of outcome permutations at the events.

    The object on a meeting lane may continue on any meeting lane after the
    event time. The identity outcome (no swaps anywhere) comes first.
    """
    event_perms = []
    for _, lanes in events:
        perms = [p for p in itertools.permutations(lanes)]
        event_perms.append(perms)
    modes = []
    for combo in itertools.product(*event_perms):
        # assignment[segment][lane] = object that rides this lane in the segment
        lane_owner = list(range(n_lanes))
        boundaries = [t for t, _ in events]
        owners_per_t = []
        seg = 0
        for t in range(1, horizon + 1):
            while seg < len(boundaries) and t > boundaries[seg]:
                lanes_in_event = events[seg][1]
                perm = combo[seg]
                old = {lane: lane_owner[lane] for lane in lanes_in_event}
                for src, dst in zip(lanes_in_event, perm):
                    lane_owner[dst] = old[src]
                seg += 1
            owners_per_t.append(list(lane_owner))
        labels = []
        for t0, order in enumerate(orders):
            row = [0] * len(order)
            for n, lane in enumerate(order):
                row[n] = owners_per_t[t0][lane] + 1
            labels.append(row)
        modes.append(AssociationHypothesis(labels))
    return modes


def k33_params(noise_sd: float = 0.05, process_sd: float = 0.10) -> ModelParams:
    """Recommended inference parameters for the K33 band geometry.

    The random-walk process noise is kept looser than the observation noise
    so the crossing outcomes stay nearly exchangeable at the meeting points.
    """
    return ModelParams(
        F=[[1.0]], Q=[[process_sd ** 2]], H=[[1.0]], R=[[noise_sd ** 2]],
        mu0=[0.5], Sigma0=[[0.25]],
        mu_fp=[0.5], Sigma_fp=[[0.25]],
        lambda_b=0.02, lambda_f=0.05, p_d=0.98, p_lam=0.005,
    )


def teaser_params(noise_sd: float = 0.05, process_sd: float = 0.10) -> ModelParams:
    return k33_params(noise_sd, process_sd)


def generate_k33(seed: int = 0, noise_sd: float = 0.05):
    """The 39-timestep, 3-object crossing scene and its 24 outcome hypotheses.

    Returns (observations, groundtruth, modes); modes[0] is the groundtruth
    association.
    """
    y, gt, orders = _generate_scene(_K33_LANES, K33_HORIZON, seed, noise_sd)
    modes = _mode_hypotheses(orders, K33_HORIZON, K33_EVENTS, 3)
    return y, gt, modes


def generate_teaser(seed: int = 0, noise_sd: float = 0.05):
    """Two objects that converge at t=8 and diverge: the two-mode demo scene."""
    y, gt, _ = _generate_scene(_TEASER_LANES, TEASER_HORIZON, seed, noise_sd)
    return y, gt


def teaser_modes(seed: int = 0, noise_sd: float = 0.05):
    """The two outcome hypotheses of the teaser (identity first)."""
    _, _, orders = _generate_scene(_TEASER_LANES, TEASER_HORIZON, seed, noise_sd)
    return _mode_hypotheses(orders, TEASER_HORIZON, ((8, (0, 1)),), 2)


def groundtruth_hypothesis(y: ObservationSet, gt: GroundTruth) -> AssociationHypothesis:
    """Associate each observation to the nearest groundtruth object at its time."""
    labels = []
    for t in range(1, y.horizon + 1):
        block = y.at(t)
        frame = gt.frame(t)
        row = []
        for n in range(block.shape[0]):
            dists = [float(np.linalg.norm(block[n] - pos)) for _, pos in frame]
            row.append(frame[int(np.argmin(dists))][0])
        labels.append(row)
    return AssociationHypothesis(labels)
