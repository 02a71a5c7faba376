"""Uncertainty diagnostics and tracking metrics.

Trajectories here are plain arrays with rows (t, y_1..y_D): an object's
claimed observations in time order (sampled latent states are used only by
the posterior-variance summary). Hypothesis-level distances lift a
spatiotemporal trajectory cost to whole association hypotheses with discrete
optimal transport over uniform per-object mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .model import AssociationHypothesis, ObservationSet

MAX_COST = 2.0


def hypothesis_trajectories(z: AssociationHypothesis, y: ObservationSet) -> list[np.ndarray]:
    """Per-object arrays of (t, y...) rows, ordered by object label."""
    out = []
    for k in sorted(z.claims):
        rows = [np.concatenate(([float(t)], y.y(t, n))) for t, n in z.claims_of(k)]
        out.append(np.vstack(rows))
    return out


def groundtruth_trajectories(gt) -> list[np.ndarray]:
    out = []
    for oid in gt.object_ids():
        times, points = gt.trajectory_of(oid)
        out.append(np.column_stack([times.astype(float), points]))
    return out


@dataclass
class TrajectoryCostConfig:
    """Scales for the spatial/temporal similarity blend (fixed per dataset)."""

    spatial_weight: float = 0.5
    spatial_scale: float = 1.0
    temporal_scale: float = 1.0

    @staticmethod
    def from_observations(y: ObservationSet, spatial_weight: float = 0.5,
                          max_points: int = 400) -> "TrajectoryCostConfig":
        """Median-heuristic scales from the dataset geometry."""
        pts = np.vstack([y.at(t) for t in range(1, y.horizon + 1) if y.at(t).size])
        ts = np.concatenate(
            [np.full(y.at(t).shape[0], t, dtype=float) for t in range(1, y.horizon + 1)]
        )
        if pts.shape[0] > max_points:
            idx = np.linspace(0, pts.shape[0] - 1, max_points).astype(int)
            pts, ts = pts[idx], ts[idx]
        d_space = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        d_time = np.abs(ts[:, None] - ts[None, :])
        iu = np.triu_indices(pts.shape[0], k=1)
        s = float(np.median(d_space[iu])) if iu[0].size else 1.0
        t = float(np.median(d_time[iu])) if iu[0].size else 1.0
        return TrajectoryCostConfig(
            spatial_weight=spatial_weight,
            spatial_scale=s if s > 0 else 1.0,
            temporal_scale=t if t > 0 else 1.0,
        )


def _directed_similarity(a_pos, b_pos, scale):
    d = np.linalg.norm(a_pos[:, None, :] - b_pos[None, :, :], axis=-1)
    return float(np.mean(np.exp(-d.min(axis=1) / scale)))


def stlc_cost(traj_a: np.ndarray, traj_b: np.ndarray,
              config: TrajectoryCostConfig | None = None) -> float:
    """Spatiotemporal trajectory cost in [0, 2]; identical trajectories cost 0.

    Similarity blends a symmetrized nearest-neighbor spatial term (L2,
    exponential kernel) with the analogous temporal term (L1 on timestamps);
    cost = 2 - 2 * similarity.
    """
    config = config or TrajectoryCostConfig()
    a = np.atleast_2d(np.asarray(traj_a, dtype=float))
    b = np.atleast_2d(np.asarray(traj_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("trajectories must be nonempty")
    sp = 0.5 * (
        _directed_similarity(a[:, 1:], b[:, 1:], config.spatial_scale)
        + _directed_similarity(b[:, 1:], a[:, 1:], config.spatial_scale)
    )
    tm = 0.5 * (
        _directed_similarity(a[:, :1], b[:, :1], config.temporal_scale)
        + _directed_similarity(b[:, :1], a[:, :1], config.temporal_scale)
    )
    sim = config.spatial_weight * sp + (1.0 - config.spatial_weight) * tm
    return MAX_COST - 2.0 * sim


@dataclass
class HypothesisDistanceReport:
    cost_matrix: np.ndarray
    plan: np.ndarray
    distance: float


def _exact_ot(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray):
    nA, nB = cost.shape
    if nA == nB:
        rows, cols = linear_sum_assignment(cost)
        plan = np.zeros_like(cost)
        plan[rows, cols] = 1.0 / nA
        return plan, float((plan * cost).sum())
    # general uniform-marginal transport as a small LP
    A_eq = []
    b_eq = []
    for i in range(nA):
        row = np.zeros(nA * nB)
        row[i * nB:(i + 1) * nB] = 1.0
        A_eq.append(row)
        b_eq.append(mu[i])
    for j in range(nB):
        col = np.zeros(nA * nB)
        col[j::nB] = 1.0
        A_eq.append(col)
        b_eq.append(nu[j])
    res = linprog(cost.ravel(), A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport solve failed: {res.message}")
    plan = res.x.reshape(nA, nB)
    return plan, float(res.fun)


def hypothesis_distance(objs_a: list[np.ndarray], objs_b: list[np.ndarray],
                        config: TrajectoryCostConfig | None = None,
                        cost_fn=None) -> HypothesisDistanceReport:
    """Optimal-transport distance between two sets of object trajectories.

    Mass is uniform over each side's objects; an empty side pays the maximal
    trajectory cost for every unit of mass.
    """
    nA, nB = len(objs_a), len(objs_b)
    if nA == 0 and nB == 0:
        return HypothesisDistanceReport(np.zeros((0, 0)), np.zeros((0, 0)), 0.0)
    if nA == 0 or nB == 0:
        n = max(nA, nB)
        return HypothesisDistanceReport(
            np.zeros((nA, nB)), np.zeros((nA, nB)), MAX_COST
        )
    if max(nA, nB) > 64:
        raise ValueError("exact transport is limited to 64 objects per side")
    cost_fn = cost_fn or (lambda a, b: stlc_cost(a, b, config))
    cost = np.empty((nA, nB))
    for i, a in enumerate(objs_a):
        for j, b in enumerate(objs_b):
            cost[i, j] = cost_fn(a, b)
    mu = np.full(nA, 1.0 / nA)
    nu = np.full(nB, 1.0 / nB)
    plan, dist = _exact_ot(cost, mu, nu)
    return HypothesisDistanceReport(cost, plan, dist)


# ---------------------------------------------------------------------------
# mode matching


@dataclass
class ModeHistogram:
    counts: np.ndarray
    assignments: list[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / total


class ModeMatcher:
    """Nearest-reference-mode lookup with claim-level caching.

    Samples repeat the same association structures constantly, so both the
    full-hypothesis match and the per-object trajectory costs are memoized.
    """

    def __init__(self, modes: list[AssociationHypothesis], y: ObservationSet,
                 config: TrajectoryCostConfig | None = None):
        self.y = y
        self.config = config or TrajectoryCostConfig.from_observations(y)
        self.mode_objects = []
        for m in modes:
            objs = [(self._claims_key(m, k), traj)
                    for k, traj in zip(sorted(m.claims), hypothesis_trajectories(m, y))]
            self.mode_objects.append(objs)
        self._z_cache: dict[bytes, int] = {}
        self._cost_cache: dict[tuple, float] = {}

    @staticmethod
    def _claims_key(z: AssociationHypothesis, k: int) -> bytes:
        return np.asarray(z.claims_of(k), dtype=np.int64).tobytes()

    def _object_cost(self, key_a, traj_a, mode_i, obj_j) -> float:
        ck = (key_a, mode_i, obj_j)
        hit = self._cost_cache.get(ck)
        if hit is None:
            hit = stlc_cost(traj_a, self.mode_objects[mode_i][obj_j][1], self.config)
            self._cost_cache[ck] = hit
        return hit

    def match(self, z: AssociationHypothesis) -> int:
        zk = z.key()
        hit = self._z_cache.get(zk)
        if hit is not None:
            return hit
        objs = [(self._claims_key(z, k), traj)
                for k, traj in zip(sorted(z.claims), hypothesis_trajectories(z, self.y))]
        best = 0
        best_d = math.inf
        for i, mode_objs in enumerate(self.mode_objects):
            if not objs:
                d = MAX_COST if mode_objs else 0.0
            else:
                cost = np.array([
                    [self._object_cost(key, traj, i, j) for j in range(len(mode_objs))]
                    for key, traj in objs
                ])
                if len(objs) == len(mode_objs):
                    rows, cols = linear_sum_assignment(cost)
                    d = float(cost[rows, cols].sum()) / len(objs)
                else:
                    mu = np.full(len(objs), 1.0 / len(objs))
                    nu = np.full(len(mode_objs), 1.0 / len(mode_objs))
                    _, d = _exact_ot(cost, mu, nu)
            if d < best_d - 1e-12:
                best_d = d
                best = i
        self._z_cache[zk] = best
        return best


def match_modes(samples, modes: list[AssociationHypothesis], y: ObservationSet,
                config: TrajectoryCostConfig | None = None) -> ModeHistogram:
    """Histogram of nearest reference modes over sample hypotheses.

    `samples` is an iterable of AssociationHypothesis or of SampleRecord-like
    objects with a `.z` attribute. Ties break toward the lowest mode index.
    """
    matcher = ModeMatcher(modes, y, config)
    counts = np.zeros(len(modes), dtype=int)
    assignments = []
    for s in samples:
        z = s.z if hasattr(s, "z") else s
        i = matcher.match(z)
        counts[i] += 1
        assignments.append(i)
    return ModeHistogram(counts, assignments)


def total_variation(hist, target) -> float:
    """0.5 * L1 between a histogram (counts or probabilities) and a target."""
    p = np.asarray(hist, dtype=float)
    if p.sum() > 0:
        p = p / p.sum()
    q = np.asarray(target, dtype=float)
    q = q / q.sum()
    return 0.5 * float(np.abs(p - q).sum())


# ---------------------------------------------------------------------------
# CLEAR MOT


@dataclass
class MotReport:
    misses: int
    false_positives: int
    switches: int
    fragmentations: int
    gt_detections: int
    matches: int

    @property
    def mota(self) -> float:
        if self.gt_detections == 0:
            return 1.0
        return 1.0 - (self.misses + self.false_positives + self.switches) / self.gt_detections


def record_frames(z: AssociationHypothesis, y: ObservationSet) -> list[list]:
    """Tracker output frames [(hyp_id, position), ...] from claimed observations."""
    frames = []
    for t in range(1, y.horizon + 1):
        frame = []
        for n, k in enumerate(z.labels[t - 1]):
            if k > 0:
                frame.append((int(k), y.y(t, n)))
        frames.append(frame)
    return frames


def clear_mot(tracker_frames: list[list], gt_frames: list[list], radius: float) -> MotReport:
    """Greedy-persistent per-frame matching within `radius`.

    A switch is counted when a groundtruth object re-matches to a different
    hypothesis than its most recent match; a fragmentation when its matched
    status resumes after an interruption (whatever the identity).
    """
    if len(tracker_frames) != len(gt_frames):
        raise ValueError("frame counts differ")
    last_hyp: dict = {}
    matched_prev: dict = {}
    misses = fps = switches = frags = gt_total = matches = 0
    for frame_h, frame_g in zip(tracker_frames, gt_frames):
        gt_total += len(frame_g)
        hyp_free = {hid: pos for hid, pos in frame_h}
        current: dict = {}
        # persist still-valid correspondences first
        for gid, gpos in frame_g:
            hid = last_hyp.get(gid)
            if hid is not None and gid in matched_prev and hid in hyp_free:
                if float(np.linalg.norm(np.asarray(gpos) - hyp_free[hid])) <= radius:
                    current[gid] = hid
                    del hyp_free[hid]
        # greedy distance matching for the rest
        pairs = []
        for gid, gpos in frame_g:
            if gid in current:
                continue
            for hid, hpos in hyp_free.items():
                d = float(np.linalg.norm(np.asarray(gpos) - hpos))
                if d <= radius:
                    pairs.append((d, gid, hid))
        for d, gid, hid in sorted(pairs):
            if gid in current or hid not in hyp_free:
                continue
            current[gid] = hid
            del hyp_free[hid]
        for gid, hid in current.items():
            matches += 1
            prev = last_hyp.get(gid)
            if prev is not None and prev != hid:
                switches += 1
            if gid in last_hyp and gid not in matched_prev:
                frags += 1
            last_hyp[gid] = hid
        misses += sum(1 for gid, _ in frame_g if gid not in current)
        fps += len(hyp_free)
        matched_prev = current
    return MotReport(
        misses=misses, false_positives=fps, switches=switches,
        fragmentations=frags, gt_detections=gt_total, matches=matches,
    )


# ---------------------------------------------------------------------------
# posterior variance summary


@dataclass
class PosteriorSummary:
    """Per-reference-object pointwise moments over a time grid."""

    grid: np.ndarray
    mean: np.ndarray   # (n_objects, n_times, dx)
    sd: np.ndarray     # (n_objects, n_times, dx)
    count: np.ndarray  # (n_objects, n_times)

    @property
    def mean_sd(self) -> float:
        mask = self.count >= 2
        if not mask.any():
            return 0.0
        return float(self.sd[mask].mean())


def _bridge_mean(params, x0, x1, g1: int, g2: int) -> np.ndarray:
    """E[x_t | x_{t-g1} = x0, x_{t+g2} = x1] under the linear-Gaussian dynamics."""
    F1, Q1 = params.transition(g1)
    F2, Q2 = params.transition(g2)
    m = F1 @ np.asarray(x0, dtype=float)
    S = F2 @ Q1 @ F2.T + Q2
    K = np.linalg.solve(S.T, (Q1 @ F2.T).T).T
    return m + K @ (np.asarray(x1, dtype=float) - F2 @ m)


def _sample_values_on_grid(record, y, params, grid):
    """Per-object values at grid times: drawn states, bridge means inside gaps."""
    values = {}
    for k, track in sorted(record.objects.items()):
        times = list(track.times)
        lo, hi = times[0], times[-1]
        vals = {}
        for t in grid:
            if track.has_time(t):
                vals[t] = track.state_at(t)
            elif lo < t < hi:
                nxt = int(np.searchsorted(times, t))
                t0, t1 = times[nxt - 1], times[nxt]
                vals[t] = _bridge_mean(
                    params, track.state_at(t0), track.state_at(t1), t - t0, t1 - t
                )
        values[k] = vals
    return values


def posterior_variance_summary(records, y, params, grid=None,
                               reference=None,
                               config: TrajectoryCostConfig | None = None) -> PosteriorSummary:
    """Pointwise trajectory moments after aligning objects across samples.

    Each sample's objects are matched to the reference sample's objects (by
    trajectory-cost assignment); moments accumulate per reference slot.
    """
    records = list(records)
    if not records:
        raise ValueError("no samples")
    grid = np.arange(1, y.horizon + 1) if grid is None else np.asarray(grid, dtype=int)
    config = config or TrajectoryCostConfig.from_observations(y)
    if reference is None:
        reference = max(records, key=lambda r: r.log_joint)
    ref_trajs = hypothesis_trajectories(reference.z, y)
    n_ref = len(ref_trajs)
    dx = params.dx
    acc_n = np.zeros((n_ref, grid.size))
    acc_m = np.zeros((n_ref, grid.size, dx))
    acc_s = np.zeros((n_ref, grid.size, dx))
    grid_pos = {int(t): i for i, t in enumerate(grid)}
    for rec in records:
        trajs = hypothesis_trajectories(rec.z, y)
        ks = sorted(rec.z.claims)
        if not ks:
            continue
        cost = np.array([[stlc_cost(a, b, config) for b in ref_trajs] for a in trajs])
        rows, cols = linear_sum_assignment(cost)
        values = _sample_values_on_grid(rec, y, params, [int(t) for t in grid])
        for i, j in zip(rows, cols):
            k = ks[i]
            for t, v in values[k].items():
                g = grid_pos.get(int(t))
                if g is None:
                    continue
                acc_n[j, g] += 1
                delta = np.asarray(v, dtype=float) - acc_m[j, g]
                acc_m[j, g] += delta / acc_n[j, g]
                acc_s[j, g] += delta * (np.asarray(v, dtype=float) - acc_m[j, g])
    sd = np.zeros_like(acc_s)
    mask = acc_n >= 2
    sd[mask] = np.sqrt(acc_s[mask] / (acc_n[mask][:, None] - 1))
    return PosteriorSummary(grid=grid, mean=acc_m, sd=sd, count=acc_n.astype(int))
