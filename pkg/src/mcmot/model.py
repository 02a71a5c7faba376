"""Domain types and the log-density factors of the tracking posterior.

The unnormalized joint over trajectories x, associations z and event counts M
given observations y factors as

    log p(M) + log p(x | z) + log p(y | x, z) + sum_l log p(a_l | z)

with the association prior p(z | M) treated as a constant on the valid set and
enforced as a hard -inf outside it (validity includes the rule that every
object is observed at least twice).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gaussian import TransitionCache, _Pdf, robust_cholesky, symmetrize

NEG_INF = float("-inf")


class AssociationError(ValueError):
    """A structurally impossible association (e.g. duplicate claim)."""

    def __init__(self, message: str, time: int | None = None, obj: int | None = None):
        super().__init__(message)
        self.time = time
        self.obj = obj


class ConsistencyError(ValueError):
    """Trajectories and associations disagree (missing or extra state)."""


# ---------------------------------------------------------------------------
# observations


class ObservationSet:
    """All observations grouped by timestep; immutable once constructed.

    Times are 1-based: t runs over 1..T. Observation (t, n) is the n-th
    (0-based) observation vector at time t.
    """

    def __init__(self, per_time: Sequence[np.ndarray], dim: int | None = None):
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in per_time]
        self.dim = dim
        if self.dim is None:
            for block in blocks:
                if block.size:
                    self.dim = block.shape[1]
                    break
        if self.dim is None:
            raise ValueError("cannot infer observation dimension from empty set")
        self._per_time = []
        for t, block in enumerate(blocks, start=1):
            if block.size == 0:
                block = np.zeros((0, self.dim))
            elif block.shape[1] != self.dim:
                raise ValueError(f"observation dimension mismatch at t={t}")
            block.setflags(write=False)
            self._per_time.append(block)

    @property
    def horizon(self) -> int:
        return len(self._per_time)

    def counts(self) -> np.ndarray:
        return np.array([b.shape[0] for b in self._per_time], dtype=int)

    def at(self, t: int) -> np.ndarray:
        """All observations at time t (1-based), shape (N_t, D_y)."""
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time {t} outside 1..{self.horizon}")
        return self._per_time[t - 1]

    def y(self, t: int, n: int) -> np.ndarray:
        block = self.at(t)
        if not 0 <= n < block.shape[0]:
            raise IndexError(f"observation ({t},{n}) does not exist")
        return block[n]

    @property
    def total(self) -> int:
        return int(sum(b.shape[0] for b in self._per_time))

    def __iter__(self):
        for t in range(1, self.horizon + 1):
            for n in range(self._per_time[t - 1].shape[0]):
                yield t, n, self._per_time[t - 1][n]


# ---------------------------------------------------------------------------
# associations


class AssociationHypothesis:
    """Per-observation integer labels; 0 is clutter, k > 0 is object k."""

    def __init__(self, labels: Sequence[np.ndarray | Sequence[int]]):
        self.labels = [np.asarray(l, dtype=int).copy() for l in labels]
        for arr in self.labels:
            arr.setflags(write=False)
        self._index_objects()

    def _index_objects(self):
        claims: dict[int, list[tuple[int, int]]] = {}
        for t, arr in enumerate(self.labels, start=1):
            for n, k in enumerate(arr):
                if k > 0:
                    claims.setdefault(int(k), []).append((t, n))
        self.claims = claims

    @property
    def horizon(self) -> int:
        return len(self.labels)

    @property
    def num_objects(self) -> int:
        return max(self.claims, default=0)

    def label(self, t: int, n: int) -> int:
        return int(self.labels[t - 1][n])

    def claims_of(self, k: int) -> list[tuple[int, int]]:
        return self.claims.get(k, [])

    def clutter_at(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.labels[t - 1] == 0)

    def with_labels(self, new_labels: dict[int, np.ndarray]) -> "AssociationHypothesis":
        """Copy with the given per-time label arrays replaced (1-based keys)."""
        out = [self.labels[t] for t in range(self.horizon)]
        for t, arr in new_labels.items():
            out[t - 1] = arr
        return AssociationHypothesis(out)

    def key(self) -> bytes:
        return b"|".join(arr.tobytes() for arr in self.labels)

    def __eq__(self, other):
        return isinstance(other, AssociationHypothesis) and all(
            np.array_equal(a, b) for a, b in zip(self.labels, other.labels)
        ) and self.horizon == other.horizon

    def __hash__(self):
        return hash(self.key())


def permute_labels(z: AssociationHypothesis, mapping: dict[int, int]) -> AssociationHypothesis:
    """Apply one global label permutation (for symmetry tests)."""
    out = []
    for arr in z.labels:
        new = arr.copy()
        for n, k in enumerate(arr):
            if k > 0:
                new[n] = mapping[int(k)]
        out.append(new)
    return AssociationHypothesis(out)


def canonical_relabel(z: AssociationHypothesis) -> AssociationHypothesis:
    """Relabel objects in order of (arrival time, first observation index)."""
    order = sorted(z.claims, key=lambda k: z.claims[k][0])
    mapping = {k: i + 1 for i, k in enumerate(order)}
    if all(mapping[k] == k for k in mapping):
        return z
    return permute_labels(z, mapping)


# ---------------------------------------------------------------------------
# event counts


@dataclass
class EventCounts:
    """Per-timestep arrivals, clutter, detections and departures."""

    arrivals: np.ndarray
    clutter: np.ndarray
    detections: np.ndarray
    departures: np.ndarray

    def __post_init__(self):
        self.arrivals = np.asarray(self.arrivals, dtype=int)
        self.clutter = np.asarray(self.clutter, dtype=int)
        self.detections = np.asarray(self.detections, dtype=int)
        self.departures = np.asarray(self.departures, dtype=int)

    @property
    def horizon(self) -> int:
        return self.arrivals.shape[0]

    @property
    def existing(self) -> np.ndarray:
        """e_t = e_{t-1} + a_t - lambda_t with e_0 = 0."""
        return np.cumsum(self.arrivals - self.departures)

    def __eq__(self, other):
        return (
            isinstance(other, EventCounts)
            and np.array_equal(self.arrivals, other.arrivals)
            and np.array_equal(self.clutter, other.clutter)
            and np.array_equal(self.detections, other.detections)
            and np.array_equal(self.departures, other.departures)
        )


def derive_counts(z: AssociationHypothesis, horizon: int | None = None) -> EventCounts:
    """Event counts implied by an association hypothesis.

    Raises AssociationError if an object claims two observations at one time.
    """
    T = horizon if horizon is not None else z.horizon
    a = np.zeros(T, dtype=int)
    f = np.zeros(T, dtype=int)
    d = np.zeros(T, dtype=int)
    lam = np.zeros(T, dtype=int)
    for t, arr in enumerate(z.labels, start=1):
        f[t - 1] = int(np.sum(arr == 0))
    for k, claims in z.claims.items():
        seen = set()
        for t, _ in claims:
            if t in seen:
                raise AssociationError(
                    f"object {k} claims two observations at time {t}", time=t, obj=k
                )
            seen.add(t)
        first = claims[0][0]
        last = claims[-1][0]
        a[first - 1] += 1
        lam[last - 1] += 1
        for t, _ in claims:
            if t != first:
                d[t - 1] += 1
    return EventCounts(a, f, d, lam)


@dataclass
class Violation:
    constraint: str
    message: str
    time: int | None = None
    obj: int | None = None


def check_validity(z: AssociationHypothesis, counts: EventCounts) -> Violation | None:
    """None when z and counts satisfy every structural constraint."""
    T = z.horizon
    if counts.horizon != T:
        return Violation("horizon", f"counts horizon {counts.horizon} != {T}")
    # one observation per object per time
    for k, claims in z.claims.items():
        times = [t for t, _ in claims]
        if len(times) != len(set(times)):
            dup = next(t for t in times if times.count(t) > 1)
            return Violation(
                "unique-claim", f"object {k} claims two observations at t={dup}",
                time=dup, obj=k,
            )
        if len(set(times)) < 2:
            return Violation(
                "two-observations", f"object {k} observed fewer than twice",
                obj=k, time=times[0] if times else None,
            )
    # contiguous labels
    ks = sorted(z.claims)
    if ks != list(range(1, len(ks) + 1)):
        return Violation("contiguous-labels", f"object labels {ks} are not 1..K")
    derived = derive_counts(z, T)
    for name, got, want in (
        ("clutter-count", counts.clutter, derived.clutter),
        ("arrival-count", counts.arrivals, derived.arrivals),
        ("departure-count", counts.departures, derived.departures),
        ("detection-count", counts.detections, derived.detections),
    ):
        if not np.array_equal(got, want):
            t = int(np.flatnonzero(got != want)[0]) + 1
            return Violation(name, f"{name} mismatch at t={t}", time=t)
    e = counts.existing
    if np.any(e < 0):
        t = int(np.flatnonzero(e < 0)[0]) + 1
        return Violation("existing-nonnegative", f"e_t < 0 at t={t}", time=t)
    return None


# ---------------------------------------------------------------------------
# trajectories


class ObjectTrack:
    """Latent states of one object at exactly its associated times."""

    __slots__ = ("times", "states", "_index")

    def __init__(self, times, states):
        self.times = np.asarray(times, dtype=int)
        self.states = np.atleast_2d(np.asarray(states, dtype=float))
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states must align")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("track times must be strictly increasing")
        self.times.setflags(write=False)
        self.states.setflags(write=False)
        self._index = {int(t): i for i, t in enumerate(self.times)}

    @property
    def arrival(self) -> int:
        return int(self.times[0])

    @property
    def departure(self) -> int:
        return int(self.times[-1])

    def has_time(self, t: int) -> bool:
        return t in self._index

    def state_at(self, t: int) -> np.ndarray:
        i = self._index.get(t)
        if i is None:
            raise ConsistencyError(f"no stored state at time {t}")
        return self.states[i]


class TrajectorySet:
    """Per-object tracks keyed by object label."""

    def __init__(self, tracks: dict[int, ObjectTrack] | None = None):
        self.tracks = dict(tracks or {})

    def track(self, k: int) -> ObjectTrack:
        return self.tracks[k]

    def with_track(self, k: int, track: ObjectTrack | None) -> "TrajectorySet":
        out = dict(self.tracks)
        if track is None:
            out.pop(k, None)
        else:
            out[k] = track
        return TrajectorySet(out)

    def __contains__(self, k: int) -> bool:
        return k in self.tracks

    def __len__(self):
        return len(self.tracks)


def tracks_match_claims(x: TrajectorySet, z: AssociationHypothesis) -> bool:
    if set(x.tracks) != set(z.claims):
        return False
    for k, claims in z.claims.items():
        if [t for t, _ in claims] != list(x.track(k).times):
            return False
    return True


# ---------------------------------------------------------------------------
# model parameters


@dataclass
class ModelParams:
    """Linear-Gaussian tracking model parameters.

    detection_trials selects the Binomial support for the detection count:
    "arrivals_included" scores d_t against e_{t-1} + a_t (default);
    "existing_only" is the literal Bin(d_t | e_{t-1}, p_d).
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    mu0: np.ndarray
    Sigma0: np.ndarray
    mu_fp: np.ndarray
    Sigma_fp: np.ndarray
    lambda_b: float
    lambda_f: float
    p_d: float
    p_lam: float
    detection_trials: str = "arrivals_included"

    def __post_init__(self):
        for name in ("F", "Q", "H", "R", "Sigma0", "Sigma_fp"):
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        self.mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        self.mu_fp = np.atleast_1d(np.asarray(self.mu_fp, dtype=float))
        self.dx = self.F.shape[0]
        self.dy = self.H.shape[0]
        if self.lambda_b <= 0 or self.lambda_f <= 0:
            raise ValueError("rates must be strictly positive")
        if not 0 < self.p_d <= 1:
            raise ValueError("p_d must be in (0, 1]")
        if not 0 <= self.p_lam < 1:
            raise ValueError("p_lam must be in [0, 1)")
        if self.detection_trials not in ("arrivals_included", "existing_only"):
            raise ValueError(f"unknown detection_trials {self.detection_trials!r}")
        for name in ("Q", "R", "Sigma0", "Sigma_fp"):
            m = getattr(self, name)
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError(f"{name} must be symmetric")
            if float(np.min(np.linalg.eigvalsh(symmetrize(m)))) < -1e-9:
                raise ValueError(f"{name} must be positive semidefinite")
        self.transition = TransitionCache(self.F, self.Q)
        self.scalar = self.dx == 1 and self.dy == 1
        self._obs_pdf = _Pdf(self.R)
        self._clutter_pdf = _Pdf(self.Sigma_fp)
        self._dyn_pdfs: dict[int, _Pdf] = {}
        self._prior_pdf = _Pdf(self.Sigma0)
        self._point_pred: dict[int, "PointPredictive"] = {}
        self._prior_pred: "PointPredictive" | None = None
        if self.scalar:
            self._h = float(self.H[0, 0])
            self._mu0s = float(self.mu0[0])
            self._mufps = float(self.mu_fp[0])

    # --- cached evaluation helpers -------------------------------------

    def obs_logpdf(self, y, hx) -> float:
        if self.scalar:
            return self._obs_pdf.logpdf1(float(y[0]) - float(hx[0]))
        return self._obs_pdf.logpdf(np.asarray(y) - np.asarray(hx))

    def obs_logpdf_state(self, y, state) -> float:
        """log N(y | H state, R) without materializing H @ state."""
        if self.scalar:
            return self._obs_pdf.logpdf1(float(y[0]) - self._h * float(state[0]))
        return self._obs_pdf.logpdf(np.asarray(y) - self.H @ np.asarray(state))

    def clutter_logpdf(self, y) -> float:
        if self.scalar:
            return self._clutter_pdf.logpdf1(float(y[0]) - self._mufps)
        return self._clutter_pdf.logpdf(np.asarray(y) - self.mu_fp)

    def dyn_logpdf(self, gap: int, value, prev) -> float:
        """log N(value | F^gap prev, Q_gap)."""
        pdf = self._dyn_pdfs.get(gap)
        if pdf is None:
            pdf = _Pdf(self.transition(gap).Q)
            self._dyn_pdfs[gap] = pdf
        if self.scalar:
            f = self.transition.scalars(gap)[0]
            return pdf.logpdf1(float(value[0]) - f * float(prev[0]))
        Fg = self.transition(gap).F
        return pdf.logpdf(np.asarray(value) - Fg @ np.asarray(prev))

    def prior_logpdf(self, value) -> float:
        if self.scalar:
            return self._prior_pdf.logpdf1(float(value[0]) - self._mu0s)
        return self._prior_pdf.logpdf(np.asarray(value) - self.mu0)

    def point_predictive(self, gap: int | None) -> "PointPredictive":
        """Predict-then-observe helper from a realized state across `gap` steps.

        gap=None means "from the trajectory prior" (no previous state).
        """
        if gap is None:
            if self._prior_pred is None:
                self._prior_pred = PointPredictive(self, None)
            return self._prior_pred
        hit = self._point_pred.get(gap)
        if hit is None:
            hit = PointPredictive(self, gap)
            self._point_pred[gap] = hit
        return hit


class PointPredictive:
    """Conjugate machinery for one (gap, params) pair.

    From a previous realized state v: the latent is N(F_g v, Q_g), the
    observation predictive is N(H F_g v, H Q_g H' + R), and the posterior
    given one observation has fixed covariance. With gap None the prior
    N(mu0, Sigma0) plays the part of the prediction.
    """

    def __init__(self, params: ModelParams, gap: int | None):
        H, R = params.H, params.R
        if gap is None:
            self.F = None
            P = params.Sigma0
            self.base_mean = params.mu0
        else:
            tr = params.transition(gap)
            self.F = tr.F
            P = tr.Q
            self.base_mean = None
        S = symmetrize(H @ P @ H.T + R)
        self.pred_pdf = _Pdf(S)
        self.gain = np.linalg.solve(S.T, (P @ H.T).T).T
        A = np.eye(P.shape[0]) - self.gain @ H
        self.post_cov = symmetrize(A @ P @ A.T + self.gain @ R @ self.gain.T)
        self.post_pdf = _Pdf(self.post_cov)
        self.post_chol = robust_cholesky(self.post_cov, allow_semidefinite=True)
        self.H = H
        self.scalar = params.scalar
        if self.scalar:
            self._h = float(H[0, 0])
            self._f = None if self.F is None else float(self.F[0, 0])
            self._base = None if self.base_mean is None else float(self.base_mean[0])
            self._gain = float(self.gain[0, 0])
            self._post_sd = float(self.post_chol[0, 0])

    def _mean1(self, prev) -> float:
        return self._base if self._f is None else self._f * float(prev[0])

    def latent_mean(self, prev) -> np.ndarray:
        if self.F is None:
            return self.base_mean
        return self.F @ np.asarray(prev)

    def obs_logpdf(self, y, prev) -> float:
        if self.scalar:
            return self.pred_pdf.logpdf1(float(y[0]) - self._h * self._mean1(prev))
        return self.pred_pdf.logpdf(np.asarray(y) - self.H @ self.latent_mean(prev))

    def obs_logpdf_many(self, ys: np.ndarray, prev) -> np.ndarray:
        if self.scalar:
            resid = ys[:, 0] - self._h * self._mean1(prev)
            return self.pred_pdf.log_norm - 0.5 * resid * resid * self.pred_pdf.inv_var
        return self.pred_pdf.logpdf_many(np.atleast_2d(ys) - self.H @ self.latent_mean(prev))

    def posterior_mean(self, y, prev) -> np.ndarray:
        if self.scalar:
            m = self._mean1(prev)
            return np.array([m + self._gain * (float(y[0]) - self._h * m)])
        m = self.latent_mean(prev)
        return m + self.gain @ (np.asarray(y) - self.H @ m)

    def draw_logpdf(self, value, y, prev) -> float:
        if self.scalar:
            m = self._mean1(prev)
            post = m + self._gain * (float(y[0]) - self._h * m)
            return self.post_pdf.logpdf1(float(value[0]) - post)
        return self.post_pdf.logpdf(np.asarray(value) - self.posterior_mean(y, prev))

    def draw(self, y, prev, rng) -> np.ndarray:
        if self.scalar:
            m = self._mean1(prev)
            post = m + self._gain * (float(y[0]) - self._h * m)
            return np.array([post + self._post_sd * rng.standard_normal()])
        mean = self.posterior_mean(y, prev)
        return mean + self.post_chol @ rng.standard_normal(mean.shape[0])


# ---------------------------------------------------------------------------
# count prior


def _log_poisson(k: int, rate: float) -> float:
    return k * math.log(rate) - rate - math.lgamma(k + 1)


def _log_binomial(k: int, n: int, p: float) -> float:
    if k < 0 or k > n:
        return NEG_INF
    if p == 0.0:
        return 0.0 if k == 0 else NEG_INF
    if p == 1.0:
        return 0.0 if k == n else NEG_INF
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def log_counts_prior(counts: EventCounts, params: ModelParams) -> float:
    """Sum over t of the arrival/clutter/detection/departure factors."""
    a, f, d, lam = counts.arrivals, counts.clutter, counts.detections, counts.departures
    e = counts.existing
    total = 0.0
    for t in range(counts.horizon):
        e_prev = int(e[t - 1]) if t > 0 else 0
        if params.detection_trials == "arrivals_included":
            trials = e_prev + int(a[t])
        else:
            trials = e_prev
        term = (
            _log_poisson(int(a[t]), params.lambda_b)
            + _log_poisson(int(f[t]), params.lambda_f)
            + _log_binomial(int(d[t]), trials, params.p_d)
            + _log_binomial(int(lam[t]), int(d[t]), params.p_lam)
        )
        if term == NEG_INF:
            return NEG_INF
        total += term
    return total


def log_counts_transition(counts: EventCounts, t: int, params: ModelParams) -> float:
    """Single-timestep factor log p(M_t | M_{t-1}) (t is 1-based)."""
    e = counts.existing
    e_prev = int(e[t - 2]) if t > 1 else 0
    if params.detection_trials == "arrivals_included":
        trials = e_prev + int(counts.arrivals[t - 1])
    else:
        trials = e_prev
    return (
        _log_poisson(int(counts.arrivals[t - 1]), params.lambda_b)
        + _log_poisson(int(counts.clutter[t - 1]), params.lambda_f)
        + _log_binomial(int(counts.detections[t - 1]), trials, params.p_d)
        + _log_binomial(int(counts.departures[t - 1]), int(counts.detections[t - 1]), params.p_lam)
    )


# ---------------------------------------------------------------------------
# dynamics and observation factors


def track_dynamics_logp(track: ObjectTrack, params: ModelParams) -> float:
    """Prior factor for the first state plus gap-marginalized transitions."""
    total = params.prior_logpdf(track.states[0])
    for i in range(1, track.times.shape[0]):
        gap = int(track.times[i] - track.times[i - 1])
        total += params.dyn_logpdf(gap, track.states[i], track.states[i - 1])
    return total


def log_dynamics(x: TrajectorySet, params: ModelParams) -> float:
    # summed in label order so rebuilt states are bit-identical
    return float(sum(track_dynamics_logp(x.tracks[k], params) for k in sorted(x.tracks)))


def log_observation(
    y: ObservationSet, x: TrajectorySet, z: AssociationHypothesis, params: ModelParams
) -> float:
    total = 0.0
    for t in range(1, z.horizon + 1):
        block = y.at(t)
        for n, k in enumerate(z.labels[t - 1]):
            if k > 0:
                state = x.track(int(k)).state_at(t)
                total += params.obs_logpdf_state(block[n], state)
            else:
                total += params.clutter_logpdf(block[n])
    return total


# ---------------------------------------------------------------------------
# annotations (same/different queries; they enter the joint as z-factors)


@dataclass(frozen=True)
class Design:
    """A pair of observation indices (t1, n1), (t2, n2) proposed for annotation."""

    t1: int
    n1: int
    t2: int
    n2: int

    def __post_init__(self):
        if (self.t1, self.n1) == (self.t2, self.n2):
            raise ValueError("design must reference two distinct observations")

    def as_tuple(self):
        return (self.t1, self.n1, self.t2, self.n2)


@dataclass(frozen=True)
class Annotation:
    """An answered design: answer 1 means same object, 0 means different."""

    design: Design
    answer: int
    reliability: float = 0.99
    provenance: str = "simulated-oracle"
    round_index: int = 0

    def __post_init__(self):
        if self.answer not in (0, 1):
            raise ValueError("answer must be 0 or 1")
        if not 0.5 < self.reliability <= 1.0:
            raise ValueError("reliability must be in (0.5, 1]")


def annotation_log_likelihood(ann: Annotation, z: AssociationHypothesis) -> float:
    """log p(answer | z): reliability if the answer matches z, else 1 - reliability."""
    z1 = z.label(ann.design.t1, ann.design.n1)
    z2 = z.label(ann.design.t2, ann.design.n2)
    same = z1 == z2 and z1 > 0
    correct = (ann.answer == 1) == same
    p = ann.reliability if correct else 1.0 - ann.reliability
    if p == 0.0:
        return NEG_INF
    return math.log(p)


def annotations_logp(annotations: Iterable[Annotation], z: AssociationHypothesis) -> float:
    return float(sum(annotation_log_likelihood(a, z) for a in annotations))


# ---------------------------------------------------------------------------
# chain state and the joint


@dataclass
class ChainState:
    """One sampler state with its cached unnormalized log joint, by parts."""

    z: AssociationHypothesis
    x: TrajectorySet
    counts: EventCounts
    annotations: tuple[Annotation, ...]
    logp_counts: float
    logp_dyn: float
    logp_obs: float
    logp_annot: float

    @property
    def log_joint(self) -> float:
        return self.logp_counts + self.logp_dyn + self.logp_obs + self.logp_annot

    @property
    def num_objects(self) -> int:
        return self.z.num_objects

    @staticmethod
    def build(
        z: AssociationHypothesis,
        x: TrajectorySet,
        y: ObservationSet,
        params: ModelParams,
        annotations: tuple[Annotation, ...] = (),
        counts: EventCounts | None = None,
    ) -> "ChainState":
        counts = counts if counts is not None else derive_counts(z)
        return ChainState(
            z=z,
            x=x,
            counts=counts,
            annotations=tuple(annotations),
            logp_counts=log_counts_prior(counts, params),
            logp_dyn=log_dynamics(x, params),
            logp_obs=log_observation(y, x, z, params),
            logp_annot=annotations_logp(annotations, z),
        )


def log_joint(state: ChainState, y: ObservationSet, params: ModelParams) -> float:
    """Unnormalized log posterior; -inf when the state is invalid."""
    if check_validity(state.z, state.counts) is not None:
        return NEG_INF
    if not tracks_match_claims(state.x, state.z):
        return NEG_INF
    return (
        log_counts_prior(state.counts, params)
        + log_dynamics(state.x, params)
        + log_observation(y, state.x, state.z, params)
        + annotations_logp(state.annotations, state.z)
    )


def all_clutter_state(
    y: ObservationSet, params: ModelParams, annotations: tuple[Annotation, ...] = ()
) -> ChainState:
    """The always-valid initial state: every observation is clutter."""
    z = AssociationHypothesis([np.zeros(n, dtype=int) for n in y.counts()])
    return ChainState.build(z, TrajectorySet(), y, params, annotations)
