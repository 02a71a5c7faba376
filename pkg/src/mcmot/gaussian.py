"""Linear-Gaussian kernels: filtering with gaps, backward sampling, smoothing.

All routines operate on a single object's time-stamped observation sequence.
Timesteps need not be consecutive; a gap of g missing steps is handled by the
g-step predictive (mean F^g m, covariance F^g P F^g' + sum_{i<g} F^i Q F^i'),
so states are only ever instantiated at observation times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


class NumericError(ValueError):
    """Raised when a covariance is not usable (non-PSD beyond tolerance)."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def robust_cholesky(cov: np.ndarray, allow_semidefinite: bool = False) -> np.ndarray:
    """Lower Cholesky factor, tolerating tiny asymmetry and semidefiniteness.

    On factorization failure a symmetric jitter of 1e-9 * trace/dim is tried;
    if that also fails and `allow_semidefinite` is set, negative eigenvalues
    are clipped to zero (so a zero matrix yields a zero factor exactly).
    """
    cov = symmetrize(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    dim = cov.shape[0]
    jitter = 1e-9 * np.trace(cov) / dim
    if jitter > 0:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(dim))
        except np.linalg.LinAlgError:
            pass
    if not allow_semidefinite:
        raise NumericError("covariance is not positive definite")
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(np.max(np.abs(evals))), 1.0)
    if float(np.min(evals)) < -1e-9 * scale:
        warnings.warn("clipping negative covariance eigenvalues before draw")
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals)


@dataclass
class GaussianBelief:
    """Mean and covariance of one latent state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if type(self.mean) is float:
            self.mean = np.array([self.mean])
            self.cov = np.array([[self.cov]])
        else:
            self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))


class _Pdf:
    """Precomputed Gaussian log-density with a fixed covariance."""

    __slots__ = ("dim", "_chol", "log_norm", "inv_var")

    def __init__(self, cov: np.ndarray):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        self.dim = cov.shape[0]
        if self.dim == 1:
            var = float(cov[0, 0])
            if var <= 0:
                raise NumericError("covariance is not positive definite")
            self.inv_var = 1.0 / var
            self._chol = None
            self.log_norm = -0.5 * (LOG_2PI + math.log(var))
        else:
            self.inv_var = None
            self._chol = robust_cholesky(cov)
            self.log_norm = -0.5 * self.dim * LOG_2PI - float(
                np.sum(np.log(np.diag(self._chol)))
            )

    def logpdf1(self, resid: float) -> float:
        """Scalar-covariance path; resid is a plain float."""
        return self.log_norm - 0.5 * resid * resid * self.inv_var

    def logpdf(self, resid) -> float:
        if self.inv_var is not None:
            r = resid if type(resid) is float else float(np.asarray(resid).ravel()[0])
            return self.log_norm - 0.5 * r * r * self.inv_var
        w = np.linalg.solve(self._chol, np.asarray(resid, dtype=float).ravel())
        return self.log_norm - 0.5 * float(w @ w)

    def logpdf_many(self, resids: np.ndarray) -> np.ndarray:
        """Rows of `resids` are residual vectors."""
        resids = np.atleast_2d(np.asarray(resids, dtype=float))
        if self.inv_var is not None:
            return self.log_norm - 0.5 * resids[:, 0] ** 2 * self.inv_var
        w = np.linalg.solve(self._chol, resids.T)
        return self.log_norm - 0.5 * np.sum(w * w, axis=0)


def gaussian_logpdf(x, mean, cov) -> float:
    """log N(x | mean, cov) for one point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    return _Pdf(cov).logpdf(x - mean)


class Transition(NamedTuple):
    """g-step transition operators: x' ~ N(F_g x, Q_g)."""

    F: np.ndarray
    Q: np.ndarray


class TransitionCache:
    """Per-gap powers F^g and noise sums, built by repeated squaring."""

    def __init__(self, F: np.ndarray, Q: np.ndarray):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self._table: dict[int, Transition] = {1: Transition(F, Q)}
        self.scalar = F.shape == (1, 1)
        self._table1: dict[int, tuple[float, float]] = (
            {1: (float(F[0, 0]), float(Q[0, 0]))} if self.scalar else {}
        )

    def __call__(self, gap: int) -> Transition:
        if gap < 1:
            raise ValueError(f"gap must be >= 1, got {gap}")
        hit = self._table.get(gap)
        if hit is not None:
            return hit
        half = self(gap // 2)
        # compose: g//2 steps then another g//2 (+1) steps
        F2 = half.F @ half.F
        Q2 = half.F @ half.Q @ half.F.T + half.Q
        if gap % 2:
            one = self._table[1]
            F2, Q2 = one.F @ F2, one.F @ Q2 @ one.F.T + one.Q
        out = Transition(F2, symmetrize(Q2))
        self._table[gap] = out
        return out

    def scalars(self, gap: int) -> tuple[float, float]:
        """(F^g, Q_g) as floats; only valid for 1-D models."""
        hit = self._table1.get(gap)
        if hit is None:
            tr = self(gap)
            hit = (float(tr.F[0, 0]), float(tr.Q[0, 0]))
            self._table1[gap] = hit
        return hit


class FilterStep(NamedTuple):
    time: int
    predicted: GaussianBelief
    filtered: GaussianBelief


def _validate_sequence(times, ys, params):
    times = np.asarray(times, dtype=int)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[0] != times.shape[0]:
        raise ValueError("times and observations must align")
    if times.size == 0:
        raise ValueError("empty observation sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("observation times must be strictly increasing")
    if ys.shape[1] != np.atleast_2d(params.H).shape[0]:
        raise ValueError("observation dimension mismatch")
    return times, ys


def _joseph_update(m, P, y, H, R):
    S = symmetrize(H @ P @ H.T + R)
    K = np.linalg.solve(S.T, (P @ H.T).T).T
    m_f = m + K @ (y - H @ m)
    A = np.eye(P.shape[0]) - K @ H
    P_f = symmetrize(A @ P @ A.T + K @ R @ K.T)
    return m_f, P_f, S


def _scalar_model(params) -> bool:
    return np.atleast_2d(params.F).shape == (1, 1) and np.atleast_2d(params.H).shape == (1, 1)


def filter_pass(times, ys, params) -> list[FilterStep]:
    """Kalman filter over one object's observations, marginalizing gaps.

    The first time is the arrival: prediction there is the trajectory prior
    N(mu0, Sigma0). Returns per-time (predicted, filtered) beliefs.
    """
    times, ys = _validate_sequence(times, ys, params)
    if _scalar_model(params):
        return _filter_pass_1d(times, ys, params)
    H = np.atleast_2d(params.H)
    R = np.atleast_2d(params.R)
    trans = params.transition
    steps = []
    m = np.atleast_1d(np.asarray(params.mu0, dtype=float))
    P = np.atleast_2d(np.asarray(params.Sigma0, dtype=float))
    prev_t = None
    for t, y in zip(times, ys):
        if prev_t is not None:
            Fg, Qg = trans(int(t - prev_t))
            m = Fg @ m
            P = symmetrize(Fg @ P @ Fg.T + Qg)
        predicted = GaussianBelief(m, P)
        m, P, _ = _joseph_update(m, P, y, H, R)
        steps.append(FilterStep(int(t), predicted, GaussianBelief(m, P)))
        prev_t = t
    return steps


def _filter_pass_1d(times, ys, params) -> list[FilterStep]:
    h = float(np.atleast_2d(params.H)[0, 0])
    r = float(np.atleast_2d(params.R)[0, 0])
    trans = params.transition
    m = float(np.atleast_1d(params.mu0)[0])
    P = float(np.atleast_2d(params.Sigma0)[0, 0])
    obs = np.asarray(ys, dtype=float).ravel()
    steps = []
    prev_t = None
    for t, yv in zip(times, obs):
        if prev_t is not None:
            f, q = trans.scalars(int(t - prev_t))
            m = f * m
            P = f * P * f + q
        pred = (m, P)
        S = h * P * h + r
        K = P * h / S
        m = m + K * (yv - h * m)
        A = 1.0 - K * h
        P = A * P * A + K * r * K
        steps.append(FilterStep(
            int(t), GaussianBelief(pred[0], pred[1]), GaussianBelief(m, P)
        ))
        prev_t = t
    return steps


def log_marginal_likelihood(times, ys, params) -> float:
    """log p(y_1..y_m) by the prediction-error decomposition."""
    times, ys = _validate_sequence(times, ys, params)
    if _scalar_model(params):
        h = float(np.atleast_2d(params.H)[0, 0])
        r = float(np.atleast_2d(params.R)[0, 0])
        trans = params.transition
        m = float(np.atleast_1d(params.mu0)[0])
        P = float(np.atleast_2d(params.Sigma0)[0, 0])
        obs = np.asarray(ys, dtype=float).ravel()
        total = 0.0
        prev_t = None
        for t, yv in zip(times, obs):
            if prev_t is not None:
                f, q = trans.scalars(int(t - prev_t))
                m = f * m
                P = f * P * f + q
            S = h * P * h + r
            resid = yv - h * m
            total += -0.5 * (LOG_2PI + math.log(S)) - 0.5 * resid * resid / S
            K = P * h / S
            m = m + K * resid
            A = 1.0 - K * h
            P = A * P * A + K * r * K
            prev_t = t
        return total
    H = np.atleast_2d(params.H)
    R = np.atleast_2d(params.R)
    trans = params.transition
    total = 0.0
    m = np.atleast_1d(np.asarray(params.mu0, dtype=float))
    P = np.atleast_2d(np.asarray(params.Sigma0, dtype=float))
    prev_t = None
    for t, y in zip(times, ys):
        if prev_t is not None:
            Fg, Qg = trans(int(t - prev_t))
            m = Fg @ m
            P = symmetrize(Fg @ P @ Fg.T + Qg)
        S = symmetrize(H @ P @ H.T + R)
        total += _Pdf(S).logpdf(y - H @ m)
        m, P, _ = _joseph_update(m, P, y, H, R)
        prev_t = t
    return float(total)


def smoother_marginals(steps: list[FilterStep], params) -> list[GaussianBelief]:
    """Backward recursion for per-time smoothed beliefs over the gap structure."""
    if not steps:
        raise ValueError("empty filter output")
    trans = params.transition
    out = [None] * len(steps)
    out[-1] = steps[-1].filtered
    for j in range(len(steps) - 2, -1, -1):
        gap = steps[j + 1].time - steps[j].time
        Fg, Qg = trans(gap)
        m, P = steps[j].filtered.mean, steps[j].filtered.cov
        P_pred = symmetrize(Fg @ P @ Fg.T + Qg)
        C = np.linalg.solve(P_pred.T, (P @ Fg.T).T).T
        m_s = m + C @ (out[j + 1].mean - Fg @ m)
        P_s = symmetrize(P + C @ (out[j + 1].cov - P_pred) @ C.T)
        out[j] = GaussianBelief(m_s, P_s)
    return out


def backward_sample(steps: list[FilterStep], params, rng: np.random.Generator,
                    size: int | None = None) -> np.ndarray:
    """Joint draw of states at the observation times, back to front.

    Returns an array of shape (n_times, D_x), or (size, n_times, D_x) when
    `size` is given (the draws are independent).
    """
    if not steps:
        raise ValueError("empty filter output")
    trans = params.transition
    n = len(steps)
    dim = steps[0].filtered.mean.shape[0]
    k = 1 if size is None else size
    draws = np.empty((k, n, dim))
    if dim == 1 and trans.scalar:
        last = steps[-1].filtered
        var = max(float(last.cov[0, 0]), 0.0)
        draws[:, -1, 0] = last.mean[0] + math.sqrt(var) * rng.standard_normal(k)
        for j in range(n - 2, -1, -1):
            f, q = trans.scalars(steps[j + 1].time - steps[j].time)
            m = float(steps[j].filtered.mean[0])
            P = float(steps[j].filtered.cov[0, 0])
            P_pred = f * P * f + q
            G = P * f / P_pred if P_pred > 0 else 0.0
            A = 1.0 - G * f
            P_c = max(A * P * A + G * q * G, 0.0)
            mean_c = m + G * (draws[:, j + 1, 0] - f * m)
            draws[:, j, 0] = mean_c + math.sqrt(P_c) * rng.standard_normal(k)
        return draws[0] if size is None else draws
    last = steps[-1].filtered
    L = robust_cholesky(last.cov, allow_semidefinite=True)
    draws[:, -1, :] = last.mean + rng.standard_normal((k, dim)) @ L.T
    for j in range(n - 2, -1, -1):
        gap = steps[j + 1].time - steps[j].time
        Fg, Qg = trans(gap)
        m, P = steps[j].filtered.mean, steps[j].filtered.cov
        P_pred = symmetrize(Fg @ P @ Fg.T + Qg)
        G = np.linalg.solve(P_pred.T, (P @ Fg.T).T).T
        A = np.eye(dim) - G @ Fg
        P_c = symmetrize(A @ P @ A.T + G @ Qg @ G.T)
        L = robust_cholesky(P_c, allow_semidefinite=True)
        mean_c = m + (draws[:, j + 1, :] - (Fg @ m)) @ G.T
        draws[:, j, :] = mean_c + rng.standard_normal((k, dim)) @ L.T
    return draws[0] if size is None else draws
