"""The five chain moves: Switch, Gather, Disperse, Extend, and the FFBS Gibbs sweep.

Each move returns a ProposalOutcome carrying the proposed state and its log
Hastings ratio. Moves never mutate the input state; the sampler applies the
accept decision.

Ratio bookkeeping notes (constraints the code must honor):

* Switch permutes (state, association) pairs jointly per time, so observation
  factors cancel identically; what remains is the counts ratio plus, when the
  selected objects are not all observed at every switch time, a correction
  from the forward/reverse placement normalizers (they only cancel in the
  fully-observed case) and the dynamics factors at pinned times.
* Gather draws the new object's label position uniformly, which makes Disperse
  (uniform object choice, highest label moved into the gap) its exact labeled
  reverse; the two uniform choices cancel, leaving the move-kind probability
  ratio and the claim-sequence density.
* Extend is its own reverse: the candidate set {clutter or k} at each time is
  invariant under the move, so forward and reverse walk the same time range.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian
from .model import (
    NEG_INF,
    AssociationHypothesis,
    ChainState,
    ModelParams,
    ObjectTrack,
    ObservationSet,
    TrajectorySet,
    annotations_logp,
    derive_counts,
    log_counts_prior,
    track_dynamics_logp,
)

AUTO_ACCEPT = "auto-accept"
AUTO_REJECT = "auto-reject"
METROPOLIS = "metropolis"


@dataclass
class ProposalOutcome:
    state: ChainState
    log_ratio: float
    move: str
    decision: str
    accepted: bool = False
    noop: bool = False
    diagnostics: dict = field(default_factory=dict)


def _noop(state: ChainState, move: str, **diag) -> ProposalOutcome:
    return ProposalOutcome(
        state=state, log_ratio=0.0, move=move, decision=AUTO_ACCEPT,
        accepted=True, noop=True, diagnostics=diag,
    )


def _reject(state: ChainState, move: str, **diag) -> ProposalOutcome:
    return ProposalOutcome(
        state=state, log_ratio=NEG_INF, move=move, decision=AUTO_REJECT,
        accepted=False, diagnostics=diag,
    )


def _logsumexp(v) -> float:
    hi = max(v)
    if hi == NEG_INF:
        return NEG_INF
    exp, total = math.exp, 0.0
    for x in v:
        total += exp(x - hi)
    return hi + math.log(total)


def _categorical(logw, rng) -> tuple[int, float]:
    """Draw an index proportional to exp(logw); returns (index, log prob)."""
    hi = max(logw)
    exp = math.exp
    weights = [exp(x - hi) for x in logw]
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    i = len(weights) - 1
    for j, w in enumerate(weights):
        acc += w
        if u < acc:
            i = j
            break
    return i, float(logw[i] - hi - math.log(total))


_INJECTIONS: dict[tuple[int, int], np.ndarray] = {}


def _injections(n_slots: int, n_values: int) -> np.ndarray:
    """All ways of placing n_values distinct items into distinct slots."""
    key = (n_slots, n_values)
    hit = _INJECTIONS.get(key)
    if hit is None:
        hit = np.array(list(itertools.permutations(range(n_slots), n_values)), dtype=int)
        _INJECTIONS[key] = hit
    return hit


# ---------------------------------------------------------------------------
# Switch


def propose_switch(state, y, params, config, rng) -> ProposalOutcome:
    """Permute trajectory/association slices of a sampled object subset over time."""
    K = state.num_objects
    if K < 2:
        return _noop(state, "switch", reason="fewer-than-two-objects")
    k_hi = min(config.switch_max_objects, K)
    size = int(rng.integers(2, k_hi + 1)) if k_hi > 2 else 2
    subset = sorted(int(v) + 1 for v in rng.choice(K, size=size, replace=False))
    S = len(subset)

    tracks = {k: state.x.track(k) for k in subset}
    claim_at = {k: dict(state.z.claims_of(k)) for k in subset}  # t -> n
    times = sorted({t for k in subset for t, _ in state.z.claims_of(k)})
    if config.switch_pin_first_two:
        pinned = set()
        for k in subset:
            pinned.update(t for t, _ in state.z.claims_of(k)[:2])
    else:
        pinned = set()
    free_times = [t for t in times if t not in pinned]
    if not free_times:
        return _noop(state, "switch", reason="all-times-pinned", subset_size=S)

    def dyn_factor(value, last, t):
        if last is None:
            return params.prior_logpdf(value)
        return params.dyn_logpdf(t - last[0], value, last[1])

    last_prop = {k: None for k in subset}  # slot -> (time, value) under proposal
    last_orig = {k: None for k in subset}  # slot -> (time, value) under current state
    placements: dict[int, dict[int, int]] = {}  # t -> {object k -> slot}
    log_zf = 0.0
    log_zr = 0.0
    pin_prop = 0.0
    pin_orig = 0.0
    fully_observed = True
    weight_evals = 0
    trace = [] if getattr(config, "debug_proposals", False) else None

    for t in times:
        present = [k for k in subset if t in claim_at[k]]
        values = [tracks[k].state_at(t) for k in present]
        if t in pinned:
            for k, v in zip(present, values):
                pin_prop += dyn_factor(v, last_prop[k], t)
                pin_orig += dyn_factor(v, last_orig[k], t)
                last_prop[k] = (t, v)
                last_orig[k] = (t, v)
            continue
        m = len(present)
        if m < S:
            fully_observed = False
        D_f = np.empty((m, S))
        D_r = np.empty((m, S))
        for i, v in enumerate(values):
            for j, slot in enumerate(subset):
                D_f[i, j] = dyn_factor(v, last_prop[slot], t)
                D_r[i, j] = dyn_factor(v, last_orig[slot], t)
        inj = _injections(S, m)
        rows = np.arange(m)
        logw_f = D_f[rows, inj].sum(axis=1).tolist()
        weight_evals += inj.shape[0]
        choice, logp_choice = _categorical(logw_f, rng)
        log_zf += _logsumexp(logw_f)
        log_zr += _logsumexp(D_r[rows, inj].sum(axis=1).tolist())
        phi = {present[i]: subset[inj[choice, i]] for i in range(m)}
        placements[t] = phi
        if trace is not None:
            trace.append((t, np.asarray(logw_f) - _logsumexp(logw_f), choice))
        for i, k in enumerate(present):
            last_prop[phi[k]] = (t, values[i])
            last_orig[k] = (t, values[i])

    diag = {"subset_size": S, "n_times": len(times), "weight_evals": weight_evals}
    if trace is not None:
        diag["trace"] = trace

    identity = all(all(phi[k] == k for k in phi) for phi in placements.values())
    if identity:
        return ProposalOutcome(
            state=state, log_ratio=0.0, move="switch", decision=AUTO_ACCEPT,
            accepted=True, noop=True, diagnostics=diag,
        )

    new_labels: dict[int, np.ndarray] = {}
    for t, phi in placements.items():
        arr = state.z.labels[t - 1].copy()
        for k, slot in phi.items():
            arr[claim_at[k][t]] = slot
        new_labels[t] = arr
    z_new = state.z.with_labels(new_labels)

    if not fully_observed:
        if config.switch_pin_first_two:
            for k in subset:
                firsts = {t for t, _ in z_new.claims_of(k)[:2]}
                if firsts != {t for t, _ in state.z.claims_of(k)[:2]}:
                    return _reject(state, "switch", reason="pin-structure-changed", **diag)
        else:
            for k in subset:
                if len(z_new.claims_of(k)) < 2:
                    return _reject(state, "switch", reason="object-below-two", **diag)

    slot_series: dict[int, list[tuple[int, np.ndarray]]] = {k: [] for k in subset}
    for t in times:
        phi = placements.get(t)
        for k in subset:
            if t in claim_at[k]:
                slot = phi[k] if phi is not None else k
                slot_series[slot].append((t, tracks[k].state_at(t)))
    new_tracks = dict(state.x.tracks)
    for k in subset:
        series = slot_series[k]
        new_tracks[k] = ObjectTrack([t for t, _ in series], [v for _, v in series])
    x_new = TrajectorySet(new_tracks)
    d_new = sum(track_dynamics_logp(new_tracks[k], params) for k in subset)
    d_old = sum(track_dynamics_logp(tracks[k], params) for k in subset)

    if fully_observed:
        # every selected object observed at every free time: counts are
        # unchanged and the placement normalizers cancel exactly
        logp_annot_new = annotations_logp(state.annotations, z_new)
        new_state = ChainState(
            z=z_new, x=x_new, counts=state.counts, annotations=state.annotations,
            logp_counts=state.logp_counts,
            logp_dyn=state.logp_dyn + d_new - d_old,
            logp_obs=state.logp_obs,
            logp_annot=logp_annot_new,
        )
        log_ratio = logp_annot_new - state.logp_annot
        decision = AUTO_ACCEPT if log_ratio == 0.0 else METROPOLIS
        return ProposalOutcome(
            state=new_state, log_ratio=log_ratio, move="switch",
            decision=decision, accepted=decision == AUTO_ACCEPT, diagnostics=diag,
        )

    counts_new = derive_counts(z_new)
    logp_counts_new = log_counts_prior(counts_new, params)
    logp_annot_new = annotations_logp(state.annotations, z_new)
    new_state = ChainState(
        z=z_new, x=x_new, counts=counts_new, annotations=state.annotations,
        logp_counts=logp_counts_new,
        logp_dyn=state.logp_dyn + d_new - d_old,
        logp_obs=state.logp_obs,
        logp_annot=logp_annot_new,
    )
    log_ratio = (
        (logp_counts_new - state.logp_counts)
        + (logp_annot_new - state.logp_annot)
        + (pin_prop - pin_orig)
        + (log_zf - log_zr)
    )
    return ProposalOutcome(
        state=new_state, log_ratio=log_ratio, move="switch",
        decision=METROPOLIS, diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# claim-sequence machinery shared by Gather / Disperse / Extend


@dataclass
class ClaimPlan:
    claims: list  # [(t, n)]
    times: list
    states: list
    log_density: float


def _walk_claims(
    y: ObservationSet,
    params: ModelParams,
    skip_prob: float,
    t_lo: int,
    t_hi: int,
    candidates_by_t: dict[int, np.ndarray],
    rng=None,
    forced: dict[int, tuple[int, np.ndarray]] | None = None,
) -> ClaimPlan:
    """Walk the time range once, claiming observations and drawing states.

    With `rng` given, decisions are sampled and the accumulated value is the
    log proposal density of what was sampled. With `forced` given (a map
    t -> (n, state) for claim times; absent keys mean skip), the same walk
    scores the forced outcome instead, which is how reverse densities are
    evaluated.
    """
    log_delta = math.log(skip_prob)
    log_keep = math.log1p(-skip_prob)
    claims: list[tuple[int, int]] = []
    times: list[int] = []
    states: list[np.ndarray] = []
    logden = 0.0
    last_t: int | None = None
    last_state: np.ndarray | None = None
    for t in range(t_lo, t_hi + 1):
        cands = candidates_by_t.get(t)
        if cands is None or len(cands) == 0:
            continue  # forced skip, unit weight both ways
        if forced is not None:
            hit = forced.get(t)
            if hit is None:
                logden += log_delta
                continue
            n_pick, value = hit
            idx = int(np.flatnonzero(cands == n_pick)[0]) if n_pick in cands else -1
            if idx < 0:
                return ClaimPlan([], [], [], NEG_INF)
            logden += log_keep
        else:
            if rng.random() < skip_prob:
                logden += log_delta
                continue
            logden += log_keep
        gap = None if last_t is None else t - last_t
        pp = params.point_predictive(gap)
        block = y.at(t)
        logw = pp.obs_logpdf_many(block[cands], last_state).tolist()
        if forced is not None:
            z = _logsumexp(logw)
            logden += float(logw[idx]) - z
            logden += pp.draw_logpdf(value, block[n_pick], last_state)
            n = n_pick
        else:
            i, logp = _categorical(logw, rng)
            n = int(cands[i])
            logden += logp
            value = pp.draw(block[n], last_state, rng)
            logden += pp.draw_logpdf(value, block[n], last_state)
        claims.append((t, n))
        times.append(t)
        states.append(np.asarray(value, dtype=float))
        last_t, last_state = t, value
    return ClaimPlan(claims, times, states, logden)


def _clutter_candidates(z: AssociationHypothesis) -> dict[int, np.ndarray]:
    out = {}
    for t in range(1, z.horizon + 1):
        c = z.clutter_at(t)
        if len(c):
            out[t] = c
    return out


def _move_weight(config, kind: str) -> float:
    return float(config.move_weights.get(kind, 0.0))


def _obs_logpdf_claims(y, params, claims, times, states) -> float:
    total = 0.0
    for (t, n), value in zip(claims, states):
        total += params.obs_logpdf_state(y.y(t, n), value)
    return total


def _clutter_logpdf_claims(y, params, claims) -> float:
    return float(sum(params.clutter_logpdf(y.y(t, n)) for t, n in claims))


def propose_gather(state, y, params, config, rng) -> ProposalOutcome:
    """Form a new object out of currently-clutter observations."""
    cands = _clutter_candidates(state.z)
    if len(cands) < 2:
        return _noop(state, "gather", reason="insufficient-clutter")
    t_lo, t_hi = min(cands), max(cands)
    plan = _walk_claims(y, params, config.skip_probability, t_lo, t_hi, cands, rng=rng)
    if len(plan.claims) < 2:
        return _reject(state, "gather", reason="fewer-than-two-claims")

    K = state.num_objects
    label = int(rng.integers(1, K + 2))  # uniform insertion position
    new_labels: dict[int, np.ndarray] = {}
    for t, n in plan.claims:
        arr = new_labels.get(t, state.z.labels[t - 1].copy())
        arr[n] = K + 1  # provisional top label
        new_labels[t] = arr
    if label <= K:
        # move current occupant of `label` to the top, put the new object at `label`
        for t, n in state.z.claims_of(label):
            arr = new_labels.get(t, state.z.labels[t - 1].copy())
            arr[n] = K + 1
            new_labels[t] = arr
        for t, n in plan.claims:
            new_labels[t][n] = label
    z_new = state.z.with_labels(new_labels)
    new_track = ObjectTrack(plan.times, plan.states)
    tracks = dict(state.x.tracks)
    if label <= K:
        tracks[K + 1] = tracks.pop(label)
    tracks[label] = new_track
    x_new = TrajectorySet(tracks)

    counts_new = derive_counts(z_new)
    logp_counts_new = log_counts_prior(counts_new, params)
    d_gain = track_dynamics_logp(new_track, params)
    obs_gain = _obs_logpdf_claims(y, params, plan.claims, plan.times, plan.states)
    obs_loss = _clutter_logpdf_claims(y, params, plan.claims)
    logp_annot_new = annotations_logp(state.annotations, z_new)
    new_state = ChainState(
        z=z_new, x=x_new, counts=counts_new, annotations=state.annotations,
        logp_counts=logp_counts_new,
        logp_dyn=state.logp_dyn + d_gain,
        logp_obs=state.logp_obs + obs_gain - obs_loss,
        logp_annot=logp_annot_new,
    )
    w_d, w_g = _move_weight(config, "disperse"), _move_weight(config, "gather")
    kind_ratio = math.log(w_d) - math.log(w_g) if w_d > 0 and w_g > 0 else NEG_INF
    log_ratio = (
        (new_state.log_joint - state.log_joint) + kind_ratio - plan.log_density
    )
    return ProposalOutcome(
        state=new_state, log_ratio=log_ratio, move="gather", decision=METROPOLIS,
        diagnostics={"claims": len(plan.claims), "label": label},
    )


def propose_disperse(state, y, params, config, rng) -> ProposalOutcome:
    """Return one object's observations to clutter and drop its states."""
    K = state.num_objects
    if K == 0:
        return _noop(state, "disperse", reason="no-objects")
    k = int(rng.integers(1, K + 1))
    removed_claims = list(state.z.claims_of(k))
    removed_track = state.x.track(k)

    new_labels: dict[int, np.ndarray] = {}
    for t, n in removed_claims:
        arr = new_labels.get(t, state.z.labels[t - 1].copy())
        arr[n] = 0
        new_labels[t] = arr
    if k < K:
        for t, n in state.z.claims_of(K):
            arr = new_labels.get(t, state.z.labels[t - 1].copy())
            arr[n] = k
            new_labels[t] = arr
    z_new = state.z.with_labels(new_labels)
    tracks = dict(state.x.tracks)
    tracks.pop(k)
    if k < K:
        tracks[k] = tracks.pop(K)
    x_new = TrajectorySet(tracks)

    # reverse move: a Gather from z_new that reproduces exactly this object
    cands = _clutter_candidates(z_new)
    t_lo, t_hi = min(cands), max(cands)
    forced = {t: (n, removed_track.state_at(t)) for t, n in removed_claims}
    reverse = _walk_claims(
        y, params, config.skip_probability, t_lo, t_hi, cands, forced=forced
    )

    counts_new = derive_counts(z_new)
    logp_counts_new = log_counts_prior(counts_new, params)
    d_loss = track_dynamics_logp(removed_track, params)
    obs_loss = _obs_logpdf_claims(
        y, params, removed_claims, list(removed_track.times), list(removed_track.states)
    )
    obs_gain = _clutter_logpdf_claims(y, params, removed_claims)
    logp_annot_new = annotations_logp(state.annotations, z_new)
    new_state = ChainState(
        z=z_new, x=x_new, counts=counts_new, annotations=state.annotations,
        logp_counts=logp_counts_new,
        logp_dyn=state.logp_dyn - d_loss,
        logp_obs=state.logp_obs - obs_loss + obs_gain,
        logp_annot=logp_annot_new,
    )
    w_d, w_g = _move_weight(config, "disperse"), _move_weight(config, "gather")
    kind_ratio = math.log(w_g) - math.log(w_d) if w_d > 0 and w_g > 0 else NEG_INF
    log_ratio = (
        (new_state.log_joint - state.log_joint) + kind_ratio + reverse.log_density
    )
    return ProposalOutcome(
        state=new_state, log_ratio=log_ratio, move="disperse", decision=METROPOLIS,
        diagnostics={"object": k, "claims": len(removed_claims)},
    )


def propose_extend(state, y, params, config, rng) -> ProposalOutcome:
    """Let one object resample its claims against the clutter pool."""
    K = state.num_objects
    if K == 0:
        return _noop(state, "extend", reason="no-objects")
    k = int(rng.integers(1, K + 1))
    old_claims = list(state.z.claims_of(k))
    old_track = state.x.track(k)

    cands: dict[int, np.ndarray] = {}
    for t in range(1, state.z.horizon + 1):
        arr = state.z.labels[t - 1]
        pool = np.flatnonzero((arr == 0) | (arr == k))
        if len(pool):
            cands[t] = pool
    t_lo, t_hi = min(cands), max(cands)
    plan = _walk_claims(y, params, config.skip_probability, t_lo, t_hi, cands, rng=rng)
    if len(plan.claims) < 2:
        return _reject(state, "extend", reason="fewer-than-two-claims", object=k)

    new_labels: dict[int, np.ndarray] = {}
    for t, n in old_claims:
        arr = new_labels.get(t, state.z.labels[t - 1].copy())
        arr[n] = 0
        new_labels[t] = arr
    for t, n in plan.claims:
        arr = new_labels.get(t, state.z.labels[t - 1].copy())
        arr[n] = k
        new_labels[t] = arr
    z_new = state.z.with_labels(new_labels)
    new_track = ObjectTrack(plan.times, plan.states)
    x_new = state.x.with_track(k, new_track)

    # reverse density: the same walk reproducing the object's current claims
    forced = {t: (n, old_track.state_at(t)) for t, n in old_claims}
    reverse = _walk_claims(
        y, params, config.skip_probability, t_lo, t_hi, cands, forced=forced
    )

    counts_new = derive_counts(z_new)
    logp_counts_new = log_counts_prior(counts_new, params)
    old_set = set(old_claims)
    new_set = set(plan.claims)
    obs_new = _obs_logpdf_claims(y, params, plan.claims, plan.times, plan.states)
    obs_new += _clutter_logpdf_claims(y, params, [c for c in old_claims if c not in new_set])
    obs_old = _obs_logpdf_claims(
        y, params, old_claims, list(old_track.times), list(old_track.states)
    )
    obs_old += _clutter_logpdf_claims(y, params, [c for c in plan.claims if c not in old_set])
    logp_annot_new = annotations_logp(state.annotations, z_new)
    new_state = ChainState(
        z=z_new, x=x_new, counts=counts_new, annotations=state.annotations,
        logp_counts=logp_counts_new,
        logp_dyn=state.logp_dyn
        - track_dynamics_logp(old_track, params)
        + track_dynamics_logp(new_track, params),
        logp_obs=state.logp_obs + obs_new - obs_old,
        logp_annot=logp_annot_new,
    )
    log_ratio = (
        (new_state.log_joint - state.log_joint)
        + reverse.log_density
        - plan.log_density
    )
    return ProposalOutcome(
        state=new_state, log_ratio=log_ratio, move="extend", decision=METROPOLIS,
        diagnostics={"object": k, "claims": len(plan.claims)},
    )


# ---------------------------------------------------------------------------
# FFBS Gibbs sweep


def gibbs_trajectories(state, y, params, rng) -> ProposalOutcome:
    """Redraw every object's trajectory from its smoothing conditional."""
    if state.num_objects == 0:
        return _noop(state, "ffbs", reason="no-objects")
    tracks = dict(state.x.tracks)
    d_dyn = 0.0
    d_obs = 0.0
    for k in sorted(tracks):
        claims = state.z.claims_of(k)
        times = [t for t, _ in claims]
        ys = np.vstack([y.y(t, n) for t, n in claims])
        steps = gaussian.filter_pass(times, ys, params)
        states = gaussian.backward_sample(steps, params, rng)
        new_track = ObjectTrack(times, states)
        old_track = tracks[k]
        d_dyn += track_dynamics_logp(new_track, params) - track_dynamics_logp(old_track, params)
        d_obs += _obs_logpdf_claims(y, params, claims, times, list(states))
        d_obs -= _obs_logpdf_claims(y, params, claims, times, list(old_track.states))
        tracks[k] = new_track
    new_state = ChainState(
        z=state.z, x=TrajectorySet(tracks), counts=state.counts,
        annotations=state.annotations,
        logp_counts=state.logp_counts,
        logp_dyn=state.logp_dyn + d_dyn,
        logp_obs=state.logp_obs + d_obs,
        logp_annot=state.logp_annot,
    )
    return ProposalOutcome(
        state=new_state, log_ratio=0.0, move="ffbs", decision=AUTO_ACCEPT,
        accepted=True, diagnostics={"objects": len(tracks)},
    )


MOVES = {
    "switch": propose_switch,
    "gather": propose_gather,
    "disperse": propose_disperse,
    "extend": propose_extend,
}
