import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom, poisson

from mcmot.model import (
    Annotation,
    AssociationError,
    AssociationHypothesis,
    ChainState,
    Design,
    EventCounts,
    ModelParams,
    ObjectTrack,
    ObservationSet,
    TrajectorySet,
    all_clutter_state,
    annotation_log_likelihood,
    canonical_relabel,
    check_validity,
    derive_counts,
    log_counts_prior,
    log_dynamics,
    log_joint,
    log_observation,
    permute_labels,
)

from .oracles import scalar_gauss_logpdf


def z_from(labels):
    return AssociationHypothesis([np.array(row, dtype=int) for row in labels])


# z for: obj1 at t in {1,2,3}, obj2 at t in {2,3,4}, one clutter at t=4
TWO_OBJECT_LABELS = [[1], [1, 2], [1, 2], [2, 0]]


def two_object_instance():
    z = z_from(TWO_OBJECT_LABELS)
    y = ObservationSet([
        [[0.0]],
        [[0.2], [3.0]],
        [[0.5], [3.3]],
        [[3.1], [-5.0]],
    ])
    x = TrajectorySet({
        1: ObjectTrack([1, 2, 3], [[0.1], [0.25], [0.4]]),
        2: ObjectTrack([2, 3, 4], [[3.0], [3.2], [3.15]]),
    })
    return y, z, x


class TestDeriveCounts:
    def test_all_clutter(self):
        z = z_from([[0, 0], [0], [0, 0]])
        m = derive_counts(z)
        assert list(m.arrivals) == [0, 0, 0]
        assert list(m.clutter) == [2, 1, 2]
        assert list(m.detections) == [0, 0, 0]
        assert list(m.departures) == [0, 0, 0]

    def test_missing_detection_contributes_no_count(self):
        # object present at t in {1,2,4,5} of T=5, missing at t=3
        z = z_from([[1], [1], [0], [1], [1]])
        m = derive_counts(z)
        assert list(m.arrivals) == [1, 0, 0, 0, 0]
        assert list(m.departures) == [0, 0, 0, 0, 1]
        assert list(m.detections) == [0, 1, 0, 1, 1]
        assert list(m.clutter) == [0, 0, 1, 0, 0]

    def test_two_object_instance(self):
        m = derive_counts(z_from(TWO_OBJECT_LABELS))
        assert list(m.arrivals) == [1, 1, 0, 0]
        assert list(m.departures) == [0, 0, 1, 1]
        assert list(m.detections) == [0, 1, 2, 1]
        assert list(m.clutter) == [0, 0, 0, 1]
        assert list(m.existing) == [1, 2, 1, 0]

    def test_duplicate_claim_raises_with_indices(self):
        z = z_from([[1, 0], [1, 1]])
        with pytest.raises(AssociationError) as err:
            derive_counts(z)
        assert err.value.time == 2
        assert err.value.obj == 1


class TestCheckValidity:
    def test_duplicate_claim_reported(self):
        z = z_from([[1, 0], [1, 1]])
        v = check_validity(z, EventCounts([1, 0], [1, 0], [0, 2], [0, 1]))
        assert v is not None and v.constraint == "unique-claim"
        assert v.time == 2 and v.obj == 1

    def test_empty_scene_ok(self):
        z = z_from([[]])
        m = EventCounts([0], [0], [0], [0])
        assert check_validity(z, m) is None

    def test_round_trip_and_tampered_clutter(self):
        z = z_from(TWO_OBJECT_LABELS)
        m = derive_counts(z)
        assert check_validity(z, m) is None
        bad = EventCounts(m.arrivals, [0, 0, 0, 0], m.detections, m.departures)
        v = check_validity(z, bad)
        assert v is not None and v.constraint == "clutter-count" and v.time == 4

    def test_single_observation_object_rejected(self):
        z = z_from([[1], [0]])
        v = check_validity(z, derive_counts(z))
        assert v is not None and v.constraint == "two-observations"

    def test_non_contiguous_labels_rejected(self):
        z = z_from([[2], [2]])
        v = check_validity(z, derive_counts(z))
        assert v is not None and v.constraint == "contiguous-labels"


def counts_prior_oracle(m: EventCounts, params: ModelParams) -> float:
    """Independent term-by-term evaluation with scipy.stats."""
    total = 0.0
    e_prev = 0
    for t in range(m.horizon):
        a, f, d, lam = (int(m.arrivals[t]), int(m.clutter[t]),
                        int(m.detections[t]), int(m.departures[t]))
        trials = e_prev + a if params.detection_trials == "arrivals_included" else e_prev
        total += poisson.logpmf(a, params.lambda_b)
        total += poisson.logpmf(f, params.lambda_f)
        total += binom.logpmf(d, trials, params.p_d)
        total += binom.logpmf(lam, d, params.p_lam)
        e_prev = e_prev + a - lam
    return float(total)


class TestLogCountsPrior:
    def test_all_zero_counts(self, params_1d):
        T = 7
        m = EventCounts(*(np.zeros(T, dtype=int) for _ in range(4)))
        want = -T * (params_1d.lambda_b + params_1d.lambda_f)
        assert log_counts_prior(m, params_1d) == pytest.approx(want, abs=1e-12)

    def test_departures_exceeding_detections_impossible(self, params_1d):
        m = EventCounts([1, 0], [0, 0], [0, 0], [0, 1])
        assert log_counts_prior(m, params_1d) == -math.inf

    def test_two_object_counts_match_scipy_oracle(self, params_1d):
        m = derive_counts(z_from(TWO_OBJECT_LABELS))
        got = log_counts_prior(m, params_1d)
        assert got == pytest.approx(counts_prior_oracle(m, params_1d), abs=1e-10)

    def test_literal_support_convention(self, params_1d):
        from dataclasses import asdict
        literal = ModelParams(**{**{f: getattr(params_1d, f) for f in (
            "F", "Q", "H", "R", "mu0", "Sigma0", "mu_fp", "Sigma_fp",
            "lambda_b", "lambda_f", "p_d", "p_lam")},
            "detection_trials": "existing_only"})
        m = derive_counts(z_from(TWO_OBJECT_LABELS))
        got = log_counts_prior(m, literal)
        assert got == pytest.approx(counts_prior_oracle(m, literal), abs=1e-10)
        assert got != pytest.approx(log_counts_prior(m, params_1d))


class TestLogDynamics:
    def test_single_state_is_prior_only(self, params_1d):
        x = TrajectorySet({1: ObjectTrack([1], [[1.5]])})
        want = scalar_gauss_logpdf(1.5, 0.0, 100.0)
        assert log_dynamics(x, params_1d) == pytest.approx(want, abs=1e-12)

    def test_gap_scored_under_marginalized_predictive(self, params_1d):
        # F=1, Q=1: states 0 at t=1 and 3 at t=4, so the 3-step variance is 3
        x = TrajectorySet({1: ObjectTrack([1, 4], [[0.0], [3.0]])})
        want = scalar_gauss_logpdf(0.0, 0.0, 100.0) + scalar_gauss_logpdf(3.0, 0.0, 3.0)
        assert log_dynamics(x, params_1d) == pytest.approx(want, abs=1e-12)

    def test_fig2_style_gap_is_two_step_predictive(self, params_1d):
        x = TrajectorySet({1: ObjectTrack([1, 2, 4, 5], [[0.0], [0.5], [0.8], [1.0]])})
        want = (
            scalar_gauss_logpdf(0.0, 0.0, 100.0)
            + scalar_gauss_logpdf(0.5, 0.0, 1.0)
            + scalar_gauss_logpdf(0.8, 0.5, 2.0)
            + scalar_gauss_logpdf(1.0, 0.8, 1.0)
        )
        assert log_dynamics(x, params_1d) == pytest.approx(want, abs=1e-12)


class TestLogObservation:
    def test_all_clutter(self, params_1d):
        y = ObservationSet([[[0.1], [2.0]], [[1.0]]])
        z = z_from([[0, 0], [0]])
        want = sum(scalar_gauss_logpdf(v, 0.0, 100.0) for v in (0.1, 2.0, 1.0))
        assert log_observation(y, TrajectorySet(), z, params_1d) == pytest.approx(want)

    def test_zero_residual_term(self, params_1d):
        y = ObservationSet([[[2.0]], [[2.0]]])
        z = z_from([[1], [1]])
        x = TrajectorySet({1: ObjectTrack([1, 2], [[2.0], [2.0]])})
        got = log_observation(y, x, z, params_1d)
        want = 2 * (-0.5 * math.log(2 * math.pi))
        assert got == pytest.approx(want, abs=1e-12)

    def test_mixed_instance_matches_scalar_oracle(self, params_1d):
        y, z, x = two_object_instance()
        want = 0.0
        states = {1: {1: 0.1, 2: 0.25, 3: 0.4}, 2: {2: 3.0, 3: 3.2, 4: 3.15}}
        for t in range(1, 5):
            for n, k in enumerate(TWO_OBJECT_LABELS[t - 1]):
                v = float(y.y(t, n)[0])
                if k > 0:
                    want += scalar_gauss_logpdf(v, states[k][t], 1.0)
                else:
                    want += scalar_gauss_logpdf(v, 0.0, 100.0)
        assert log_observation(y, x, z, params_1d) == pytest.approx(want, abs=1e-12)


class TestLogJoint:
    def test_invalid_state_is_minus_inf(self, params_1d):
        y = ObservationSet([[[0.0]], [[1.0]]])
        z = z_from([[1], [0]])  # single-observation object
        x = TrajectorySet({1: ObjectTrack([1], [[0.0]])})
        state = ChainState.build(z, x, y, params_1d)
        assert log_joint(state, y, params_1d) == -math.inf

    def test_decomposes_into_parts(self, params_1d):
        y, z, x = two_object_instance()
        state = ChainState.build(z, x, y, params_1d)
        total = log_joint(state, y, params_1d)
        parts = (
            log_counts_prior(state.counts, params_1d)
            + log_dynamics(x, params_1d)
            + log_observation(y, x, z, params_1d)
        )
        assert np.isfinite(total)
        assert total == pytest.approx(parts, abs=1e-12)
        assert state.log_joint == pytest.approx(total, abs=1e-12)

    def test_correct_annotation_adds_log_reliability(self, params_1d):
        y, z, x = two_object_instance()
        base = ChainState.build(z, x, y, params_1d)
        ann = Annotation(Design(1, 0, 2, 0), answer=1, reliability=0.99)
        with_ann = ChainState.build(z, x, y, params_1d, annotations=(ann,))
        assert with_ann.log_joint == pytest.approx(
            base.log_joint + math.log(0.99), abs=1e-12
        )

    def test_label_permutation_symmetry(self, params_1d):
        y, z, x = two_object_instance()
        state = ChainState.build(z, x, y, params_1d)
        z_p = permute_labels(z, {1: 2, 2: 1})
        x_p = TrajectorySet({2: x.track(1), 1: x.track(2)})
        state_p = ChainState.build(z_p, x_p, y, params_1d)
        assert state_p.log_joint == pytest.approx(state.log_joint, abs=1e-12)

    def test_all_clutter_start_is_valid(self, params_1d):
        y, _, _ = two_object_instance()
        state = all_clutter_state(y, params_1d)
        assert np.isfinite(state.log_joint)
        assert check_validity(state.z, state.counts) is None


class TestAnnotationLikelihood:
    def test_same_object_answer(self):
        z = z_from([[2, 0], [2]])
        # t=1 n=0 and t=2 n=0 are both object 2
        ann = Annotation(Design(1, 0, 2, 0), answer=1)
        assert annotation_log_likelihood(ann, z) == pytest.approx(math.log(0.99))

    def test_shared_clutter_is_not_same(self):
        z = z_from([[0, 1], [0, 1]])
        ann = Annotation(Design(1, 0, 2, 0), answer=1)
        assert annotation_log_likelihood(ann, z) == pytest.approx(math.log(0.01))

    def test_different_objects_answer_zero(self):
        z = z_from([[1, 2], [1, 2]])
        ann = Annotation(Design(1, 0, 1, 1), answer=0)
        assert annotation_log_likelihood(ann, z) == pytest.approx(math.log(0.99))


@st.composite
def valid_hypotheses(draw):
    T = draw(st.integers(2, 5))
    n_objects = draw(st.integers(0, 2))
    capacity = [draw(st.integers(0, 2)) for _ in range(T)]
    labels = [[0] * c for c in capacity]
    for k in range(1, n_objects + 1):
        free = [t for t in range(T) if sum(1 for v in labels[t] if v == 0) > 0]
        if len(free) < 2:
            continue
        times = sorted(draw(st.permutations(free))[: draw(st.integers(2, len(free)))])
        for t in times:
            slot = next(i for i, v in enumerate(labels[t]) if v == 0)
            labels[t][slot] = k
    # keep labels contiguous if an object was skipped
    used = sorted({v for row in labels for v in row if v > 0})
    remap = {k: i + 1 for i, k in enumerate(used)}
    labels = [[remap.get(v, 0) for v in row] for row in labels]
    return labels


class TestProperties:
    @given(valid_hypotheses())
    @settings(max_examples=60, deadline=None)
    def test_derive_check_round_trip(self, labels):
        z = z_from(labels)
        assert check_validity(z, derive_counts(z)) is None

    def test_canonical_relabel_orders_by_arrival(self):
        z = z_from([[2], [2, 1], [1]])
        c = canonical_relabel(z)
        assert c.claims_of(1) == [(1, 0), (2, 0)]
        assert c.claims_of(2) == [(2, 1), (3, 0)]
