import numpy as np
import pytest

from mcmot.model import ChainState, ObservationSet, TrajectorySet, check_validity
from mcmot.sampler import (
    SamplerConfig,
    max_workers,
    pooled_thinned,
    run_chain,
    run_replicates,
    step,
    thin,
)
from mcmot.synthetic import generate_k33, k33_params


@pytest.fixture(scope="module")
def k33():
    y, gt, modes = generate_k33(seed=15)
    return y, k33_params()


class TestConfig:
    def test_defaults_match_documented_protocol(self):
        cfg = SamplerConfig()
        assert cfg.iterations == 2000
        assert cfg.burn_in_fraction == 0.5
        assert cfg.replicates == 5
        assert cfg.thin_count == 200
        assert cfg.switch_max_objects == 7
        assert cfg.skip_probability == 0.01

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            SamplerConfig(move_weights={"switch": -1.0})
        with pytest.raises(ValueError):
            SamplerConfig(move_weights={"switch": 0.0})
        with pytest.raises(ValueError):
            SamplerConfig(move_weights={"teleport": 1.0})

    def test_rejects_bad_iterations(self):
        with pytest.raises(ValueError):
            SamplerConfig(iterations=0)


class TestStep:
    def test_ffbs_only_keeps_associations_and_accepts(self, params_1d, rng):
        y = ObservationSet([[[0.0]], [[0.1]], [[0.2]]])
        from mcmot.model import all_clutter_state

        state = all_clutter_state(y, params_1d)
        cfg = SamplerConfig(move_weights={"ffbs": 1.0})
        for i in range(20):
            state, rec = step(state, y, params_1d, cfg, rng, iteration=i)
            assert rec.accepted
            assert rec.move == "ffbs"
            assert rec.z == state.z


class TestDeterminism:
    def test_identical_seed_bit_identical_records(self, k33):
        y, params = k33
        cfg = SamplerConfig(iterations=300, burn_in_fraction=0.5, seed=21)
        a = run_chain(y, params, cfg)
        b = run_chain(y, params, cfg)
        assert len(a) == len(b)
        for ra, rb in zip(a, b):
            assert ra.log_joint == rb.log_joint
            assert ra.move == rb.move
            assert ra.accepted == rb.accepted
            assert ra.z == rb.z

    def test_chains_differ_across_indices(self, k33):
        y, params = k33
        cfg = SamplerConfig(iterations=200, burn_in_fraction=0.5, seed=21, replicates=2)
        chains = run_replicates(y, params, cfg)
        assert len(chains) == 2
        assert any(
            ra.log_joint != rb.log_joint for ra, rb in zip(chains[0], chains[1])
        )


class TestEmittedRecords:
    def test_records_valid_and_cache_consistent(self, k33):
        y, params = k33
        cfg = SamplerConfig(iterations=300, burn_in_fraction=0.5, seed=2)
        records = run_chain(y, params, cfg)
        assert len(records) == 150
        for rec in records[::25]:
            assert check_validity(rec.z, rec.counts) is None
            rebuilt = ChainState.build(rec.z, TrajectorySet(rec.objects), y, params)
            assert rec.log_joint == pytest.approx(rebuilt.log_joint, abs=1e-8)


class TestThin:
    def test_evenly_spaced_subsample(self):
        records = list(range(1000))
        out = thin(records, 200)
        assert len(out) == 200
        assert out[0] == 0 and out[-1] == 999
        gaps = np.diff(out)
        assert gaps.min() >= 4 and gaps.max() <= 6

    def test_short_stream_kept_whole(self):
        assert thin([1, 2, 3], 200) == [1, 2, 3]

    def test_pooled(self):
        chains = [list(range(10)), list(range(100, 110))]
        out = pooled_thinned(chains, 5)
        assert len(out) == 10


class TestWorkers:
    def test_env_cap(self, monkeypatch):
        monkeypatch.setenv("JPT_THREADS", "3")
        assert max_workers() == 3
        monkeypatch.delenv("JPT_THREADS")
        assert max_workers() == 1
