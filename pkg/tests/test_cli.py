import json
from pathlib import Path

import pytest

from mcmot.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("k33")
    assert main(["generate", "k33", "--seed", "15", "--out-dir", str(out)]) == 0
    return out


class TestGenerate:
    def test_writes_all_artifacts(self, dataset):
        for name in ("observations.csv", "groundtruth.csv", "modes.json",
                     "params.json", "manifest.json"):
            assert (dataset / name).exists()

    def test_teaser(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "generate", "teaser", "--out-dir", str(tmp_path))
        assert code == 0
        assert json.loads(out)["observations"] == 30


class TestSample:
    def test_runs_and_is_bit_reproducible(self, dataset, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code, _, _ = run_cli(
                capsys, "sample", "--obs", str(dataset / "observations.csv"),
                "--params", str(dataset / "params.json"),
                "--chains", "2", "--iters", "150", "--seed", "7",
                "--out", str(out),
            )
            assert code == 0
        for c in range(2):
            fa = (a / f"samples-chain{c}.jsonl").read_bytes()
            fb = (b / f"samples-chain{c}.jsonl").read_bytes()
            assert fa == fb

    def test_manifest_written(self, dataset, tmp_path, capsys):
        out = tmp_path / "runs"
        run_cli(capsys, "sample", "--obs", str(dataset / "observations.csv"),
                "--params", str(dataset / "params.json"),
                "--chains", "1", "--iters", "60", "--seed", "1", "--out", str(out))
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["sampler"]["iterations"] == 60
        assert "sha256" in manifest["observations"]

    def test_missing_params_is_machine_readable_error(self, dataset, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "sample", "--obs", str(dataset / "observations.csv"),
            "--out", str(tmp_path / "x"),
        )
        assert code == 2
        assert "error" in json.loads(err.strip())

    def test_checkpoint_resume_matches_straight_run(self, dataset, tmp_path, capsys):
        params = json.loads((dataset / "params.json").read_text())
        config = {"model": params,
                  "sampler": {"burn_in_fraction": 0.0, "recompute_every": 50,
                              "replicates": 1, "seed": 2}}
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        base = ["sample", "--obs", str(dataset / "observations.csv"),
                "--config", str(cfg_path), "--chains", "1", "--seed", "2"]

        straight = tmp_path / "straight"
        assert main(base + ["--iters", "100", "--out", str(straight)]) == 0
        # interrupted run: 50 iterations, checkpoint, then resume to 100
        out = tmp_path / "ck"
        assert main(base + ["--iters", "50", "--checkpoint-every", "50",
                            "--out", str(out)]) == 0
        ck = json.loads((out / "checkpoint-chain0.json").read_text())
        assert ck["iteration"] == 50
        assert main(base + ["--iters", "100", "--resume", "--out", str(out)]) == 0
        capsys.readouterr()
        first = (out / "samples-chain0.jsonl").read_text()
        second = (out / "samples-chain0.part50.jsonl").read_text()
        combined = first + second
        assert combined == (straight / "samples-chain0.jsonl").read_text()


@pytest.fixture(scope="module")
def sampled(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    assert main([
        "sample", "--obs", str(dataset / "observations.csv"),
        "--params", str(dataset / "params.json"),
        "--chains", "2", "--iters", "400", "--seed", "3", "--out", str(out),
    ]) == 0
    return out


class TestMetrics:
    def test_aggregate_reported(self, dataset, sampled, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "metrics", "--samples", str(sampled),
            "--gt", str(dataset / "groundtruth.csv"),
            "--obs", str(dataset / "observations.csv"),
            "--radius", "0.15",
            "--out", str(tmp_path / "mot.csv"),
        )
        assert code == 0
        agg = json.loads(out)
        assert 0.0 <= agg["mean_mota"] <= 1.0
        assert (tmp_path / "mot.csv").exists()

    def test_chunked_evaluation(self, dataset, sampled, capsys):
        code, out, _ = run_cli(
            capsys, "metrics", "--samples", str(sampled),
            "--gt", str(dataset / "groundtruth.csv"),
            "--radius", "0.15", "--chunk", "20",
        )
        assert code == 0
        agg = json.loads(out)
        assert 0.0 <= agg["mean_mota"] <= 1.0
        # a chunk as long as the sequence reproduces the unchunked numbers
        code, out_one, _ = run_cli(
            capsys, "metrics", "--samples", str(sampled),
            "--gt", str(dataset / "groundtruth.csv"),
            "--radius", "0.15", "--chunk", "99",
        )
        code, out_full, _ = run_cli(
            capsys, "metrics", "--samples", str(sampled),
            "--gt", str(dataset / "groundtruth.csv"),
            "--radius", "0.15",
        )
        assert json.loads(out_one)["mean_mota"] == json.loads(out_full)["mean_mota"]


class TestModes:
    def test_histogram_and_curve(self, dataset, sampled, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "modes", "--samples", str(sampled),
            "--modes", str(dataset / "modes.json"),
            "--obs", str(dataset / "observations.csv"),
            "--out", str(tmp_path / "hist.json"),
            "--tv-curve", str(tmp_path / "tv.csv"),
        )
        assert code == 0
        res = json.loads(out)
        assert 0.0 <= res["pooled_tv"] <= 1.0
        hist = json.loads((tmp_path / "hist.json").read_text())
        assert len(hist["pooled_counts"]) == 24
        curve = (tmp_path / "tv.csv").read_text().strip().splitlines()
        assert curve[0] == "samples,tv"
        assert len(curve) > 2

    def test_non_uniform_target_rejected(self, dataset, sampled, capsys):
        code, _, err = run_cli(
            capsys, "modes", "--samples", str(sampled),
            "--modes", str(dataset / "modes.json"),
            "--obs", str(dataset / "observations.csv"),
            "--target", "zipf",
        )
        assert code == 2
        assert "error" in json.loads(err.strip())


class TestBed:
    def test_round_csv(self, tmp_path, capsys):
        data = tmp_path / "teaser"
        run_cli(capsys, "generate", "teaser", "--seed", "0", "--out-dir", str(data))
        code, out, _ = run_cli(
            capsys, "bed", "--obs", str(data / "observations.csv"),
            "--gt", str(data / "groundtruth.csv"),
            "--params", str(data / "params.json"),
            "--rounds", "2", "--replicates", "1", "--planner", "mi",
            "--chains", "2", "--iters", "240", "--budget", "30",
            "--out", str(tmp_path / "bed.csv"),
        )
        assert code == 0
        lines = (tmp_path / "bed.csv").read_text().strip().splitlines()
        assert lines[0] == "replicate,round,planner,mi,uncertainty,distance_to_groundtruth"
        assert len(lines) == 4  # header + rounds 0..2
