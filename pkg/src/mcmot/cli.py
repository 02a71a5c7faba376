"""Command-line surface: generate, sample, metrics, modes, bed, serve."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, io
from .analysis import (
    TrajectoryCostConfig,
    clear_mot,
    groundtruth_trajectories,
    match_modes,
    record_frames,
    total_variation,
)
from .design import run_bed_loop, simulated_oracle
from .sampler import SamplerConfig, max_workers, run_replicates
from .synthetic import (
    generate_k33,
    generate_teaser,
    groundtruth_hypothesis,
    k33_params,
    teaser_params,
)


class CliError(ValueError):
    pass


def _sampler_config_from_args(args, overrides=None) -> SamplerConfig:
    cfg = {}
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        cfg.update(raw.get("sampler", {}))
    if getattr(args, "iters", None):
        cfg["iterations"] = args.iters
    if getattr(args, "chains", None):
        cfg["replicates"] = args.chains
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if overrides:
        cfg.update(overrides)
    return SamplerConfig(**cfg)


def _model_params_from_args(args):
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        if "model" in raw:
            return io.params_from_obj(raw["model"])
    if getattr(args, "params", None):
        return io.load_params(args.params)
    raise CliError("model parameters required: pass --params or --config with a model section")


def cmd_generate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "k33":
        y, gt, modes = generate_k33(seed=args.seed, noise_sd=args.noise)
        params = k33_params(noise_sd=args.noise)
        io.save_modes(out / "modes.json", modes)
    elif args.kind == "teaser":
        y, gt = generate_teaser(seed=args.seed, noise_sd=args.noise)
        params = teaser_params(noise_sd=args.noise)
    else:
        raise CliError(f"unknown dataset kind {args.kind!r}")
    io.save_observations(out / "observations.csv", y)
    io.save_groundtruth(out / "groundtruth.csv", gt)
    io.save_params(out / "params.json", params)
    manifest = {
        "kind": args.kind, "seed": args.seed, "noise": args.noise,
        "version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(json.dumps({"written": str(out), "observations": y.total}))
    return 0


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_sample(args) -> int:
    y = io.load_observations(args.obs)
    params = _model_params_from_args(args)
    config = _sampler_config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if args.checkpoint_every or args.resume:
        from .sampler import chain_rng, run_chain

        chains = []
        for c in range(config.replicates):
            ck = out / f"checkpoint-chain{c}.json"
            if args.resume and ck.exists():
                state, rng, it, _ = io.load_checkpoint(ck, y, params)
            else:
                state, rng, it = None, chain_rng(config.seed, c), 0
            records = run_chain(
                y, params, config, chain=c, rng=rng,
                start_state=state, start_iteration=it,
                checkpoint_every=args.checkpoint_every,
                checkpoint_sink=lambda st, r, i, p=ck, ch=c: io.save_checkpoint(p, st, r, i, ch),
            )
            chains.append(records)
            # a resumed invocation appends a part file; the base file keeps
            # the records written before the interruption
            name = f"samples-chain{c}.jsonl" if it == 0 else f"samples-chain{c}.part{it}.jsonl"
            io.save_samples(out / name, records)
            paths.append(str(out / name))
    else:
        chains = run_replicates(y, params, config, workers=args.workers or max_workers())
        for c, records in enumerate(chains):
            path = out / f"samples-chain{c}.jsonl"
            io.save_samples(path, records)
            paths.append(str(path))
    manifest = {
        "command": "sample",
        "version": __version__,
        "observations": {"path": str(args.obs), "sha256": _sha256(args.obs)},
        "model": io.params_to_obj(params),
        "sampler": {
            "iterations": config.iterations,
            "burn_in_fraction": config.burn_in_fraction,
            "replicates": config.replicates,
            "move_weights": config.move_weights,
            "switch_max_objects": config.switch_max_objects,
            "skip_probability": config.skip_probability,
            "switch_pin_first_two": config.switch_pin_first_two,
            "seed": config.seed,
            "thin_count": config.thin_count,
            "ffbs_sweep_every": config.ffbs_sweep_every,
            "recompute_every": config.recompute_every,
        },
        "outputs": paths,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(json.dumps({"chains": len(chains), "samples_per_chain": len(chains[0])}))
    return 0


def _load_sample_files(pattern_or_paths) -> list:
    paths = []
    for entry in pattern_or_paths:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("samples-chain*.jsonl")))
        else:
            paths.append(p)
    if not paths:
        raise CliError("no sample files found")
    return [io.load_samples(p) for p in paths]


def cmd_metrics(args) -> int:
    chains = _load_sample_files(args.samples)
    gt = io.load_groundtruth(args.gt)
    gt_frames = [gt.frame(t) for t in range(1, gt.horizon + 1)]
    y = io.load_observations(args.obs) if args.obs else None
    rows = []
    for c, records in enumerate(chains):
        for rec in records:
            if y is not None:
                frames = record_frames(rec.z, y)
            else:
                frames = [[] for _ in range(gt.horizon)]
                for k, track in rec.objects.items():
                    for t, state in zip(track.times, track.states):
                        frames[int(t) - 1].append((int(k), np.asarray(state)))
            if args.chunk:
                # evaluate independently per chunk: identities don't carry over
                parts = [
                    clear_mot(frames[i:i + args.chunk], gt_frames[i:i + args.chunk],
                              radius=args.radius)
                    for i in range(0, len(frames), args.chunk)
                ]
                total_gt = sum(p.gt_detections for p in parts)
                rep_misses = sum(p.misses for p in parts)
                rep_fps = sum(p.false_positives for p in parts)
                rep_sw = sum(p.switches for p in parts)
                rep_frag = sum(p.fragmentations for p in parts)
                mota = 1.0 - (rep_misses + rep_fps + rep_sw) / max(total_gt, 1)
                rows.append({
                    "chain": c, "iter": rec.iteration, "mota": mota,
                    "switches": rep_sw, "fragmentations": rep_frag,
                    "misses": rep_misses, "false_positives": rep_fps,
                })
                continue
            rep = clear_mot(frames, gt_frames, radius=args.radius)
            rows.append({
                "chain": c, "iter": rec.iteration, "mota": rep.mota,
                "switches": rep.switches, "fragmentations": rep.fragmentations,
                "misses": rep.misses, "false_positives": rep.false_positives,
            })
    agg = {
        "mean_mota": float(np.mean([r["mota"] for r in rows])),
        "mean_switches": float(np.mean([r["switches"] for r in rows])),
        "mean_misses": float(np.mean([r["misses"] for r in rows])),
        "mean_false_positives": float(np.mean([r["false_positives"] for r in rows])),
        "samples": len(rows),
    }
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    print(json.dumps(agg))
    return 0


def cmd_modes(args) -> int:
    chains = _load_sample_files(args.samples)
    modes = io.load_modes(args.modes)
    y = io.load_observations(args.obs)
    if args.target != "uniform":
        raise CliError("only the uniform target distribution is supported")
    target = np.full(len(modes), 1.0 / len(modes))
    cfg = TrajectoryCostConfig.from_observations(y)
    per_chain = [match_modes(records, modes, y, cfg) for records in chains]
    pooled = np.zeros(len(modes), dtype=int)
    assignments = []
    for hist in per_chain:
        pooled += hist.counts
        assignments.append(hist.assignments)
    out = {
        "per_chain_counts": [h.counts.tolist() for h in per_chain],
        "pooled_counts": pooled.tolist(),
        "pooled_tv": total_variation(pooled, target),
        "per_chain_tv": [total_variation(h.counts, target) for h in per_chain],
        "modes_covered_per_chain": [int((h.counts > 0).sum()) for h in per_chain],
    }
    if args.tv_curve:
        flat = [i for chain in assignments for i in chain]
        with open(args.tv_curve, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["samples", "tv"])
            counts = np.zeros(len(modes), dtype=int)
            for n, idx in enumerate(flat, start=1):
                counts[idx] += 1
                if n % args.tv_stride == 0 or n == len(flat):
                    writer.writerow([n, total_variation(counts, target)])
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2))
    print(json.dumps({
        "pooled_tv": out["pooled_tv"],
        "modes_covered_per_chain": out["modes_covered_per_chain"],
    }))
    return 0


def cmd_bed(args) -> int:
    y = io.load_observations(args.obs)
    params = _model_params_from_args(args)
    gt = io.load_groundtruth(args.gt)
    gt_trajs = groundtruth_trajectories(gt)
    gt_z = groundtruth_hypothesis(y, gt)
    base = _sampler_config_from_args(args)
    rows = []
    for rep in range(args.replicates):
        config = replace(base, seed=base.seed + 1000 * rep)
        oracle_rng = np.random.default_rng(
            np.random.SeedSequence((base.seed, rep, 0x0AC))
        )

        def oracle(design, round_index):
            return simulated_oracle(gt_z, design, args.reliability, oracle_rng,
                                    round_index)

        results = run_bed_loop(
            y, params, oracle, rounds=args.rounds, planner=args.planner,
            config=config, gt_trajectories=gt_trajs, budget=args.budget,
            reliability=args.reliability, workers=args.workers or max_workers(),
        )
        for r in results:
            rows.append({
                "replicate": rep, "round": r.round_index, "planner": r.planner,
                "mi": r.mi, "uncertainty": r.uncertainty,
                "distance_to_groundtruth": r.distance_to_gt,
            })
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(json.dumps({"rows": len(rows), "out": args.out}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import AnnotationSession, SessionSettings, create_app

    y = io.load_observations(args.obs)
    params = _model_params_from_args(args)
    gt_trajs = None
    if args.gt:
        gt_trajs = groundtruth_trajectories(io.load_groundtruth(args.gt))
    settings = SessionSettings(
        planner=args.planner,
        reliability=args.reliability,
        budget=args.budget,
        sampler=_sampler_config_from_args(args),
        workers=args.workers or max_workers(),
    )
    session = AnnotationSession(y, params, settings, gt_trajectories=gt_trajs)
    session.submit_round(None)
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcmot")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("kind", choices=["k33", "teaser"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="run replicate chains")
    p.add_argument("--obs", required=True)
    p.add_argument("--config", help="JSON with optional model/sampler sections")
    p.add_argument("--params", help="model parameter JSON (as written by generate)")
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--checkpoint-every", type=int,
                   help="write per-chain checkpoints every N iterations")
    p.add_argument("--resume", action="store_true",
                   help="continue from checkpoints in --out if present")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("metrics", help="CLEAR MOT metrics against groundtruth")
    p.add_argument("--samples", nargs="+", required=True,
                   help="sample files or directories of samples-chain*.jsonl")
    p.add_argument("--gt", required=True)
    p.add_argument("--obs", help="use claimed observation positions instead of states")
    p.add_argument("--radius", type=float, default=0.15,
                   help="match radius (default 3x the 0.05 default noise)")
    p.add_argument("--chunk", type=int,
                   help="evaluate in independent chunks of this many frames")
    p.add_argument("--out", help="per-sample CSV")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("modes", help="match samples to reference modes")
    p.add_argument("--samples", nargs="+", required=True)
    p.add_argument("--modes", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--target", default="uniform")
    p.add_argument("--out", help="histogram JSON")
    p.add_argument("--tv-curve", help="CSV of (samples, tv) as samples accumulate")
    p.add_argument("--tv-stride", type=int, default=25)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("bed", help="annotation-scheduling experiment")
    p.add_argument("--obs", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--config")
    p.add_argument("--params")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--planner", choices=["mi", "random"], default="mi")
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--reliability", type=float, default=0.99)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bed)

    p = sub.add_parser("serve", help="start the annotation HTTP service")
    p.add_argument("--obs", required=True)
    p.add_argument("--gt")
    p.add_argument("--config")
    p.add_argument("--params")
    p.add_argument("--planner", choices=["mi", "random"], default="mi")
    p.add_argument("--reliability", type=float, default=0.99)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, io.FormatError, ValueError, FileNotFoundError) as err:
        print(json.dumps({"error": str(err)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
