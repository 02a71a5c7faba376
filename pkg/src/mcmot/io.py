"""File formats: observation/groundtruth CSV, sample JSONL, modes, checkpoints.

Schemas (also documented in docs/formats.md):

* observations CSV: header ``t,n,y1,...,yD``; t is a 1-based integer time,
  n the 0-based observation index within t.
* groundtruth CSV: header ``t,object_id,y1,...,yD``.
* samples: one JSON object per line with fields
  ``{iter, chain, logp, move, accepted, z, objects, counts}`` where z is the
  per-time label lists, objects a list of ``{id, times, states}`` and counts
  ``{a, f, d, l}`` per-time lists.
* checkpoint: one JSON object carrying the chain state, annotations and the
  generator state, enough to resume a run bit-for-bit.

All floats are serialized at full double precision (repr round-trip).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import (
    Annotation,
    AssociationHypothesis,
    ChainState,
    Design,
    EventCounts,
    ObjectTrack,
    ObservationSet,
    TrajectorySet,
)
from .sampler import SampleRecord
from .synthetic import GroundTruth


class FormatError(ValueError):
    """A malformed input file; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# observations


def save_observations(path, y: ObservationSet) -> None:
    path = Path(path)
    dim = y.dim
    header = "t,n," + ",".join(f"y{i+1}" for i in range(dim))
    lines = [header, f"# horizon: {y.horizon}"]
    for t in range(1, y.horizon + 1):
        block = y.at(t)
        for n in range(block.shape[0]):
            vals = ",".join(repr(float(v)) for v in block[n])
            lines.append(f"{t},{n},{vals}")
    path.write_text("\n".join(lines) + "\n")


def load_observations(path) -> ObservationSet:
    path = Path(path)
    rows: dict[int, dict[int, np.ndarray]] = {}
    dim = None
    with path.open() as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) < 3 or cols[0] != "t" or cols[1] != "n":
            raise FormatError(f"expected header t,n,y1,...: got {header!r}", line=1)
        dim = len(cols) - 2
        horizon_hint = 0
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            if raw.startswith("#"):
                if "horizon:" in raw:
                    horizon_hint = int(raw.split("horizon:")[1].strip())
                continue
            parts = raw.split(",")
            if len(parts) != dim + 2:
                raise FormatError(f"expected {dim + 2} fields, got {len(parts)}", line=lineno)
            try:
                t = int(parts[0])
                n = int(parts[1])
                vec = np.array([float(v) for v in parts[2:]])
            except ValueError as err:
                raise FormatError(str(err), line=lineno) from err
            if t < 1:
                raise FormatError(f"time {t} is not 1-based", line=lineno)
            if n in rows.setdefault(t, {}):
                raise FormatError(f"duplicate observation ({t},{n})", line=lineno)
            rows[t][n] = vec
    horizon = max(max(rows, default=0), horizon_hint)
    per_time = []
    for t in range(1, horizon + 1):
        block = rows.get(t, {})
        if sorted(block) != list(range(len(block))):
            raise FormatError(f"observation indices at t={t} are not 0..N-1")
        per_time.append(np.array([block[n] for n in range(len(block))]).reshape(len(block), dim))
    return ObservationSet(per_time, dim=dim)


# ---------------------------------------------------------------------------
# groundtruth


def save_groundtruth(path, gt: GroundTruth) -> None:
    path = Path(path)
    dim = len(np.atleast_1d(gt.entries[0][0][1])) if gt.entries and gt.entries[0] else 1
    header = "t,object_id," + ",".join(f"y{i+1}" for i in range(dim))
    lines = [header]
    for t, frame in enumerate(gt.entries, start=1):
        for oid, pos in frame:
            vals = ",".join(repr(float(v)) for v in np.atleast_1d(pos))
            lines.append(f"{t},{oid},{vals}")
    path.write_text("\n".join(lines) + "\n")


def load_groundtruth(path) -> GroundTruth:
    path = Path(path)
    frames: dict[int, list] = {}
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 3 or header[0] != "t" or header[1] != "object_id":
            raise FormatError("expected header t,object_id,y1,...", line=1)
        dim = len(header) - 2
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != dim + 2:
                raise FormatError(f"expected {dim + 2} fields", line=lineno)
            try:
                t = int(parts[0])
                oid = int(parts[1])
                vec = np.array([float(v) for v in parts[2:]])
            except ValueError as err:
                raise FormatError(str(err), line=lineno) from err
            frames.setdefault(t, []).append((oid, vec))
    horizon = max(frames, default=0)
    return GroundTruth([frames.get(t, []) for t in range(1, horizon + 1)])


# ---------------------------------------------------------------------------
# sample records


def record_to_obj(rec: SampleRecord) -> dict:
    return {
        "iter": rec.iteration,
        "chain": rec.chain,
        "logp": rec.log_joint,
        "move": rec.move,
        "accepted": bool(rec.accepted),
        "z": [arr.tolist() for arr in rec.z.labels],
        "objects": [
            {
                "id": int(k),
                "times": rec.objects[k].times.tolist(),
                "states": rec.objects[k].states.tolist(),
            }
            for k in sorted(rec.objects)
        ],
        "counts": {
            "a": rec.counts.arrivals.tolist(),
            "f": rec.counts.clutter.tolist(),
            "d": rec.counts.detections.tolist(),
            "l": rec.counts.departures.tolist(),
        },
    }


def record_from_obj(obj: dict) -> SampleRecord:
    z = AssociationHypothesis(obj["z"])
    counts = EventCounts(
        obj["counts"]["a"], obj["counts"]["f"], obj["counts"]["d"], obj["counts"]["l"]
    )
    objects = {
        int(o["id"]): ObjectTrack(o["times"], o["states"]) for o in obj["objects"]
    }
    return SampleRecord(
        iteration=int(obj["iter"]),
        chain=int(obj["chain"]),
        log_joint=float(obj["logp"]),
        move=str(obj["move"]),
        accepted=bool(obj["accepted"]),
        z=z,
        counts=counts,
        objects=objects,
    )


def save_samples(path, records) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_obj(rec)) + "\n")


def load_samples(path) -> list[SampleRecord]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                out.append(record_from_obj(json.loads(raw)))
            except (KeyError, ValueError) as err:
                raise FormatError(f"bad sample record: {err}", line=lineno) from err
    return out


# ---------------------------------------------------------------------------
# reference modes


def save_modes(path, modes: list[AssociationHypothesis]) -> None:
    Path(path).write_text(json.dumps(
        [[row.tolist() for row in m.labels] for m in modes]
    ))


def load_modes(path) -> list[AssociationHypothesis]:
    data = json.loads(Path(path).read_text())
    return [AssociationHypothesis(rows) for rows in data]


# ---------------------------------------------------------------------------
# model parameters


def params_to_obj(params) -> dict:
    return {
        "F": params.F.tolist(), "Q": params.Q.tolist(),
        "H": params.H.tolist(), "R": params.R.tolist(),
        "mu0": params.mu0.tolist(), "Sigma0": params.Sigma0.tolist(),
        "mu_fp": params.mu_fp.tolist(), "Sigma_fp": params.Sigma_fp.tolist(),
        "lambda_b": params.lambda_b, "lambda_f": params.lambda_f,
        "p_d": params.p_d, "p_lam": params.p_lam,
        "detection_trials": params.detection_trials,
    }


def params_from_obj(obj: dict):
    from .model import ModelParams

    return ModelParams(**obj)


def save_params(path, params) -> None:
    Path(path).write_text(json.dumps(params_to_obj(params), indent=2))


def load_params(path):
    return params_from_obj(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# annotations


def annotation_to_obj(a: Annotation) -> dict:
    return {
        "design": list(a.design.as_tuple()),
        "answer": a.answer,
        "reliability": a.reliability,
        "provenance": a.provenance,
        "round": a.round_index,
    }


def annotation_from_obj(obj: dict) -> Annotation:
    t1, n1, t2, n2 = obj["design"]
    return Annotation(
        design=Design(t1, n1, t2, n2),
        answer=int(obj["answer"]),
        reliability=float(obj.get("reliability", 0.99)),
        provenance=str(obj.get("provenance", "simulated-oracle")),
        round_index=int(obj.get("round", 0)),
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, state: ChainState, rng: np.random.Generator,
                    iteration: int, chain: int = 0) -> None:
    obj = {
        "iteration": iteration,
        "chain": chain,
        "z": [arr.tolist() for arr in state.z.labels],
        "objects": [
            {"id": int(k), "times": tr.times.tolist(), "states": tr.states.tolist()}
            for k, tr in sorted(state.x.tracks.items())
        ],
        "annotations": [annotation_to_obj(a) for a in state.annotations],
        "rng_state": rng.bit_generator.state,
    }
    Path(path).write_text(json.dumps(obj))


def load_checkpoint(path, y: ObservationSet, params):
    """Returns (state, rng, iteration, chain) rebuilt from the file."""
    obj = json.loads(Path(path).read_text())
    z = AssociationHypothesis(obj["z"])
    tracks = {int(o["id"]): ObjectTrack(o["times"], o["states"]) for o in obj["objects"]}
    annotations = tuple(annotation_from_obj(a) for a in obj["annotations"])
    state = ChainState.build(z, TrajectorySet(tracks), y, params, annotations)
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = obj["rng_state"]
    return state, rng, int(obj["iteration"]), int(obj["chain"])
