"""HTTP annotation service: query scheduling and posterior inspection.

One session per process. Reads are concurrent; all sampling runs on a single
worker thread, so answers are strictly serialized. POST /api/answer enqueues a
resampling job and returns immediately with a job id; the next /api/query
reflects the reconditioned posterior once the job completes.
"""

from __future__ import annotations

import math
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .analysis import (
    TrajectoryCostConfig,
    hypothesis_distance,
    hypothesis_trajectories,
    posterior_variance_summary,
)
from .design import MIEstimate, _SameProbCache, candidate_designs, estimate_mi
from .model import Annotation, ChainState, Design, ModelParams, ObservationSet
from .sampler import SamplerConfig, pooled_thinned, run_chain

MAX_POLYLINES = 50


@dataclass
class SessionSettings:
    planner: str = "mi"
    reliability: float = 0.99
    budget: int = 200
    workers: int = 1
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    # annotated rounds resume from the previous round's chain states, with a
    # shorter re-burn; this keeps the uncertainty trace from being dominated
    # by cold-start noise between rounds
    warm_start: bool = True
    warm_burn_fraction: float = 0.25


class AnnotationSession:
    """Owns the posterior state; one sampling job at a time."""

    def __init__(self, y: ObservationSet, params: ModelParams,
                 settings: SessionSettings | None = None, gt_trajectories=None):
        self.y = y
        self.params = params
        self.settings = settings or SessionSettings()
        self.gt_trajectories = gt_trajectories
        self.cost_config = TrajectoryCostConfig.from_observations(y)
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=1)
        self.jobs: dict[str, dict] = {}
        self.annotations: list[Annotation] = []
        self.samples = None
        self.summary = None
        self.scored: list = []
        self.answered: list[dict] = []
        self.uncertainty_trace: list[float] = []
        self.rounds_completed = -1
        self.active_job: str | None = None
        self._warm_states: list | None = None
        self._rng = np.random.default_rng(
            np.random.SeedSequence((self.settings.sampler.seed, 0x5EE))
        )

    # -- job machinery ----------------------------------------------------

    def submit_round(self, annotation: Annotation | None) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self.lock:
            if self.active_job is not None:
                raise RuntimeError("a sampling job is already running")
            self.jobs[job_id] = {"status": "queued", "progress": 0.0}
            self.active_job = job_id
        self.executor.submit(self._run_round, job_id, annotation)
        return job_id

    def _run_round(self, job_id: str, annotation: Annotation | None) -> None:
        try:
            with self.lock:
                self.jobs[job_id]["status"] = "running"
                if annotation is not None:
                    self.annotations.append(annotation)
                round_index = self.rounds_completed + 1
                annotations = tuple(self.annotations)
            cfg = replace(
                self.settings.sampler,
                seed=int(np.random.SeedSequence(
                    (self.settings.sampler.seed, round_index)
                ).generate_state(1)[0]),
            )
            warm = (self.settings.warm_start and self._warm_states is not None
                    and len(self._warm_states) == cfg.replicates)
            if warm:
                cfg = replace(cfg, burn_in_fraction=self.settings.warm_burn_fraction)
            chains = []
            finals = []
            for c in range(cfg.replicates):
                start = None
                if warm:
                    prev = self._warm_states[c]
                    start = ChainState.build(prev.z, prev.x, self.y, self.params,
                                             annotations)
                captured = {}
                records = run_chain(
                    self.y, self.params, cfg, chain=c, annotations=annotations,
                    start_state=start,
                    checkpoint_sink=lambda st, r, i, _c=captured: _c.__setitem__("state", st),
                )
                chains.append(records)
                finals.append(captured["state"])
            samples = pooled_thinned(chains, cfg.thin_count)
            summary = posterior_variance_summary(
                samples, self.y, self.params, config=self.cost_config
            )
            # score every candidate so skipped queries can fall back to the next best
            cands = candidate_designs(self.y, samples, budget=self.settings.budget)
            if self.settings.planner == "mi":
                mi_rng = np.random.default_rng(np.random.SeedSequence(
                    (self.settings.sampler.seed, round_index, 0x31)
                ))
                cache = _SameProbCache(samples, self.y, self.params)
                scored = sorted(
                    (estimate_mi(d, samples, self.y, self.params, mi_rng,
                                 self.settings.reliability, cache=cache)
                     for d in sorted(cands, key=lambda d: d.as_tuple())),
                    key=lambda e: (-e.value, e.design.as_tuple()),
                )
            else:
                order = self._rng.permutation(len(cands))
                scored = [MIEstimate(float("nan"), float("nan"), cands[i]) for i in order]
            with self.lock:
                self.samples = samples
                self.summary = summary
                self.scored = scored
                self._warm_states = finals
                self.rounds_completed = round_index
                self.uncertainty_trace.append(summary.mean_sd)
                if annotation is not None:
                    self.answered.append({
                        "design": list(annotation.design.as_tuple()),
                        "answer": annotation.answer,
                        "same_probability": self._same_fraction(annotation.design),
                    })
                for entry in self.answered:
                    entry["same_probability"] = self._same_fraction(
                        Design(*entry["design"])
                    )
                self.jobs[job_id] = {"status": "done", "progress": 1.0}
                self.active_job = None
        except Exception as err:  # surfaced through the job endpoint
            with self.lock:
                self.jobs[job_id] = {"status": "failed", "error": str(err)}
                self.active_job = None

    def _same_fraction(self, design: Design) -> float:
        if not self.samples:
            return float("nan")
        hits = 0
        for rec in self.samples:
            a = rec.z.label(design.t1, design.n1)
            b = rec.z.label(design.t2, design.n2)
            hits += int(a == b and a > 0)
        return hits / len(self.samples)

    # -- payloads ----------------------------------------------------------

    def session_payload(self) -> dict:
        with self.lock:
            return {
                "horizon": self.y.horizon,
                "dims": self.y.dim,
                "rounds_completed": max(self.rounds_completed, 0) if self.samples else 0,
                "uncertainty": self.uncertainty_trace[-1] if self.uncertainty_trace else None,
                "annotations": len(self.annotations),
                "sampling": self.active_job is not None,
            }

    def posterior_payload(self) -> dict | None:
        with self.lock:
            if self.samples is None:
                return None
            summary = self.summary
            bands = []
            for i in range(summary.mean.shape[0]):
                mask = summary.count[i] > 0
                bands.append({
                    "object": i + 1,
                    "times": summary.grid[mask].tolist(),
                    "mean": summary.mean[i][mask][:, 0].tolist(),
                    "sd": summary.sd[i][mask][:, 0].tolist(),
                })
            polylines = []
            for rec in self.samples[:: max(1, len(self.samples) // MAX_POLYLINES)]:
                for k, track in sorted(rec.objects.items()):
                    polylines.append({
                        "object": int(k),
                        "times": track.times.tolist(),
                        "values": track.states[:, 0].tolist(),
                    })
                if len(polylines) >= MAX_POLYLINES * max(1, len(rec.objects)):
                    break
            return {
                "bands": bands,
                "polylines": polylines,
                "answered": [dict(e) for e in self.answered],
                "uncertainty_trace": list(self.uncertainty_trace),
            }

    def query_payload(self, exclude: set[tuple]) -> dict | None:
        with self.lock:
            if self.samples is None or self.active_job is not None:
                return None
            for est in self.scored:
                tup = est.design.as_tuple()
                if tup in exclude:
                    continue
                if any(tuple(e["design"]) == tup for e in self.answered):
                    continue
                d = est.design
                return {
                    "design": list(tup),
                    "mi": None if math.isnan(est.value) else est.value,
                    "round": self.rounds_completed + 1,
                    "observations": [
                        {"t": d.t1, "n": d.n1, "coords": self.y.y(d.t1, d.n1).tolist()},
                        {"t": d.t2, "n": d.n2, "coords": self.y.y(d.t2, d.n2).tolist()},
                    ],
                    "context": [
                        self._context(d.t1), self._context(d.t2)
                    ],
                }
            return None

    def _context(self, t: int, width: int = 3) -> list:
        out = []
        for s in range(max(1, t - width), min(self.y.horizon, t + width) + 1):
            block = self.y.at(s)
            for n in range(block.shape[0]):
                out.append({"t": s, "n": n, "coords": block[n].tolist()})
        return out

    def groundtruth_distance(self) -> float | None:
        with self.lock:
            if self.samples is None or self.gt_trajectories is None:
                return None
            total = 0.0
            for rec in self.samples:
                total += hypothesis_distance(
                    hypothesis_trajectories(rec.z, self.y),
                    self.gt_trajectories, self.cost_config,
                ).distance
            return total / len(self.samples)


def create_app(session: AnnotationSession) -> FastAPI:
    app = FastAPI(title="tracking annotation service")
    app.state.session = session

    @app.get("/api/session")
    def get_session():
        return session.session_payload()

    @app.get("/api/posterior")
    def get_posterior():
        payload = session.posterior_payload()
        if payload is None:
            return JSONResponse({"error": "no samples yet"}, status_code=409)
        return payload

    @app.get("/api/query")
    def get_query(request: Request):
        exclude = set()
        for raw in request.query_params.getlist("exclude"):
            try:
                exclude.add(tuple(int(v) for v in raw.split(".")))
            except ValueError:
                return JSONResponse({"error": f"bad exclude {raw!r}"}, status_code=400)
        payload = session.query_payload(exclude)
        if payload is None:
            return JSONResponse(
                {"error": "no query available (sampling pending)"}, status_code=409
            )
        return payload

    @app.post("/api/answer")
    async def post_answer(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        design = body.get("design")
        answer = body.get("answer")
        if (not isinstance(design, (list, tuple)) or len(design) != 4
                or answer not in ("same", "different", 0, 1)):
            return JSONResponse({"error": "expected design [t1,n1,t2,n2] and answer"},
                                status_code=400)
        current = session.query_payload(set())
        if current is None or list(current["design"]) != [int(v) for v in design]:
            return JSONResponse({"error": "design is not the current query"},
                                status_code=409)
        ann = Annotation(
            design=Design(*[int(v) for v in design]),
            answer=1 if answer in ("same", 1) else 0,
            reliability=session.settings.reliability,
            provenance="human",
            round_index=session.rounds_completed + 1,
        )
        try:
            job_id = session.submit_round(ann)
        except RuntimeError as err:
            return JSONResponse({"error": str(err)}, status_code=409)
        return JSONResponse({"job": job_id}, status_code=202)

    @app.get("/api/job/{job_id}")
    def get_job(job_id: str):
        with session.lock:
            job = session.jobs.get(job_id)
        if job is None:
            return JSONResponse({"error": "unknown job"}, status_code=404)
        return job

    return app
