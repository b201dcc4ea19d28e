"""JSON-over-HTTP service for the explorer UI.

Every numeric result comes from the same evaluation core the command
line uses, serialized by the same renderer, so responses are
byte-identical to ``--format structured`` output for identical inputs.
Stateless except for the in-memory job table; restarting loses only
in-flight jobs.

Endpoints::

    GET    /api/presets          all built-in clusters, full bodies
    POST   /api/closed-form      analytic ceilings for one cluster
    POST   /api/simulate         time one pinned parallelization
    POST   /api/search           best config / smallest cluster
    POST   /api/sweep            synchronous sweep (<= 64 points)
    POST   /api/jobs             start an async sweep job
    GET    /api/jobs/{id}        job status + records so far
    DELETE /api/jobs/{id}        cancel a queued/running job

Errors use the envelope {code, message, violated_invariant?}: 400 for
validation problems (with the offending field path), 422 when no
feasible configuration exists (with the violated invariant's name),
500 otherwise.
"""

from __future__ import annotations

import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict

from .closedform import closed_form_report
from .comm import OverlapPolicy
from .hwspec import ClusterSpec, cluster_from_doc, cluster_to_doc, preset, preset_names
from .records import (
    closed_form_payload,
    envelope,
    point_payload,
    point_record,
    render_json,
    sweep_payload,
    sweep_record_payload,
)
from .scaling import LAW_PRESETS, make_shape, shape_from_compute, training_compute
from .search import (
    GPU_CAP,
    NoFeasibleConfig,
    best_config,
    find_endpoint,
    log_points,
    min_cluster,
    sweep,
)
from .simulate import (
    InvariantViolation,
    ParallelismConfig,
    evaluate_step,
    sustained_mfu,
    validate_config,
)
from .units import THREE_MONTHS_S

SYNC_SWEEP_CAP = 64
JOB_TABLE_CAP = 64


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 field_path: str | None = None, invariant: str | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path
        self.invariant = invariant


def _error_body(code: str, message: str, field_path: str | None = None,
                invariant: str | None = None) -> dict:
    body = {"code": code, "message": message}
    if field_path is not None:
        body["field"] = field_path
    if invariant is not None:
        body["violated_invariant"] = invariant
    return body


# --- request models (strict: unknown fields are validation errors) ---------


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ShapeBody(StrictModel):
    d_model: int
    d_ff: int
    n_layers: int
    batch: int
    experts: int = 1


class ConfigBody(StrictModel):
    dp: int = 1
    tp_ff: int = 1
    tp_model: int = 1
    pp: int = 1
    ep: int = 1
    interleave: int = 1
    microbatches: int = 1
    schedule: str = "interleaved"


class ClusterBody(StrictModel):
    preset: str | None = None
    spec: dict | None = None


class ClosedFormBody(ClusterBody):
    batch: float = 4e6
    layers: float = 100.0
    sparsity: float = 1.0
    duration_s: float = THREE_MONTHS_S
    alpha: float = 0.0


class RunBody(ClusterBody):
    shape: ShapeBody | None = None
    t_flop: float | None = None
    mode: str = "dense"
    laws: str = "default"
    dp_overlap: float | None = None


class SimulateBody(RunBody):
    config: ConfigBody = ConfigBody()


class SearchBody(RunBody):
    n_gpu: int | None = None
    duration_s: float = THREE_MONTHS_S
    gpu_cap: int = GPU_CAP


class SweepBody(ClusterBody):
    t_min_flop: float
    t_max_flop: float
    per_decade: int = 16
    mode: str = "dense"
    laws: str = "default"
    duration_s: float = THREE_MONTHS_S
    gpu_cap: int = GPU_CAP
    dp_overlap: float | None = None


# --- shared resolution ------------------------------------------------------


def _resolve_cluster(body: ClusterBody) -> ClusterSpec:
    if (body.preset is None) == (body.spec is None):
        raise ApiError(400, "validation",
                       "give exactly one of 'preset' or 'spec'",
                       field_path="body.preset")
    if body.preset is not None:
        return preset(body.preset)
    return cluster_from_doc(body.spec)


def _resolve_shape(body: RunBody):
    if (body.shape is None) == (body.t_flop is None):
        raise ApiError(400, "validation",
                       "give exactly one of 'shape' or 't_flop'",
                       field_path="body.shape")
    if body.laws not in LAW_PRESETS:
        raise ApiError(400, "validation",
                       f"unknown scaling-law preset {body.laws!r}",
                       field_path="body.laws")
    if body.t_flop is not None:
        return shape_from_compute(body.t_flop, mode=body.mode,
                                  laws=LAW_PRESETS[body.laws])
    s = body.shape
    return make_shape(s.d_model, s.d_ff, s.n_layers, s.batch,
                      n_experts=s.experts)


def _resolve_policy(dp_overlap: float | None) -> OverlapPolicy | None:
    return None if dp_overlap is None else \
        OverlapPolicy(dp_overlap_fraction=dp_overlap)


def _sweep_points(body: SweepBody) -> list[float]:
    if body.per_decade < 1:
        raise ApiError(400, "validation", "per_decade must be >= 1",
                       field_path="body.per_decade")
    if not (0 < body.t_min_flop <= body.t_max_flop):
        raise ApiError(400, "validation",
                       "need 0 < t_min_flop <= t_max_flop",
                       field_path="body.t_min_flop")
    return log_points(body.t_min_flop, body.t_max_flop, body.per_decade)


def _json_response(payload: dict, status: int = 200) -> Response:
    return Response(content=render_json(payload), status_code=status,
                    media_type="application/json")


def _run_record(shape, cluster, config, breakdown) -> dict:
    norm = breakdown.mfu / sustained_mfu(cluster)
    return point_record(training_compute(shape), "ok", config, breakdown, norm)


# --- async sweep jobs -------------------------------------------------------


@dataclass
class Job:
    id: str
    body: SweepBody
    total: int
    status: str = "queued"
    completed: int = 0
    records: list = field(default_factory=list)
    raw: list = field(default_factory=list)
    endpoint: dict | None = None
    error: str | None = None
    cancel: threading.Event = field(default_factory=threading.Event)


class JobTable:
    """In-memory job registry; oldest finished jobs evicted past the cap."""

    def __init__(self):
        self._jobs: OrderedDict[str, Job] = OrderedDict()
        self._lock = threading.Lock()

    def create(self, body: SweepBody, total: int) -> Job:
        job = Job(id=uuid.uuid4().hex, body=body, total=total)
        with self._lock:
            finished = [j for j in self._jobs.values()
                        if j.status in ("done", "failed")]
            while len(self._jobs) >= JOB_TABLE_CAP and finished:
                evict = finished.pop(0)
                self._jobs.pop(evict.id, None)
            self._jobs[job.id] = job
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def snapshot(self, job: Job) -> dict:
        with self._lock:
            return envelope("job", {
                "id": job.id,
                "status": job.status,
                "progress": {"completed": job.completed, "total": job.total},
                "records": list(job.records),
                "endpoint": job.endpoint,
                "error": job.error,
            })

    def run(self, job: Job, cluster: ClusterSpec, points: list[float]):
        body = job.body
        with self._lock:
            if job.cancel.is_set():
                job.status, job.error = "failed", "cancelled"
                return
            job.status = "running"
        try:
            for t in points:
                if job.cancel.is_set():
                    with self._lock:
                        job.status, job.error = "failed", "cancelled"
                    return
                recs = sweep([t], cluster, mode=body.mode,
                             laws=LAW_PRESETS[body.laws],
                             t_train=body.duration_s,
                             policy=_resolve_policy(body.dp_overlap),
                             cap=body.gpu_cap)
                with self._lock:
                    job.raw.extend(recs)
                    job.records.extend(sweep_record_payload(r) for r in recs)
                    job.completed += 1
            with self._lock:
                ep = find_endpoint(job.raw)
                job.endpoint = None if ep is None else sweep_record_payload(ep)
                job.status = "done"
        except Exception as e:  # noqa: BLE001 - reported through the job
            with self._lock:
                job.status, job.error = "failed", repr(e)


# --- application ------------------------------------------------------------


def create_app(cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="trainlim", docs_url=None, redoc_url=None)
    if cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=list(cors_origins),
                           allow_methods=["*"], allow_headers=["*"])
    jobs = JobTable()
    app.state.jobs = jobs

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return _json_response(
            _error_body(exc.code, exc.message, exc.field_path, exc.invariant),
            status=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        err = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(p) for p in err.get("loc", ())) or "body"
        return _json_response(
            _error_body("validation", err.get("msg", "invalid request"), path),
            status=400)

    @app.exception_handler(InvariantViolation)
    async def _infeasible(request: Request, exc: InvariantViolation):
        return _json_response(
            _error_body("infeasible", str(exc), invariant=exc.name),
            status=422)

    @app.exception_handler(NoFeasibleConfig)
    async def _no_config(request: Request, exc: NoFeasibleConfig):
        return _json_response(_error_body("infeasible", str(exc)), status=422)

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError):
        return _json_response(_error_body("validation", str(exc)), status=400)

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        return _json_response(_error_body("internal", repr(exc)), status=500)

    @app.get("/api/presets")
    def get_presets():
        return _json_response(envelope("presets", {
            "presets": [{"name": name, "spec": cluster_to_doc(preset(name))}
                        for name in preset_names()],
        }))

    @app.post("/api/closed-form")
    def post_closed_form(body: ClosedFormBody):
        cluster = _resolve_cluster(body)
        report = closed_form_report(cluster, batch=body.batch,
                                    layers=body.layers, experts=body.sparsity,
                                    t_train=body.duration_s, alpha=body.alpha)
        return _json_response(closed_form_payload(report))

    @app.post("/api/simulate")
    def post_simulate(body: SimulateBody):
        cluster = _resolve_cluster(body)
        shape = _resolve_shape(body)
        c = body.config
        config = ParallelismConfig(
            n_dp=c.dp, n_tp_ff=c.tp_ff, n_tp_model=c.tp_model, n_pp=c.pp,
            n_ep=c.ep, interleave=c.interleave, microbatches=c.microbatches,
            schedule=c.schedule)
        config = validate_config(shape, config, cluster)
        breakdown = evaluate_step(shape, config, cluster,
                                  _resolve_policy(body.dp_overlap))
        return _json_response(
            point_payload("simulate", _run_record(shape, cluster, config,
                                                  breakdown)))

    @app.post("/api/search")
    def post_search(body: SearchBody):
        cluster = _resolve_cluster(body)
        shape = _resolve_shape(body)
        policy = _resolve_policy(body.dp_overlap)
        if body.n_gpu is not None:
            config, breakdown = best_config(shape, body.n_gpu, cluster,
                                            policy=policy)
        else:
            res = min_cluster(shape, cluster, t_train=body.duration_s,
                              policy=policy, cap=body.gpu_cap)
            if not res.feasible:
                raise ApiError(422, "infeasible",
                               f"{res.status}: {res.message}")
            config, breakdown = res.config, res.breakdown
        return _json_response(
            point_payload("search", _run_record(shape, cluster, config,
                                                breakdown)))

    @app.post("/api/sweep")
    def post_sweep(body: SweepBody):
        cluster = _resolve_cluster(body)
        points = _sweep_points(body)
        if len(points) > SYNC_SWEEP_CAP:
            raise ApiError(400, "too-many-points",
                           f"{len(points)} points exceeds the synchronous cap "
                           f"of {SYNC_SWEEP_CAP}; POST /api/jobs instead",
                           field_path="body.per_decade")
        records = sweep(points, cluster, mode=body.mode,
                        laws=LAW_PRESETS[body.laws], t_train=body.duration_s,
                        policy=_resolve_policy(body.dp_overlap),
                        cap=body.gpu_cap)
        return _json_response(sweep_payload(records, find_endpoint(records)))

    @app.post("/api/jobs")
    def post_job(body: SweepBody):
        cluster = _resolve_cluster(body)
        points = _sweep_points(body)
        job = jobs.create(body, total=len(points))
        worker = threading.Thread(target=jobs.run, args=(job, cluster, points),
                                  daemon=True)
        worker.start()
        return _json_response(envelope("job", {"id": job.id,
                                               "status": job.status}),
                              status=202)

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not-found", f"no job {job_id!r}")
        return _json_response(jobs.snapshot(job))

    @app.delete("/api/jobs/{job_id}")
    def cancel_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not-found", f"no job {job_id!r}")
        job.cancel.set()
        return _json_response(jobs.snapshot(job))

    return app
