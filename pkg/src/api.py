"""
FastAPI application exposing the annealing toolkit over HTTP.

This service provides endpoints to:
1. Run a bounded annealing job
2. Compute quality indicators of posted point sets or uploaded result files
3. Retrieve benchmark reference fronts
"""

from __future__ import annotations

import asyncio
import logging
import math
from typing import Any

from cachetools import TTLCache
from fastapi import FastAPI, File, HTTPException, Query, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from src import metrics
from src.harness import RunTask, best_objectives, run_metrics, run_single
from src.mosar_config import HarnessSettings, configure_logging, validate_budget
from src.mosar_models import (
    DEFAULT_SCHEDULES,
    Algorithm,
    MoveConfig,
    ProblemName,
    ProblemSpec,
    RunResult,
    Schedule,
)
from src.pareto import ContractViolation
from src.result_files import ResultFileError, parse_result

settings = HarnessSettings.from_env()
configure_logging(settings.log_level)
logger = logging.getLogger(__name__)


app = FastAPI(
    title="Constrained Annealing Service",
    description="Multi-objective simulated annealing runs and Pareto-set quality indicators",
    version="1.0.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins,
    allow_credentials=True,
    allow_methods=["GET", "POST"],
    allow_headers=["Content-Type", "Authorization"],
)

logger.info(f"Allowed CORS origins: {', '.join(settings.allowed_origins)}")


# ============================================================================
# Runtime Configuration
# ============================================================================

MAX_UPLOAD_BYTES = settings.max_upload_bytes
MAX_UPLOAD_FILES = 100


class SolveCache:
    """Thread-safe TTL cache wrapper for solve responses."""

    def __init__(self, ttl_seconds: int, max_items: int):
        self._cache: TTLCache[str, SolveResponse] = TTLCache(maxsize=max_items, ttl=ttl_seconds)
        self._lock = asyncio.Lock()

    async def get(self, key: str) -> SolveResponse | None:
        async with self._lock:
            return self._cache.get(key)

    async def set(self, key: str, value: SolveResponse) -> None:
        async with self._lock:
            self._cache[key] = value


class SolveRequest(BaseModel):
    """Request to run one annealing job"""

    problem: ProblemSpec = Field(..., description="Problem and its parameters")
    algorithm: Algorithm = Field(Algorithm.MOSAR2, description="Annealing algorithm")
    seed: int = Field(1, ge=0, description="RNG seed")
    schedule: Schedule | None = Field(None, description="Defaults to the problem schedule")
    move: MoveConfig = Field(default_factory=MoveConfig)
    literal_average: bool = False

    def resolved_schedule(self) -> Schedule:
        return self.schedule or DEFAULT_SCHEDULES[self.problem.name]


class SolveResponse(BaseModel):
    """Result of a solve request"""

    success: bool
    message: str
    result: RunResult | None = None
    metrics: dict[str, float | None] | None = None
    best: dict[str, float] | None = None
    errors: list[str] | None = None


class MetricsRequest(BaseModel):
    """Labeled point sets, each a list of (f1, f2) pairs of feasible solutions"""

    sets: dict[str, list[tuple[float, float]]] = Field(..., min_length=1)
    reference_front: list[tuple[float, float]] | None = Field(
        None, description="Reference front for IGD and HV"
    )
    problem: ProblemName | None = Field(
        None, description="Use the generated reference front of a benchmark problem"
    )
    resolution: int = Field(metrics.DEFAULT_REFERENCE_RESOLUTION, ge=1000, le=5000)


class SetMetrics(BaseModel):
    cardinality: int
    minimal_spacing: float
    spacing: float
    igd: float | None = None
    igd_empty: bool = False
    hv: float | None = None


class MetricsResponse(BaseModel):
    sets: dict[str, SetMetrics]
    coverage: dict[str, float]
    accounted_proportion: dict[str, float]


class FileMetrics(BaseModel):
    filename: str
    problem: ProblemName
    side_length: float | None
    algorithm: Algorithm
    seed: int
    metrics: dict[str, float | None]


class ResultMetricsResponse(BaseModel):
    files: list[FileMetrics]
    accounted_proportion: dict[str, float]


# ============================================================================
# Helpers
# ============================================================================


def get_solve_cache(request: Request) -> SolveCache | None:
    """Return the solve cache if caching is enabled."""
    return getattr(request.app.state, "solve_cache", None)


def _json_safe(values: dict[str, float]) -> dict[str, float | None]:
    return {k: (None if math.isinf(v) else v) for k, v in values.items()}


def _set_metrics(points: Any, reference: Any | None) -> SetMetrics:
    values = SetMetrics(
        cardinality=metrics.cardinality(points),
        minimal_spacing=metrics.minimal_spacing(points),
        spacing=metrics.spacing(points),
    )
    if reference is not None and len(reference) > 0:
        igd = metrics.igd(points, reference)
        values.igd = None if math.isinf(igd) else igd
        values.igd_empty = math.isinf(igd)
        values.hv = metrics.hypervolume_2d(points, reference)
    return values


# ============================================================================
# API Endpoints
# ============================================================================


@app.get("/")
async def root() -> dict:
    """Root endpoint with API information"""
    logger.info("Root endpoint accessed")
    return {
        "service": "Constrained Annealing Service",
        "version": "1.0.0",
        "endpoints": {
            "solve": "/api/solve",
            "metrics": "/api/metrics",
            "result_metrics": "/api/results/metrics",
            "reference_front": "/api/reference-front/{problem}",
        },
    }


@app.get("/health")
async def health_check() -> dict:
    """Health check endpoint"""
    return {"status": "healthy"}


@app.post("/api/solve", response_model=SolveResponse)
async def solve(solve_request: SolveRequest, request: Request) -> SolveResponse:
    """
    Run one annealing job.

    The schedule must fit within MAX_API_EVALUATIONS main-loop evaluations.
    Identical requests are served from the cache when caching is enabled.
    """
    schedule = solve_request.resolved_schedule()
    is_valid, errors = validate_budget(schedule, settings.max_api_evaluations)
    if not is_valid:
        logger.warning(f"Rejected solve request: {errors}")
        raise HTTPException(status_code=422, detail=f"Invalid schedule: {errors}")

    cache = get_solve_cache(request)
    cache_key = solve_request.model_dump_json()
    if cache:
        cached_response = await cache.get(cache_key)
        if cached_response is not None:
            logger.info("Cache hit for solve request")
            return cached_response

    task = RunTask(
        problem=solve_request.problem,
        algorithm=solve_request.algorithm,
        seed=solve_request.seed,
        schedule=schedule,
        move=solve_request.move,
        literal_average=solve_request.literal_average,
    )
    logger.info(
        "Solving %s with %s (seed=%d, %d evaluations)",
        task.problem.name.value,
        task.algorithm.value,
        task.seed,
        schedule.evaluation_budget,
    )
    try:
        result = await asyncio.to_thread(run_single, task)
        values = await asyncio.to_thread(run_metrics, result, settings.cache_dir)
    except Exception as e:
        logger.error(f"Solve failed: {str(e)}", exc_info=True)
        return SolveResponse(success=False, message=f"Solve failed: {str(e)}", errors=[str(e)])

    response = SolveResponse(
        success=True,
        message=f"Found {result.metadata.feasible_count} feasible solutions",
        result=result,
        metrics=_json_safe(values),
        best=best_objectives(result),
    )
    if cache:
        await cache.set(cache_key, response)
    return response


@app.post("/api/metrics", response_model=MetricsResponse)
async def compute_metrics(metrics_request: MetricsRequest) -> MetricsResponse:
    """
    Indicators of posted point sets.

    Each set is treated as the output of one algorithm: coverage is reported for
    every ordered pair of sets and accounted proportion across all of them.
    """
    reference: Any = metrics_request.reference_front
    if reference is None and metrics_request.problem is not None:
        if metrics_request.problem not in metrics.REFERENCE_BOXES:
            raise HTTPException(
                status_code=422,
                detail=f"No reference front for problem {metrics_request.problem.value}",
            )
        reference = await asyncio.to_thread(
            metrics.reference_front,
            metrics_request.problem,
            metrics_request.resolution,
            settings.cache_dir,
        )

    try:
        per_set = {
            label: _set_metrics(points, reference)
            for label, points in metrics_request.sets.items()
        }
    except ContractViolation as e:
        raise HTTPException(status_code=422, detail=str(e)) from e

    coverage = {
        f"C({a},{b})": metrics.coverage(metrics_request.sets[a], metrics_request.sets[b])
        for a in metrics_request.sets
        for b in metrics_request.sets
        if a != b
    }
    proportion = metrics.accounted_proportion(
        {label: [points] for label, points in metrics_request.sets.items()}
    )
    return MetricsResponse(sets=per_set, coverage=coverage, accounted_proportion=proportion)


@app.post("/api/results/metrics", response_model=ResultMetricsResponse)
async def compute_result_metrics(files: list[UploadFile] = File(...)) -> ResultMetricsResponse:
    """Indicators of uploaded result files; accounted proportion groups them by algorithm."""
    if not files:
        raise HTTPException(status_code=400, detail="No files uploaded")
    if len(files) > MAX_UPLOAD_FILES:
        raise HTTPException(
            status_code=413, detail=f"At most {MAX_UPLOAD_FILES} files per request"
        )

    results: list[tuple[str, RunResult]] = []
    for upload in files:
        content = await upload.read()
        name = upload.filename or "<upload>"
        if len(content) > MAX_UPLOAD_BYTES:
            raise HTTPException(
                status_code=413, detail=f"{name} exceeds {MAX_UPLOAD_BYTES} bytes"
            )
        try:
            results.append((name, parse_result(content.decode("utf-8"), name)))
        except (ResultFileError, UnicodeDecodeError) as e:
            logger.warning(f"Rejected upload {name}: {e}")
            raise HTTPException(status_code=422, detail=str(e)) from e

    file_metrics = []
    for name, result in results:
        values = await asyncio.to_thread(run_metrics, result, settings.cache_dir)
        meta = result.metadata
        file_metrics.append(
            FileMetrics(
                filename=name,
                problem=meta.problem.name,
                side_length=meta.problem.side_length,
                algorithm=meta.algorithm,
                seed=meta.seed,
                metrics=_json_safe(values),
            )
        )

    by_algorithm: dict[str, list[Any]] = {}
    for _, result in results:
        by_algorithm.setdefault(result.metadata.algorithm.value, []).append(result.metric_points())
    return ResultMetricsResponse(
        files=file_metrics, accounted_proportion=metrics.accounted_proportion(by_algorithm)
    )


@app.get("/api/reference-front/{problem}")
async def get_reference_front(
    problem: ProblemName,
    resolution: int = Query(metrics.DEFAULT_REFERENCE_RESOLUTION, ge=1000, le=5000),
) -> dict:
    """Brute-force reference front of a benchmark problem."""
    if problem not in metrics.REFERENCE_BOXES:
        raise HTTPException(status_code=404, detail=f"No reference front for {problem.value}")
    front = await asyncio.to_thread(
        metrics.reference_front, problem, resolution, settings.cache_dir
    )
    return {
        "problem": problem.value,
        "resolution": resolution,
        "count": len(front),
        "points": front.tolist(),
    }


# ============================================================================
# Startup/Shutdown Events
# ============================================================================


@app.on_event("startup")
async def startup_event() -> None:
    """Initialize application on startup."""
    logger.info("Constrained Annealing Service starting up...")
    if settings.cache_enabled:
        app.state.solve_cache = SolveCache(settings.cache_ttl_seconds, settings.cache_max_items)
        logger.info(
            "Solve cache enabled (ttl=%ss, max_items=%s)",
            settings.cache_ttl_seconds,
            settings.cache_max_items,
        )


@app.on_event("shutdown")
async def shutdown_event() -> None:
    """Cleanup on shutdown."""
    logger.info("Constrained Annealing Service shutting down...")


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=8000)
