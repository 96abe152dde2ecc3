"""HTTP service over the core package.

Endpoints mirror the CLI surface: budget formulas, MDP document
validation, experiment runs, and matched-budget comparisons. Run and
compare return every output file as content so clients decide where (and
whether) anything lands on disk; the byte-determinism contract of the
harness carries through unchanged.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..harness import SummaryRow, compare, experiment_files, parse_config, run_seeds
from ..mdp import mdp_from_dict
from ..pq import bounds_report
from .schemas import (
    BoundsRequest,
    BoundsResponse,
    CompareRequest,
    CompareResponse,
    FilePayload,
    HealthResponse,
    RunRequest,
    RunResponse,
    ScheduleModel,
    SummaryModel,
    ValidateResponse,
)


def _summary_model(summary: SummaryRow) -> SummaryModel:
    return SummaryModel(
        config_hash=summary.config_hash,
        seed_count=summary.seed_count,
        samples_used=summary.samples_used,
        q_inf_error_mean=summary.q_inf_error_mean,
        q_inf_error_se=summary.q_inf_error_se,
        v_gap_mean=summary.v_gap_mean,
        v_gap_se=summary.v_gap_se,
        wall_time_s=summary.wall_time_s,
    )


def compute_bounds(req: BoundsRequest) -> BoundsResponse:
    report = bounds_report(
        req.epsilon, req.gamma, req.num_states, req.num_actions, req.c, req.l
    )
    schedule = report.pop("schedule")
    return BoundsResponse(
        **report, schedule=ScheduleModel(beta=schedule["beta"], lam=schedule["lambda"])
    )


def create_app() -> FastAPI:
    app = FastAPI(title="pqlearn", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/bounds", response_model=BoundsResponse)
    def bounds(req: BoundsRequest) -> BoundsResponse:
        try:
            return compute_bounds(req)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/validate", response_model=ValidateResponse)
    def validate(doc: dict) -> ValidateResponse:
        try:
            mdp_from_dict(doc)
        except ValueError as exc:
            return ValidateResponse(valid=False, error=str(exc))
        return ValidateResponse(valid=True)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        doc = dict(req.config)
        if req.seeds is not None:
            doc["seeds"] = req.seeds
        try:
            cfg = parse_config(doc)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        result = run_seeds(cfg, threads=req.threads)
        files = [
            FilePayload(name=name, content=content)
            for name, content in sorted(experiment_files(result).items())
        ]
        return RunResponse(summary=_summary_model(result.summary), files=files)

    @app.post("/compare", response_model=CompareResponse)
    def compare_endpoint(req: CompareRequest) -> CompareResponse:
        try:
            cfg_pq = parse_config(req.pq)
            cfg_std = parse_config(req.standard)
            result = compare(cfg_pq, cfg_std, req.matched_budget, threads=req.threads)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return CompareResponse(
            matched_budget=result.matched_budget,
            pq_summary=_summary_model(result.pq_summary),
            std_summary=_summary_model(result.std_summary),
            files=[FilePayload(name="comparison.csv", content=result.csv)],
            rows=result.rows,
        )

    return app


app = create_app()
