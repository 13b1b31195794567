"""FastAPI service wrapping the simulator: stateless compute endpoints for
world generation, trial/corpus runs, report aggregation, and SVG rendering.
The CLI drives these same endpoints (in-process by default)."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, harness
from ..config import SimConfig, apply_overrides
from ..harness import TrialResult, build_report, generator_params, run_trial
from ..simworld import GenerationError, WorldModel, generate_world
from .schemas import (
    CorpusRequest,
    CorpusResponse,
    HealthResponse,
    RenderRequest,
    RenderResponse,
    ReportRequest,
    TrialRecord,
    TrialRequest,
    WorldDocument,
    WorldGenRequest,
)


def _config_from(overrides: dict) -> SimConfig:
    try:
        return apply_overrides(SimConfig(), overrides)
    except (KeyError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(
        title="doorstep",
        description="Marker-free last-mile drone delivery simulator",
        version=__version__,
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/worlds/generate", response_model=WorldDocument)
    def worlds_generate(req: WorldGenRequest) -> WorldDocument:
        cfg = _config_from(req.config)
        params = generator_params(cfg, req.seed, req.visibility)
        try:
            world = generate_world(params)
        except GenerationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return WorldDocument.model_validate(world.to_dict())

    @app.post("/trials/run", response_model=TrialRecord)
    def trials_run(req: TrialRequest) -> TrialRecord:
        cfg = _config_from(req.config)
        try:
            trial = run_trial(req.seed, req.method, req.target, cfg,
                              visibility=req.visibility)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return TrialRecord.model_validate(trial.to_record())

    @app.post("/corpus/run", response_model=CorpusResponse)
    def corpus_run(req: CorpusRequest) -> CorpusResponse:
        cfg = _config_from(req.config)
        report, trials = harness.run_corpus(cfg)
        return CorpusResponse(
            report=report,
            trials=[TrialRecord.model_validate(t.to_record()) for t in trials],
        )

    @app.post("/report", response_model=dict)
    def report(req: ReportRequest) -> dict:
        cfg = _config_from(req.config) if req.config else None
        trials = [
            TrialResult.from_record(t.model_dump(by_alias=True)) for t in req.trials
        ]
        return build_report(trials, cfg)

    @app.post("/render", response_model=RenderResponse)
    def render(req: RenderRequest) -> RenderResponse:
        cfg = _config_from(req.config)
        rec = req.trial.model_dump(by_alias=True)
        if not rec.get("trajectory"):
            raise HTTPException(status_code=422, detail="trial has no trajectory")
        if req.world is not None:
            world = WorldModel.from_dict(req.world.model_dump(by_alias=True))
        else:
            world = generate_world(
                generator_params(cfg, rec["seed"], rec.get("visibility"))
            )
        svg = harness.svg_trajectory(rec, world)
        return RenderResponse(svg=svg)

    return app


app = create_app()
