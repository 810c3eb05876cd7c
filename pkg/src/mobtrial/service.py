"""HTTP service wrapping the pipeline.

One endpoint per pipeline verb; the request body carries the same nested
sections as the TOML config file plus optional master-seed/output-dir
overrides. Typed request models reject unknown keys at the boundary;
semantic validation stays in config_from_dict so the CLI's in-process
calls and a remote server behave identically.
"""

from __future__ import annotations

from dataclasses import replace

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .errors import ConfigError, MobtrialError, StageError
from .pipeline import PipelineConfig, RunResult, config_from_dict, run


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PipelineSection(_Section):
    master_seed: int | None = None
    output_dir: str | None = None


class InputSection(_Section):
    # "schema" clashes with a BaseModel attribute, hence the alias
    kind: str | None = None
    path: str | None = None
    schema_: str | None = Field(default=None, alias="schema")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SyntheticSection(_Section):
    n: int | None = None
    seed: int | None = None
    arm_ratio: float | None = None
    noise_sd: float | None = None
    missing_rate: float | None = None
    latent_loading: float | None = None
    baseline_loading: float | None = None
    slope_below: float | None = None
    slope_above: float | None = None
    intercept_below: float | None = None
    intercept_above: float | None = None
    planted_moderator: str | None = None
    planted_cutpoint: float | None = None
    effect_below: float | None = None
    effect_above: float | None = None


class ScaleEntry(_Section):
    name: str
    kind: str
    direction: str
    baseline_column: str
    post_column: str


class CompositeSection(_Section):
    scales: list[ScaleEntry] | None = None


class ImputeSection(_Section):
    n_trees: int | None = None
    mtry: int | None = None
    min_leaf: int | None = None
    max_iterations: int | None = None
    seed: int | None = None


class PreselectSection(_Section):
    enabled: bool | None = None
    n_trees: int | None = None
    moderators_per_tree: int | None = None
    sampling: str | None = None
    alpha: float | None = None
    mc_replicates: int | None = None
    min_node_size: int | None = None
    family_correction: bool | None = None
    seed: int | None = None


class MobSection(_Section):
    alpha: float | None = None
    bonferroni: bool | None = None
    min_node_size: int | None = None
    max_depth: int | None = None
    trim: float | None = None
    mc_replicates: int | None = None
    test_scope: str | None = None
    seed: int | None = None


class ValidateSection(_Section):
    enabled: bool | None = None
    n_bootstrap: int | None = None
    seed: int | None = None
    fast: bool | None = None


class ConfigModel(_Section):
    # "validate" clashes with a BaseModel attribute, hence the alias
    pipeline: PipelineSection | None = None
    input: InputSection | None = None
    synthetic: SyntheticSection | None = None
    composite: CompositeSection | None = None
    impute: ImputeSection | None = None
    preselect: PreselectSection | None = None
    mob: MobSection | None = None
    validate_: ValidateSection | None = Field(default=None, alias="validate")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def to_raw(self) -> dict:
        return self.model_dump(exclude_none=True, by_alias=True)


class AnalysisRequest(_Section):
    config: ConfigModel = ConfigModel()
    seed: int | None = None
    out: str | None = None


class ArtifactModel(_Section):
    path: str
    sha256: str
    stage: str


class RunResponse(_Section):
    status: str
    stage: str
    output_dir: str
    artifacts: list[ArtifactModel]


class HealthResponse(_Section):
    status: str
    version: str


def _resolve(request: AnalysisRequest) -> PipelineConfig:
    config = config_from_dict(request.config.to_raw())
    if request.seed is not None:
        config = replace(config, master_seed=request.seed)
    if request.out is not None:
        config = replace(config, output_dir=request.out)
    return config


def _response(result: RunResult) -> RunResponse:
    return RunResponse(
        status="ok",
        stage=result.stage,
        output_dir=result.output_dir,
        artifacts=[ArtifactModel(**a.to_json()) for a in result.artifacts],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="mobtrial", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(_: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "config"})

    @app.exception_handler(StageError)
    async def _stage_error(_: Request, exc: StageError) -> JSONResponse:
        return JSONResponse(status_code=500, content={"detail": str(exc), "kind": "stage", "stage": exc.stage})

    @app.exception_handler(MobtrialError)
    async def _domain_error(_: Request, exc: MobtrialError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": type(exc).__name__})

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    def _register(verb: str) -> None:
        # plain def: FastAPI runs it in a worker thread, keeping the event
        # loop free during long pipeline stages
        @app.post(f"/{verb}", response_model=RunResponse, name=verb)
        def endpoint(request: AnalysisRequest) -> RunResponse:
            return _response(run(_resolve(request), stage=verb))

    for verb in ("generate", "run", "impute", "tree", "validate"):
        _register(verb)
    return app
