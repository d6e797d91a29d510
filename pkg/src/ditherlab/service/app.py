"""HTTP facade over the experiment drivers.

Every endpoint takes the same configuration body, runs one driver, and
returns its report payload verbatim. Package errors map to structured
JSON errors: configuration problems are 400, domain and budget violations
are 422.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..config import ExperimentConfig
from ..errors import ConfigError, DitherlabError
from ..pipeline import (
    run_estimate_report,
    run_pipeline,
    run_quantize_demo,
    run_region_report,
    run_sw_report,
)
from ..verify import run_verification_suite
from .models import ConfigModel, config_from_model

__all__ = ["app", "create_app"]


def create_app() -> FastAPI:
    app = FastAPI(
        title="ditherlab",
        version="0.1.0",
        description="Dithered quantization, universal binning and post-estimation "
        "for correlated pair sources.",
    )

    @app.exception_handler(ConfigError)
    async def config_error(_request: Request, err: ConfigError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "config", "message": str(err)}},
        )

    @app.exception_handler(DitherlabError)
    async def package_error(_request: Request, err: DitherlabError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": {"code": type(err).__name__, "message": str(err)}},
        )

    def _config(model: ConfigModel) -> ExperimentConfig:
        return config_from_model(model)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/region")
    def region(model: ConfigModel) -> dict:
        return run_region_report(_config(model)).payload

    @app.post("/quantize-demo")
    def quantize_demo(model: ConfigModel) -> dict:
        return run_quantize_demo(_config(model)).payload

    @app.post("/sw-sim")
    def sw_sim(model: ConfigModel) -> dict:
        return run_sw_report(_config(model)).payload

    @app.post("/estimate")
    def estimate(model: ConfigModel) -> dict:
        return run_estimate_report(_config(model)).payload

    @app.post("/pipeline")
    def pipeline(model: ConfigModel) -> dict:
        return run_pipeline(_config(model)).payload

    @app.post("/selftest")
    def selftest() -> dict:
        return run_verification_suite().payload

    return app


app = create_app()
