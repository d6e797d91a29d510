"""Request and response models for the HTTP service.

The request side mirrors ExperimentConfig field by field so that a JSON
body and an INI file describe exactly the same run. Conversion helpers in
both directions live here; validation beyond types stays in the config
layer so the CLI and the service reject bad inputs identically.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..config import ExperimentConfig
from ..errors import ConfigError

__all__ = ["SourceModel", "ConfigModel", "config_from_model", "model_from_config"]


class SourceModel(BaseModel):
    kind: Literal["uniform-square", "truncated-gaussian", "discrete-grid"]
    halfwidth: float = 1.0
    tilt: Optional[float] = None
    sigma1: Optional[float] = None
    sigma2: Optional[float] = None
    rho: Optional[float] = None
    atoms: Optional[list[tuple[float, float, float]]] = None


class ConfigModel(BaseModel):
    source: SourceModel = Field(
        default_factory=lambda: SourceModel(kind="uniform-square", tilt=0.75)
    )
    distortion1: float = 1.0 / 3.0
    distortion2: float = 1.0 / 3.0
    block_length: int = 8
    margin1: float = 0.5
    margin2: float = 0.5
    trials: int = 200
    dither_grid: int = 32
    quad_rel_tol: float = 1e-9
    quad_max_nodes: int = 1024
    sampler_attempt_cap: int = 1000
    enumeration_cap: int = 1 << 28
    pair_eval_cap: int = 10**8
    estimator_samples: int = 200_000
    seed: int = 1
    threads: int = 1
    stats_mode: Literal["universal", "oracle"] = "universal"


def config_from_model(model: ConfigModel) -> ExperimentConfig:
    params: dict = {"halfwidth": model.source.halfwidth}
    if model.source.kind == "uniform-square":
        params["tilt"] = model.source.tilt if model.source.tilt is not None else 0.0
    elif model.source.kind == "truncated-gaussian":
        params["sigma1"] = model.source.sigma1 if model.source.sigma1 is not None else 1.0
        params["sigma2"] = model.source.sigma2 if model.source.sigma2 is not None else 1.0
        params["rho"] = model.source.rho if model.source.rho is not None else 0.0
    else:
        if not model.source.atoms:
            raise ConfigError("discrete-grid sources need an atoms list")
        params["atoms"] = [tuple(a) for a in model.source.atoms]
    return ExperimentConfig(
        source_kind=model.source.kind,
        source_params=params,
        distortion1=model.distortion1,
        distortion2=model.distortion2,
        block_length=model.block_length,
        margin1=model.margin1,
        margin2=model.margin2,
        trials=model.trials,
        dither_grid=model.dither_grid,
        quad_rel_tol=model.quad_rel_tol,
        quad_max_nodes=model.quad_max_nodes,
        sampler_attempt_cap=model.sampler_attempt_cap,
        enumeration_cap=model.enumeration_cap,
        pair_eval_cap=model.pair_eval_cap,
        estimator_samples=model.estimator_samples,
        seed=model.seed,
        threads=model.threads,
        stats_mode=model.stats_mode,
    )


def model_from_config(config: ExperimentConfig) -> ConfigModel:
    params = config.source_params
    source = SourceModel(
        kind=config.source_kind,
        halfwidth=params.get("halfwidth", 1.0),
        tilt=params.get("tilt"),
        sigma1=params.get("sigma1"),
        sigma2=params.get("sigma2"),
        rho=params.get("rho"),
        atoms=[tuple(a) for a in params["atoms"]] if "atoms" in params else None,
    )
    return ConfigModel(
        source=source,
        distortion1=config.distortion1,
        distortion2=config.distortion2,
        block_length=config.block_length,
        margin1=config.margin1,
        margin2=config.margin2,
        trials=config.trials,
        dither_grid=config.dither_grid,
        quad_rel_tol=config.quad_rel_tol,
        quad_max_nodes=config.quad_max_nodes,
        sampler_attempt_cap=config.sampler_attempt_cap,
        enumeration_cap=config.enumeration_cap,
        pair_eval_cap=config.pair_eval_cap,
        estimator_samples=config.estimator_samples,
        seed=config.seed,
        threads=config.threads,
        stats_mode=config.stats_mode,
    )
