"""Dithered quantization, universal binning and post-estimation for
correlated pair sources, with a verification suite for every computable
identity the construction rests on."""

from .config import ExperimentConfig, default_config, load_config_file, load_config_text
from .errors import (
    ConfigError,
    DegenerateStatsError,
    DitherlabError,
    DomainError,
    PreconditionError,
    RateInfeasibleError,
    SamplerCapError,
    SearchCapError,
)
from .pipeline import (
    run_estimate_report,
    run_pipeline,
    run_quantize_demo,
    run_region_report,
    run_sw_report,
)
from .report import RunReport
from .verify import run_verification_suite

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ExperimentConfig",
    "default_config",
    "load_config_file",
    "load_config_text",
    "DitherlabError",
    "ConfigError",
    "DomainError",
    "DegenerateStatsError",
    "SamplerCapError",
    "SearchCapError",
    "RateInfeasibleError",
    "PreconditionError",
    "RunReport",
    "run_region_report",
    "run_quantize_demo",
    "run_sw_report",
    "run_estimate_report",
    "run_pipeline",
    "run_verification_suite",
]
