"""HTTP service wrapping the experiment drivers."""

from .app import app, create_app
from .models import ConfigModel, SourceModel, config_from_model, model_from_config

__all__ = [
    "app",
    "create_app",
    "ConfigModel",
    "SourceModel",
    "config_from_model",
    "model_from_config",
]
