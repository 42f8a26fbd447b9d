"""CRBM and radiomics features with cross-validated response prediction."""

import json
import os

from . import _core
from ._core import (
    ConfigError,
    Error,
    __version__,
    auc_mann_whitney,
    crbm_feature_map,
    free_energy,
    init_crbm,
    radiomics_features,
    roc,
)

__all__ = [
    "ConfigError",
    "Error",
    "__version__",
    "auc_mann_whitney",
    "crbm_feature_map",
    "extract_features",
    "free_energy",
    "generate_synthetic",
    "init_crbm",
    "radiomics_features",
    "resolve_config",
    "roc",
    "run_pipeline",
    "train_crbm",
]


def _config_text(config):
    """Accepts a dict, a JSON string, a path to a JSON file, or None."""
    if config is None:
        return "{}"
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, os.PathLike) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        with open(config, encoding="utf-8") as f:
            return f.read()
    return config


def resolve_config(config=None):
    return json.loads(_core.resolve_config(_config_text(config)))


def generate_synthetic(out_dir, config=None):
    return _core.generate_synthetic(_config_text(config), os.fspath(out_dir))


def train_crbm(manifest, config=None):
    """Returns (model_json, history)."""
    return _core.train_crbm(_config_text(config), os.fspath(manifest))


def extract_features(manifest, config=None, model_json=None):
    return _core.extract_features(_config_text(config), os.fspath(manifest), model_json)


def run_pipeline(manifest, config=None, model_json=None):
    """Returns the report as a dict."""
    return json.loads(_core.run_pipeline(_config_text(config), os.fspath(manifest), model_json))
