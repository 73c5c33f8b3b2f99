"""Python access to the copolicy simulation core."""

import json

from ._copolicy import (
    CopolicyError,
    InvalidConfig,
    __version__,
    classify_bias,
    figure_points,
    run_scenario,
    synth_panel,
)
from ._copolicy import run_config_csv as _run_config_csv
from ._copolicy import run_config_json as _run_config_json
from ._copolicy import thresholds_json as _thresholds_json


def run_config(config):
    """Run a configuration given as a dict (same schema as the TOML files)."""
    return _run_config_json(json.dumps(config))


def run_config_csv(config):
    """Like run_config, but returns the results CSV text."""
    return _run_config_csv(json.dumps(config))


def thresholds():
    return json.loads(_thresholds_json())


__all__ = [
    "CopolicyError",
    "InvalidConfig",
    "__version__",
    "classify_bias",
    "figure_points",
    "run_config",
    "run_config_csv",
    "run_scenario",
    "synth_panel",
    "thresholds",
]
