"""Deterministic 5G RAN simulator with a video-conferencing-aware prioritization loop."""

import json as _json

from ._streamguard import (
    Action,
    ConfigError,
    FlowState,
    SolverResult,
    align_synthetic,
    all_actions,
    builtin_preset_json,
    fairness_loss,
    parse_action,
    parse_baseline,
    qoe_gain,
    run,
    score_delay,
    score_fps,
    solve,
    solve_exhaustive,
    validate_config,
)


def builtin_preset(n):
    """Preset scenario ``n`` (1..5) as a dict."""
    return _json.loads(builtin_preset_json(n))


def run_config(config, **kwargs):
    """Runs a scenario given as a dict or JSON string; returns the summary dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return run(text, **kwargs)


__all__ = [
    "Action",
    "ConfigError",
    "FlowState",
    "SolverResult",
    "align_synthetic",
    "all_actions",
    "builtin_preset",
    "builtin_preset_json",
    "fairness_loss",
    "parse_action",
    "parse_baseline",
    "qoe_gain",
    "run",
    "run_config",
    "score_delay",
    "score_fps",
    "solve",
    "solve_exhaustive",
    "validate_config",
]
