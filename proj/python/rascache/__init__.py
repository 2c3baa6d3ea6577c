"""Python bindings for the rascache secure-cache simulator."""

from ._rascache import (
    ConfigError,
    DefenseMode,
    IoError,
    TraceParseError,
    __version__,
    attack_names,
    config_hash,
    generate_trace,
    recover,
    render_heatmap,
    replay,
    run_attack,
    run_experiment,
    simulate,
)

__all__ = [
    "ConfigError",
    "DefenseMode",
    "IoError",
    "TraceParseError",
    "__version__",
    "attack_names",
    "config_hash",
    "generate_trace",
    "recover",
    "render_heatmap",
    "replay",
    "run_attack",
    "run_experiment",
    "simulate",
]
