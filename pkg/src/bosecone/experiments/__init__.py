"""Harnesses that test the propagation bounds on exactly simulated systems."""

from .config import (
    PRESETS,
    SCHEMA,
    THEOREMS,
    VELOCITY_MULTIPLE,
    ConfigError,
    ExperimentConfig,
    parse_config_text,
    resolve_config,
)
from .harness import (
    HARNESSES,
    ExperimentError,
    density_controlled_mixture,
    estimate_cone_slope,
    make_state,
    probe_operator,
    run,
    run_astlo_certify,
    run_control,
    run_correlations,
    run_gap_decay,
    run_lc_approx,
    run_lrb,
    run_macroscopic,
    run_mvb,
    run_mvb_controlled_density,
    run_signal,
)
from .report import ExperimentReport, PowerFit, Row, code_version, fit_power_law, fmt_float
from .smoke import run_smoke

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentReport",
    "HARNESSES",
    "PRESETS",
    "PowerFit",
    "Row",
    "SCHEMA",
    "THEOREMS",
    "VELOCITY_MULTIPLE",
    "code_version",
    "density_controlled_mixture",
    "estimate_cone_slope",
    "fit_power_law",
    "fmt_float",
    "make_state",
    "parse_config_text",
    "probe_operator",
    "resolve_config",
    "run",
    "run_astlo_certify",
    "run_control",
    "run_correlations",
    "run_gap_decay",
    "run_lc_approx",
    "run_lrb",
    "run_macroscopic",
    "run_mvb",
    "run_mvb_controlled_density",
    "run_signal",
    "run_smoke",
]
