"""Configuration-driven case runner."""

from .config import OUTPUT_ENV, CaseConfig, ConfigError, parse_config
from .main import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, build_parser, main

__all__ = [
    "EXIT_CONFIG",
    "EXIT_OK",
    "EXIT_SOLVER",
    "OUTPUT_ENV",
    "CaseConfig",
    "ConfigError",
    "build_parser",
    "main",
    "parse_config",
]
