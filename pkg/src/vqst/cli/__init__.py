"""Command-line front end: configuration, sweeps and result files."""

from .main import build_parser, main, run

__all__ = ["build_parser", "main", "run"]
