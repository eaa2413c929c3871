"""
Logging configuration for the command line front end.

Library modules only call ``logging.getLogger(__name__)``; handlers are
installed here, once, by the entry point.
"""

import logging
import os
import sys

LOG_LEVEL_ENV = "FOWLER_LAB_LOG_LEVEL"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("debug", "info", "warning", "error")


def resolve_level(level: str | None = None) -> int:
    """
    Resolve a textual log level.

    Args:
        level: Level name; falls back to the environment, then WARNING

    Returns:
        Numeric logging level

    Raises:
        ValueError: If the level name is unknown
    """
    name = level or os.environ.get(LOG_LEVEL_ENV) or "warning"
    if name.lower() not in LOG_LEVELS:
        raise ValueError(
            f"Unknown log level: {name}. "
            f"Supported levels: {', '.join(LOG_LEVELS)}"
        )
    return getattr(logging, name.upper())


def configure_logging(level: str | None = None) -> None:
    """Install a single stderr handler on the package logger."""
    package_logger = logging.getLogger(__name__.rpartition(".")[0])
    package_logger.setLevel(resolve_level(level))
    if not package_logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        package_logger.addHandler(handler)
