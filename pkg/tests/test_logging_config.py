"""
Tests for the logging configuration module.
"""

import logging

import pytest

from src.fowler_lab.logging_config import (
    LOG_LEVEL_ENV,
    configure_logging,
    resolve_level,
)


@pytest.mark.parametrize("name,level", [
    ("debug", logging.DEBUG),
    ("INFO", logging.INFO),
    ("warning", logging.WARNING),
    ("error", logging.ERROR),
])
def test_resolve_level(name, level):
    """Test the supported level names."""
    assert resolve_level(name) == level


def test_resolve_level_from_environment(monkeypatch):
    """Test the environment fallback."""
    monkeypatch.setenv(LOG_LEVEL_ENV, "debug")
    assert resolve_level() == logging.DEBUG


def test_resolve_level_default(monkeypatch):
    """Test the default level."""
    monkeypatch.delenv(LOG_LEVEL_ENV, raising=False)
    assert resolve_level() == logging.WARNING


def test_resolve_level_unknown():
    """Test an unknown level name."""
    with pytest.raises(ValueError) as e:
        resolve_level("loud")
    assert "Supported levels" in str(e.value)


def test_configure_logging_sets_package_level():
    """Test that the package logger gets one handler and the level."""
    configure_logging("error")
    configure_logging("info")
    package_logger = logging.getLogger("src.fowler_lab")
    assert package_logger.level == logging.INFO
    assert len(package_logger.handlers) == 1
