"""Shared test fixtures for fininfo tests."""

import logging

import pytest

from fininfo.config import KnnConfig


@pytest.fixture(autouse=True)
def _isolate_env(monkeypatch):
    """Drop FININFO_* variables inherited from the shell so defaults apply."""
    import os

    for name in list(os.environ):
        if name.startswith("FININFO_"):
            monkeypatch.delenv(name)


@pytest.fixture(autouse=True)
def _restore_root_logging():
    """cli.main() reconfigures the root logger; undo it after each test."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture()
def knn_cfg() -> KnnConfig:
    return KnnConfig()
