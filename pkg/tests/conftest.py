"""
Shared fixtures
"""
import os

import pytest

from hexloop.hexlattice import preset_domain


@pytest.fixture(scope="session")
def single_hex():
    return preset_domain("single_hex")


@pytest.fixture(scope="session")
def two_hex():
    return preset_domain("two_hex")


@pytest.fixture(scope="session")
def hex_ball1():
    return preset_domain("hex_ball", 1)


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch):
    """Keep a developer's HEXLOOP_* environment out of the tests"""
    for key in list(os.environ):
        if key.startswith("HEXLOOP_"):
            monkeypatch.delenv(key, raising=False)
