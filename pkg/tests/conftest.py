import pathlib

import numpy as np
import pytest

import standgrowth as sg

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def load(name: str) -> sg.LoadedScenario:
    return sg.load_scenario(SCENARIO_DIR / name)


@pytest.fixture(scope="session")
def convex_price():
    """Power theta=0.3, alpha=6: cut-first optimal regime."""
    return load("convex_price_power.ini")


@pytest.fixture(scope="session")
def concave_price():
    """Power theta=0.5, alpha=1: ceiling-riding optimal regime."""
    return load("concave_price_power.ini")


@pytest.fixture(scope="session")
def linear_growth():
    return load("linear_growth.ini")


@pytest.fixture(scope="session")
def fagacees():
    return load("fagacees.ini")


@pytest.fixture(scope="session")
def low_energy():
    return load("low_energy.ini")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


_REFS_CACHE: dict = {}


def envelope_refs(scenario, horizon, step=None, with_terminal=False):
    """Session-cached reference trajectories (they are expensive to build)."""
    key = (id(scenario), horizon, step, with_terminal)
    if key not in _REFS_CACHE:
        _REFS_CACHE[key] = sg.EnvelopeRefs.build(scenario, horizon, step=step,
                                                 with_terminal=with_terminal)
    return _REFS_CACHE[key]


_XI_CACHE: dict = {}


def xi_bound(scenario, horizon, step=None):
    key = (id(scenario), horizon, step)
    if key not in _XI_CACHE:
        _XI_CACHE[key] = sg.xi_lower_bound(scenario, horizon, step=step)
    return _XI_CACHE[key]
