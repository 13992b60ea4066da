"""Shared fixtures: bundled scenario runs are expensive enough to cache."""

import pytest

from timeanchor.scenario import load_scenario, run_stamp


@pytest.fixture(scope="session")
def honest_run():
    return run_stamp(load_scenario("honest_baseline"))


@pytest.fixture(scope="session")
def shifted_run():
    return run_stamp(load_scenario("shifted_miner"))


@pytest.fixture(scope="session")
def late_run():
    return run_stamp(load_scenario("late_inclusion"))


@pytest.fixture(scope="session")
def censor_run():
    return run_stamp(load_scenario("censor_partial"))


@pytest.fixture(scope="session")
def skewed_run():
    return run_stamp(load_scenario("skewed_tsa"))


@pytest.fixture(scope="session")
def multi_run():
    return run_stamp(load_scenario("multi_tsa"))
