"""Simulated mesh: mock repositories, mock sources, fixtures, scenarios."""

from .mocks import MockRepository, MockSource, spawn_mock_repo, spawn_mock_source
from .fixtures import seed_fixture, TABLE1_EXPECTED
from .scenario import ScenarioRunner, load_scenario

__all__ = [
    "MockRepository",
    "MockSource",
    "spawn_mock_repo",
    "spawn_mock_source",
    "seed_fixture",
    "TABLE1_EXPECTED",
    "ScenarioRunner",
    "load_scenario",
]
