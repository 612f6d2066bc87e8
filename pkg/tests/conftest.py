import json
from functools import lru_cache
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from bistable_robin.reaction import make_cubic_reaction, make_wolbachia_reaction
from bistable_robin.steady import find_steady_states
from bistable_robin.timemap import BoundaryEnv

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def wolb():
    return make_wolbachia_reaction()


@pytest.fixture(scope="session")
def cubic():
    return make_cubic_reaction(0.2)


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


@lru_cache(maxsize=None)
def census(p_ext, D, L):
    """Steady states of the default Wolbachia model, shared between test modules."""
    model = make_wolbachia_reaction()
    env = BoundaryEnv(L, D, p_ext)
    return model, env, find_steady_states(model, env)


def by_label(profiles):
    return {p.label: p for p in profiles}


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
