import numpy as np
import pytest

from stablelike.frozen import CoefficientField
from stablelike.suite import Battery


@pytest.fixture(scope="session")
def shared():
    """Tables reused by the unit tests (the acceptance test builds its own, timed)."""
    return Battery(n_paths=20_000, cauchy_paths=2000)


@pytest.fixture(scope="session")
def holder(shared):
    return shared.field("holder")


@pytest.fixture(scope="session")
def constant(shared):
    return shared.field("constant")


@pytest.fixture(scope="session")
def holder_table(shared):
    return shared.table("holder")


@pytest.fixture(scope="session")
def constant_table(shared):
    return shared.table("constant")


@pytest.fixture(scope="session")
def drift_solution(shared):
    return shared.solution()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def field_from(name, **changes):
    from stablelike.scenarios import CATALOG
    import copy

    sc = copy.deepcopy(CATALOG[name])
    sc.update(changes)
    return CoefficientField.from_scenario(sc)
