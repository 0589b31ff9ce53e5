"""Acceptance battery: one PASS/FAIL line per criterion, each at its stated tolerance and time budget.

The battery is built fresh here (not shared with the unit tests) so the timings include table builds.
"""

import pytest

from stablelike.suite import Battery

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def battery():
    return Battery(n_paths=100_000, cauchy_paths=10_000, seed=0)


@pytest.mark.parametrize("name", Battery.CRITERIA)
def test_criterion(battery, name, capsys):
    chk = getattr(battery, name)()
    with capsys.disabled():
        print("\n" + chk.line())
    assert chk.passed, chk.to_dict()
    assert chk.within_budget, f"{chk.runtime:.1f}s over the {chk.budget:.0f}s budget"
