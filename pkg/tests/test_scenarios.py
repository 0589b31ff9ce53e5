import json

import numpy as np
import pytest

from stablelike.frozen import CoefficientField
from stablelike.scenarios import CATALOG, ScenarioError, load, scenario_hash, validate, write_catalog


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_entries_build(name):
    f = CoefficientField.from_scenario(name)
    assert 1 < f.alpha < 2 and f.alpha + f.beta < 2
    z = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(f.sigma(0.4, z), f.sigma(0.4, -z))


def test_round_trip_through_files(tmp_path):
    paths = write_catalog(tmp_path)
    assert len(paths) == len(CATALOG)
    for p in paths:
        assert scenario_hash(load(str(p))) == scenario_hash(CATALOG[p.stem])


def test_hash_is_order_independent():
    sc = CATALOG["holder"]
    shuffled = json.loads(json.dumps(sc, sort_keys=False))
    shuffled = dict(reversed(list(shuffled.items())))
    assert scenario_hash(sc) == scenario_hash(shuffled)


def test_field_level_diagnostics():
    bad = json.loads(json.dumps(CATALOG["holder"]))
    bad["alpha"] = 2.5
    bad["sigma"]["params"].pop("K")
    with pytest.raises(ScenarioError) as exc:
        validate(bad)
    assert any("sigma.params.K" in p for p in exc.value.problems)

    bad = json.loads(json.dumps(CATALOG["holder"]))
    bad["alpha"] = 1.8
    with pytest.raises(ScenarioError) as exc:
        validate(bad)
    assert any("alpha+beta" in p for p in exc.value.problems)


def test_missing_file():
    with pytest.raises(ScenarioError):
        load("/nonexistent/scenario.json")
