import json

import pytest
from pydantic import ValidationError

from persdel.scenario import BUNDLED, Scenario, canonical_json, load_scenario, nu_problem, to_primitive


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_round_trip_is_byte_identical(name):
    s = BUNDLED[name]()
    text = canonical_json(s)
    again = canonical_json(load_scenario(text))
    assert again == text
    assert canonical_json(Scenario.model_validate(json.loads(text))) == text


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_scenarios_build(name):
    s = BUNDLED[name]()
    p = to_primitive(s, validate=False)
    assert p.orientation == s.orientation


def test_load_from_file(tmp_path):
    f = tmp_path / "kg.json"
    f.write_text(canonical_json(load_scenario("kg")))
    assert load_scenario(str(f)).name == "kg"


def test_unknown_field_rejected():
    with pytest.raises(ValidationError):
        Scenario.model_validate({"name": "x", "bogus": 1})


def test_nu_problem_for_linear_scenario():
    nu, c, F = nu_problem(load_scenario("ms1991-k1"))
    assert c.domain == (-2.0, 3.0) and F is None
    assert nu(0.5) == pytest.approx(0.125)
