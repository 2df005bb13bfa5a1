import json

import numpy as np
import pytest

from coulomb_lab.errors import SchemaError
from coulomb_lab.potential import (
    LogGrowth,
    Quadratic,
    RadialPower,
    ScaledPotential,
    TemperatureSchedule,
    laplacian_bound,
    load_potential_spec,
    potential_from_dict,
    validate_assumptions,
)


@pytest.mark.parametrize("p", [Quadratic(0.5, 2), Quadratic(1.0, 3), RadialPower(0.25, 4, 2), LogGrowth(1.0, 2)])
def test_spec_round_trip(p, tmp_path):
    doc = json.loads(json.dumps(p.to_dict()))
    q = potential_from_dict(doc)
    X = np.random.default_rng(0).normal(size=(5, p.dim))
    assert np.allclose(p.V1(X), q.V1(X))
    path = tmp_path / "v.json"
    path.write_text(json.dumps(doc))
    assert load_potential_spec(path).to_dict() == p.to_dict()


@pytest.mark.parametrize("doc", [
    [],
    {"kind": "nope", "dim": 2, "parameters": {}},
    {"kind": "quadratic", "parameters": {"coefficient": 1}},
    {"kind": "quadratic", "dim": 4, "parameters": {"coefficient": 1}},
    {"kind": "quadratic", "dim": 2, "parameters": {}},
    {"kind": "quadratic", "dim": 2, "parameters": {"coefficient": -1}},
    {"schemaVersion": 9, "kind": "quadratic", "dim": 2, "parameters": {"coefficient": 1}},
])
def test_malformed_specs(doc):
    with pytest.raises(SchemaError):
        potential_from_dict(doc)


def test_bad_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_potential_spec(path)


@pytest.mark.parametrize("dim", [2, 3])
def test_quadratic_scaling_is_invariant(dim):
    p = Quadratic(0.5, dim)
    X = np.random.default_rng(1).normal(size=(4, dim)) * 3
    assert np.allclose(ScaledPotential(p, 37)(X), p.V1(X))


def test_radial_laplacian():
    p = RadialPower(0.25, 4, 2)
    X = np.array([[0.5, 0.0], [0.0, 2.0]])
    # Delta (r^4 / 4) = 4 r^2 in d=2
    assert np.allclose(p.laplacian1(X), 4 * np.sum(X * X, axis=1))
    assert laplacian_bound(ScaledPotential(Quadratic(0.5, 2), 10), np.zeros(2)) == pytest.approx(2.0)


def test_validate_assumptions_quadratic():
    rep = validate_assumptions(Quadratic(0.5, 2), TemperatureSchedule({16: 1.0, 64: 1.0}))
    assert rep.status("A1") == "pass"
    assert rep.status("A3") == "pass"
    assert rep.status("A5") == "pass"
    low = validate_assumptions(Quadratic(0.5, 2), TemperatureSchedule({1: 1.0}))
    assert low.status("A1") == "fail"
    assert "A1" in low.failures()


def test_temperature_schedule():
    s = TemperatureSchedule.constant_theta(10.0, [4, 16], dim=2)
    assert s.theta(4) == pytest.approx(10.0)
    assert s.theta_star == pytest.approx(10.0)
