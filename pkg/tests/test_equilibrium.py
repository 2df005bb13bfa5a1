import math

import numpy as np
import pytest

from coulomb_lab.equilibrium import (
    EquilibriumMeasure,
    GridSpec,
    ThermalEquilibriumMeasure,
    quadratic_droplet_radius,
    sample_measure,
    solve_equilibrium,
    solve_thermal_equilibrium,
    thermal_properties_report,
)
from coulomb_lab.errors import UnsupportedGeometry
from coulomb_lab.potential import Quadratic, RadialPower


def test_closed_form_quadratic(eq2, eq3):
    # [DERIVED] uniform unit ball; c = h^mu(0) + V(0)
    assert eq2.droplet_radius_estimate() == pytest.approx(1.0)
    assert eq2.c == pytest.approx(0.5)
    assert eq3.c == pytest.approx(1.5)
    assert eq2.density1(np.zeros((1, 2)))[0] == pytest.approx(1 / math.pi)
    assert quadratic_droplet_radius(1.0, 3) == pytest.approx(2 ** (-1 / 3))


@pytest.mark.parametrize("eqname", ["eq2", "eq3"])
def test_zeta_zero_inside_positive_outside(eqname, request):
    eq = request.getfixturevalue(eqname)
    d = eq.dim
    X = np.zeros((3, d))
    X[:, 0] = [0.2, 0.9, 1.5]
    z = eq.zeta1(X)
    assert abs(z[0]) < 1e-12 and abs(z[1]) < 1e-12 and z[2] > 0


def test_zeta_closed_form_outside_d2(eq2):
    # zeta = r^2/2 - log r - 1/2 outside the unit disc
    r = np.array([1.5, 3.0])
    X = np.c_[r, np.zeros(2)]
    assert np.allclose(eq2.zeta1(X), r**2 / 2 - np.log(r) - 0.5)


def test_radial_solver_matches_closed_form():
    eq = solve_equilibrium(Quadratic(0.5, 2), method="radial")
    assert eq.droplet_radius_estimate() == pytest.approx(1.0, abs=0.02)
    assert eq.c == pytest.approx(0.5, abs=1e-3)


def test_quartic_droplet_radius():
    # [DERIVED] V = |x|^4/4: density 4 r^2/(2 pi), unit mass at R = (1/(a p))^(1/p) = 1
    eq = solve_equilibrium(RadialPower(0.25, 4, 2), grid=GridSpec(0.005))
    assert eq.droplet_radius_estimate() == pytest.approx(1.0, abs=0.02)
    r = np.array([0.3, 0.6])
    assert np.allclose(eq.density1(np.c_[r, np.zeros(2)]), 4 * r**2 / (2 * math.pi), rtol=0.05)


def test_cartesian_3d_unsupported():
    with pytest.raises(UnsupportedGeometry):
        solve_equilibrium(Quadratic(0.5, 3), method="cartesian")


def test_measure_N_mass(eq2):
    assert eq2.measure_N(50).mass == pytest.approx(50.0)


@pytest.mark.parametrize("theta", [5.0, 50.0])
def test_thermal_relation_and_mass(eq2, theta):
    t = solve_thermal_equilibrium(Quadratic(0.5, 2), theta=theta, eq=eq2, tol=1e-10)
    rep = thermal_properties_report(t, eq2)
    assert rep["relation_residual"] < 1e-8
    assert abs(rep["mass"] - 1) < 1e-10


def test_thermal_refuses_low_theta():
    with pytest.raises(ValueError):
        solve_thermal_equilibrium(Quadratic(0.5, 2), theta=1.5)


def test_thermal_approaches_equilibrium(eq2):
    t = solve_thermal_equilibrium(Quadratic(0.5, 2), theta=200.0, eq=eq2, tol=1e-10)
    inner = t.measure.centers <= 0.9
    assert np.max(np.abs(t.measure.values[inner] - 1 / math.pi)) < 5e-2


def test_sample_measure_uniform_disc(eq2):
    X = sample_measure(eq2.measure, 20000, np.random.default_rng(0))
    r2 = np.sum(X * X, axis=1)
    assert r2.max() <= 1.0 + 1e-12
    assert r2.mean() == pytest.approx(0.5, abs=0.01)


def test_estimator_wrappers():
    m = EquilibriumMeasure(N=16).fit(Quadratic(0.5, 2))
    assert m.droplet_radius_ == pytest.approx(1.0)
    assert m.predict(np.zeros((1, 2)))[0] == pytest.approx(1 / math.pi)
    assert m.transform(np.array([[0.0, 0.0]]))[0] == pytest.approx(0.0, abs=1e-12)
    t = ThermalEquilibriumMeasure(theta=20.0).fit(Quadratic(0.5, 2))
    assert t.predict(np.zeros((1, 2)))[0] > 0
