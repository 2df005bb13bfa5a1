import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coulomb_lab.errors import OutOfDomain, Singular
from coulomb_lab.kernel import (
    CartesianMeasure,
    Configuration,
    RadialMeasure,
    coulomb_kernel,
    dirichlet_potential_charges,
    dirichlet_potential_constant,
    dirichlet_potential_measure,
    energy_delta,
    fundamental_constant,
    green_function_ball,
    harmonic_measure_nodes,
    jellium_energy,
    pair_energy,
    sphere_rule,
    total_energy,
)


def test_kernel_values():
    assert coulomb_kernel([1.0, 0.0], 2) == 0.0
    assert coulomb_kernel([0.0, 2.0], 2) == pytest.approx(-math.log(2.0))
    assert coulomb_kernel([0.0, 0.0, 0.5], 3) == pytest.approx(2.0)
    assert fundamental_constant(2) == pytest.approx(2 * math.pi)
    assert fundamental_constant(3) == pytest.approx(4 * math.pi)


def test_kernel_singular_and_bad_dim():
    with pytest.raises(Singular):
        coulomb_kernel([0.0, 0.0], 2)
    with pytest.raises(ValueError):
        coulomb_kernel([1.0], 1)


def test_pair_energy_three_points():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    expect = -math.log(1.0) - math.log(2.0) - math.log(math.sqrt(5.0))
    assert pair_energy(X, 2) == pytest.approx(expect)
    with pytest.raises(Singular):
        pair_energy(np.zeros((2, 2)), 2)


points = arrays(np.float64, (6, 2), elements=st.floats(-5, 5, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(points, st.integers(0, 5), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_energy_delta_matches_difference(X, i, new):
    new = np.array(new)
    P = np.vstack([X, new[None]])
    if np.min([np.linalg.norm(P[a] - P[b]) for a in range(7) for b in range(a + 1, 7)]) < 1e-3:
        return
    V = lambda Y: 0.5 * np.sum(Y * Y, axis=1)  # noqa: E731
    c = Configuration(X)
    d = energy_delta(c, i, new, V)
    assert d == pytest.approx(total_energy(c.moved(i, new), V) - total_energy(c, V), abs=1e-9)


def test_configuration_is_immutable():
    c = Configuration(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        c.positions[0, 0] = 1.0


@pytest.mark.parametrize("dim", [2, 3])
def test_green_symmetric_and_vanishes_on_sphere(dim, rng):
    c = rng.normal(size=dim)
    R = 1.3
    x = c + 0.4 * rng.normal(size=dim) / math.sqrt(dim)
    y = c + 0.5 * rng.normal(size=dim) / math.sqrt(dim)
    assert green_function_ball(c, R, x, y, dim) == pytest.approx(green_function_ball(c, R, y, x, dim))
    u = rng.normal(size=dim)
    z = c + R * u / np.linalg.norm(u)
    assert abs(dirichlet_potential_charges(c, R, x, z[None] * (1 - 1e-13), dim=dim)) < 1e-9
    with pytest.raises(OutOfDomain):
        green_function_ball(c, R, c + 2 * R, y, dim)


@pytest.mark.parametrize("dim", [2, 3])
def test_green_minus_kernel_is_harmonic(dim, rng):
    # mean-value property of the regular part around a point inside the ball
    c, R = np.zeros(dim), 1.0
    y = np.array([0.3, -0.2, 0.1][:dim])
    x0 = np.array([-0.2, 0.25, 0.0][:dim])
    def reg(P):
        return np.array([green_function_ball(c, R, p, y, dim) for p in P]) - np.array(
            [coulomb_kernel(p - y, dim) for p in P])
    nodes, w = harmonic_measure_nodes(x0, 0.2, dim, 512)
    assert float(np.dot(w, reg(nodes))) == pytest.approx(float(reg(x0[None])[0]), abs=1e-10)


@pytest.mark.parametrize("dim", [2, 3])
def test_sphere_rule_moments(dim):
    U, W = sphere_rule(dim, 512)
    assert W.sum() == pytest.approx(1.0)
    assert np.abs(W @ U).max() < 1e-14
    # E[u_1^2] = 1/d
    assert float(W @ U[:, 0] ** 2) == pytest.approx(1.0 / dim)


@pytest.mark.parametrize("dim", [2, 3])
def test_harmonic_measure_reproduces_harmonic_functions(dim):
    c, R = np.zeros(dim), 1.0
    x = np.array([0.4, 0.1, -0.2][:dim])
    nodes, w = harmonic_measure_nodes(c, R, dim, 4096 if dim == 2 else 20000, x=x)
    f = lambda P: P[:, 0] ** 2 - P[:, 1] ** 2 + 3 * P[:, 0]  # noqa: E731
    assert w.sum() == pytest.approx(1.0, abs=1e-10)
    assert float(w @ f(nodes)) == pytest.approx(float(f(x[None])[0]), abs=1e-9)


@pytest.mark.parametrize("dim", [2, 3])
def test_dirichlet_potential_of_uniform_ball(dim):
    rho = 0.7
    m = RadialMeasure.uniform_ball(3.0, rho * (math.pi * 9 if dim == 2 else 4 * math.pi * 27 / 3), dim)
    c = np.array([0.5, -0.3, 0.2][:dim])
    x = c + np.array([0.2, 0.1, 0.0][:dim])
    got = dirichlet_potential_measure(m, c, 1.0, x=x)
    assert got == pytest.approx(dirichlet_potential_constant(rho, c, 1.0, x, dim), rel=1e-8)


@pytest.mark.parametrize("dim", [2, 3])
def test_uniform_ball_potential_and_energy(dim):
    # [DERIVED] closed forms for the unit-mass uniform ball of radius 1
    m = RadialMeasure.uniform_ball(1.0, 1.0, dim)
    if dim == 2:
        assert m.potential(np.array([[0.0, 0.0]]))[0] == pytest.approx(0.5)
        assert m.potential(np.array([[2.0, 0.0]]))[0] == pytest.approx(-math.log(2.0))
        assert m.self_energy() == pytest.approx(0.25)
    else:
        assert m.potential(np.array([[0.0, 0.0, 0.0]]))[0] == pytest.approx(1.5)
        assert m.potential(np.array([[0.0, 2.0, 0.0]]))[0] == pytest.approx(0.5)
        assert m.self_energy() == pytest.approx(1.2)


def test_cartesian_measure_matches_radial():
    h = 1.0 / 64
    n = 160
    origin = -0.5 * n * h * np.ones(2)
    cm = CartesianMeasure(origin, h, np.ones((n, n)))
    C = cm.centers()
    vals = (np.linalg.norm(C, axis=1) < 1.0).astype(float).reshape(n, n) / math.pi
    cm = CartesianMeasure(origin, h, vals)
    X = np.array([[0.0, 0.0], [2.0, 0.5]])
    ref = RadialMeasure.uniform_ball(1.0, 1.0, 2).potential(X)
    assert np.allclose(cm.potential(X), ref, atol=5e-3)


def test_jellium_energy_neutral_single_particle():
    # one particle at the centre of a unit-mass uniform disc: F = -h(0) + E/2... = -1/2 + 1/8
    m = RadialMeasure.uniform_ball(1.0, 1.0, 2)
    assert jellium_energy(np.zeros((1, 2)), m) == pytest.approx(-0.5 + 0.125)
