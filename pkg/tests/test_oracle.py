import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import simpson

from coulomb_lab import oracle
from coulomb_lab.equilibrium import GridSpec, solve_thermal_equilibrium
from coulomb_lab.errors import Unsupported
from coulomb_lab.harness.acceptance import _iso_case, _trig_field, squeeze_n3_symbolic
from coulomb_lab.oracle import (
    KPT_LAPLACIAN_CONSTANT,
    KPT_VOLUME_CONSTANT,
    QuadratureGas,
    check_1pt_iso,
    check_eta_energy,
    check_iso_adjoint,
    check_iso_energy,
    check_kpt_comp,
    check_split_identity,
    check_split_thermal,
    check_squeeze,
    kostlan_max_cdf,
    kostlan_max_mean,
    kostlan_sample_max,
    quadrature_rho1,
    shell_averages_3d,
    squeeze_sides,
)
from coulomb_lab.potential import Quadratic
from coulomb_lab.sampler import GasParams


def gas(N, beta, dim=2):
    return QuadratureGas(GasParams(N, beta, dim, Quadratic(0.5, dim)))


# ---------------------------------------------------------------- quadrature gas


def test_single_particle_density_exact():
    # [DERIVED] N=1: rho_1 = (beta / 2 pi) exp(-beta |x|^2 / 2)
    g = gas(1, 2.0)
    X = np.array([[0.0, 0.0], [0.7, -0.4]])
    exact = 2.0 / (2 * math.pi) * np.exp(-np.sum(X * X, axis=1))
    assert np.allclose(g.rho1(X), exact, rtol=1e-10)


def test_two_particle_mass_and_moment():
    # [DERIVED] N=2, beta=0.5, d=2: int rho_1 = 2 and E|x|^2 per particle = 4.5
    g = gas(2, 0.5)
    d = quadrature_rho1(g, grid=GridSpec(0.5, 8.0))
    assert d.integral == pytest.approx(2.0, abs=2e-3)
    r = np.linspace(0.0, g.Rcut, 801)
    rho = g.rho1(np.c_[r, np.zeros_like(r)], check=False)
    mass = simpson(2 * math.pi * r * rho, x=r)
    second = simpson(2 * math.pi * r**3 * rho, x=r)
    assert mass == pytest.approx(2.0, abs=1e-4)
    assert second / 2 == pytest.approx(4.5, rel=1e-4)


def test_pair_distance_density_normalized():
    g = gas(2, 1.0)
    r = np.linspace(0.0, 10.0, 201)
    assert simpson(g.pair_distance_density(r), x=r) == pytest.approx(1.0, abs=1e-3)


def test_conditioned_density_has_one_particle():
    g = gas(2, 1.0)
    d = quadrature_rho1(g, conditioned=[(1.0, 0.0)], grid=GridSpec(0.5, 6.0), check=False)
    assert d.integral == pytest.approx(1.0, abs=2e-3)


def test_unconditioned_three_particles_unsupported():
    with pytest.raises(Unsupported):
        gas(3, 1.0).rho1(np.zeros((1, 2)))


# ---------------------------------------------------------------- splitting


@pytest.mark.parametrize("dim", [2, 3])
def test_split_identity(dim, request, rng):
    eq = request.getfixturevalue(f"eq{dim}")
    for _ in range(5):
        X = 5 ** (1 / dim) * rng.normal(size=(5, dim))
        assert check_split_identity(X, eq) < 1e-10


def test_split_thermal_and_its_sensitivity(eq2, rng):
    p = Quadratic(0.5, 2)
    params = GasParams(20, 2.0, 2, p)
    t = solve_thermal_equilibrium(p, theta=params.theta, eq=eq2, tol=1e-11)
    X = math.sqrt(20) * rng.normal(size=(20, 2)) * 0.6
    assert check_split_thermal(X, t, params) < 1e-9
    # shifting c_{theta,N} by delta moves the log identity by N beta delta
    assert check_split_thermal(X, t, params, c_shift=1e-3) == pytest.approx(20 * 2.0 * 1e-3, rel=1e-6)


# ---------------------------------------------------------------- isotropic averaging


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("inside", [True, False])
def test_iso_energy(dim, inside, request, rng):
    eq = request.getfixturevalue(f"eq{dim}")
    X, ball = _iso_case(eq, 10, rng, inside)
    assert check_iso_energy(X, 0, ball, background=eq.measure_N(10)) < 1e-8


def test_iso_energy_mutation_is_caught(eq2, rng, monkeypatch):
    X, ball = _iso_case(eq2, 10, rng, True)
    mu = eq2.measure_N(10)
    assert check_iso_energy(X, 0, ball, background=mu) < 1e-8
    real = oracle.green_function_ball
    monkeypatch.setattr(oracle, "green_function_ball", lambda *a: -real(*a))
    assert check_iso_energy(X, 0, ball, background=mu) > 1e-3


@pytest.mark.parametrize("dim", [2, 3])
def test_iso_adjoint(dim, rng):
    r = check_iso_adjoint((rng.uniform(-1, 1, dim), 0.8), _trig_field(rng, dim, kmax=2),
                          _trig_field(rng, dim, kmax=2), dim)
    assert r["residual"] < 1e-8
    assert abs(r["lhs"]) > 1e-3


def test_iso_adjoint_grid_field(rng):
    c, R = np.zeros(2), 1.0
    ax = [np.linspace(-1.05, 1.05, 256)] * 2
    F = _trig_field(rng, 2)
    mesh = np.stack([m.ravel() for m in np.meshgrid(*ax, indexing="ij")], axis=1)
    r = check_iso_adjoint((c, R), (ax, F(mesh).reshape(256, 256)), _trig_field(rng, 2), 2)
    assert r["residual"] < 1e-4


# ---------------------------------------------------------------- mean-value and k-point


@pytest.mark.parametrize("beta", [0.5, 2.0])
def test_one_point_iso_no_violation(eq2, beta):
    g = gas(2, beta)
    rep = check_1pt_iso(g, eq2, [((0.0, 0.0), 1.0), ((1.5, 0.0), 0.8)], points=[[(0.3, 0.0)], [(1.5, 0.3)]])
    assert rep.summary["max_violation"] <= 1e-4
    rep = check_1pt_iso(g, eq2, [((1.5, 0.0), 0.8)], conditioned=[(1.6, 0.2)])
    assert rep.summary["max_violation"] <= 1e-4


def test_kpt_constants():
    # [DERIVED] C = 1 / (|B_1| (1 - 2^{-d})), Laplacian factor 1 / (2d)
    assert KPT_VOLUME_CONSTANT[2] == pytest.approx(4 / (3 * math.pi))
    assert KPT_VOLUME_CONSTANT[3] == pytest.approx(1 / (4 * math.pi / 3 * 7 / 8))
    assert KPT_LAPLACIAN_CONSTANT[3] == pytest.approx(1 / 6)


def test_kpt_comparison_holds_with_margin():
    g = gas(2, 1.0)
    rep = check_kpt_comp(g, [((1.0, 0.0), 1.0)], conditioned=[(1.25, 0.0)])
    assert rep.summary["max_violation"] == 0.0
    assert rep.table[0]["log_margin"] > 0


# ---------------------------------------------------------------- squeeze


def test_shell_averages_symbolic():
    r, eta = sp.symbols("r eta", positive=True)
    vol = sp.integrate(r**2, (r, eta / 2, eta))
    inv = sp.simplify(sp.integrate(r, (r, eta / 2, eta)) / vol)
    sq = sp.simplify(sp.integrate(r**4, (r, eta / 2, eta)) / vol)
    assert sp.simplify(inv - sp.Rational(9, 7) / eta) == 0
    assert sp.simplify(sq - sp.Rational(93, 140) * eta**2) == 0
    a, b = shell_averages_3d(0.4)
    assert a == pytest.approx(9 / (7 * 0.4))
    assert b == pytest.approx(93 * 0.16 / 140)


def test_squeeze_closed_form_matches_direct_evaluation(eq3, rng):
    for N in (4, 8):
        X = N ** (1 / 3) * 0.5 * rng.normal(size=(N, 3))
        lhs, rhs = squeeze_sides(X, eq3)
        assert lhs - rhs == pytest.approx(check_squeeze(X, eq3)["Err"], abs=1e-9)


def test_squeeze_three_particles_symbolic(eq3):
    x2, x3 = np.array([0.3, -0.2, 0.1]), np.array([-0.25, 0.35, -0.1])
    sym, _ = squeeze_n3_symbolic(x2, x3)
    num = check_squeeze(np.array([[5.0, 5.0, 5.0], x2, x3]), eq3)["Err"]
    assert num == pytest.approx(sym, abs=1e-10)


def test_squeeze_needs_three_dimensions(eq2):
    with pytest.raises(Unsupported):
        check_squeeze(np.zeros((4, 2)) + np.arange(4)[:, None], eq2)


def test_eta_energy(eq2):
    X = np.array([[0.0, 0.0], [0.5, 0.0]])
    r = check_eta_energy(X, eq2.measure_N(2))
    assert r["sum_g_eta"] == pytest.approx(-2 * math.log(0.125))


# ---------------------------------------------------------------- Ginibre reference


def test_kostlan_reference():
    # [DERIVED] E max|z| for Ginibre(128) from independent Gamma(k, 1) moduli
    assert kostlan_max_mean(128) == pytest.approx(11.9391, abs=1e-3)
    t = np.array([10.0, 11.0, 12.0, 14.0])
    cdf = kostlan_max_cdf(t, 128)
    assert np.all(np.diff(cdf) > 0) and cdf[-1] > 0.99
    mx = kostlan_sample_max(128, 20000, seed=0)
    assert float(mx.mean()) == pytest.approx(kostlan_max_mean(128), abs=0.02)
