"""Quick identity and inequality suite behind ``coulomb-lab verify``.

Each group returns a list of contracts {name, value, threshold, passed}. The
suite is a fast subset of the acceptance experiments with the same
tolerances.
"""

import numpy as np

from ..equilibrium import solve_equilibrium, solve_thermal_equilibrium
from ..estimators import field_mean_value_test
from ..oracle import (
    QuadratureGas,
    check_1pt_iso,
    check_iso_adjoint,
    check_iso_energy,
    check_kpt_comp,
    check_split_identity,
    check_split_thermal,
    check_squeeze,
    squeeze_sides,
)
from ..errors import SchemaError
from ..potential import Quadratic
from ..sampler import GasParams
from .acceptance import _iso_case, _random_configs, _trig_field

GROUPS = ("split", "iso", "mean_value", "kpt", "squeeze")


def _contract(name, value, threshold, passed):
    return {"name": name, "value": float(value), "threshold": threshold, "passed": bool(passed)}


def verify_split(rng, count=10):
    out = []
    for d in (2, 3):
        p = Quadratic(0.5, d)
        eq = solve_equilibrium(p)
        params = GasParams(5, 2.0, d, p)
        t = solve_thermal_equilibrium(p, theta=params.theta, eq=eq, tol=1e-11)
        cfgs = _random_configs(eq, 5, count, rng)
        s = max(check_split_identity(X, eq) for X in cfgs)
        th = max(check_split_thermal(X, t, params) for X in cfgs)
        out += [_contract(f"split_identity_d{d}", s, 1e-8, s < 1e-8),
                _contract(f"split_thermal_d{d}", th, 1e-6, th < 1e-6)]
    return out


def verify_iso(rng, count=6):
    eq = solve_equilibrium(Quadratic(0.5, 2))
    mu = eq.measure_N(10)
    res = 0.0
    for k in range(count):
        X, ball = _iso_case(eq, 10, rng, k % 2 == 0)
        res = max(res, check_iso_energy(X, 0, ball, background=mu, n_nodes=512))
    c = rng.uniform(-1, 1, 2)
    adj = check_iso_adjoint((c, 1.0), _trig_field(rng, 2), _trig_field(rng, 2), 2)["residual"]
    return [_contract("iso_energy_d2", res, 1e-6, res < 1e-6),
            _contract("iso_adjoint_d2", adj, 1e-4, adj < 1e-4)]


def verify_mean_value(rng):
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p)
    worst = 0.0
    for N in (1, 2):
        g = QuadratureGas(GasParams(N, 1.0, 2, p))
        rep = check_1pt_iso(g, eq, [((0.0, 0.0), 1.0), ((1.5, 0.0), 0.8)])
        worst = max(worst, rep.summary["max_violation"])
    harm = abs(field_mean_value_test(lambda P: P[:, 0] ** 2 - P[:, 1] ** 2, rng.uniform(-1, 1, 2), 0.7, 2))
    return [_contract("one_point_iso_d2", worst, 1e-4, worst <= 1e-4),
            _contract("harmonic_field_mean_value", harm, 1e-10, harm < 1e-10)]


def verify_kpt(rng):
    p = Quadratic(0.5, 2)
    g = QuadratureGas(GasParams(2, 1.0, 2, p))
    a = check_kpt_comp(g, [((0.5, 0.0), 1.0), ((2.0, 0.0), 0.8)])
    b = check_kpt_comp(g, [((1.0, 0.0), 1.0)], conditioned=[(1.25, 0.0)])
    worst = max(a.summary["max_violation"], b.summary["max_violation"])
    return [_contract("kpt_comparison_d2", worst, 1e-4, worst <= 1e-4)]


def verify_squeeze(rng, count=10):
    eq = solve_equilibrium(Quadratic(0.5, 3))
    Cs = []
    gap = 0.0
    for X in _random_configs(eq, 8, count, rng, noise=0.5):
        r = check_squeeze(X, eq)
        Cs.append(r["implied_C"])
    X = _random_configs(eq, 8, 1, rng, noise=0.5)[0]
    lhs, rhs = squeeze_sides(X, eq)
    gap = abs(lhs - rhs - check_squeeze(X, eq)["Err"])
    ratio = float(np.max(Cs) / np.median(Cs))
    return [_contract("squeeze_implied_C_max_over_median", ratio, 20.0, ratio < 20),
            _contract("squeeze_direct_vs_closed_form", gap, 1e-8, gap < 1e-8)]


RUNNERS = {"split": verify_split, "iso": verify_iso, "mean_value": verify_mean_value, "kpt": verify_kpt,
           "squeeze": verify_squeeze}


def run_verify(groups=None, seed=0):
    groups = list(groups or GROUPS)
    bad = [g for g in groups if g not in RUNNERS]
    if bad:
        raise SchemaError(f"unknown verify group(s) {bad}; expected a subset of {list(GROUPS)}")
    rng = np.random.default_rng(seed)
    return {g: RUNNERS[g](rng) for g in groups}
