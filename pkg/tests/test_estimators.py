import math

import numpy as np
import pytest

from coulomb_lab.equilibrium import GridSpec
from coulomb_lab.errors import GeometryError
from coulomb_lab.estimators import (
    OnePointDensity,
    bulk_windows,
    confinement_profile,
    count_in_ball,
    estimate_rho1,
    estimate_rho2,
    extreme_radius,
    field_mean_value_test,
    poisson_tests,
    rider_center,
    subharmonicity_test,
    synthetic_poisson_sampleset,
    vacuum_tail,
)
from coulomb_lab.oracle import kostlan_sample_max
from coulomb_lab.potential import Quadratic
from coulomb_lab.sampler import GasParams, SampleSet


def uniform_disc_set(N, M, R, seed=0):
    rng = np.random.default_rng(seed)
    r = R * np.sqrt(rng.random((M, N)))
    a = 2 * np.pi * rng.random((M, N))
    return SampleSet(np.stack([r * np.cos(a), r * np.sin(a)], axis=2), {"kind": "test"})


def test_rho1_integrates_to_N():
    S = uniform_disc_set(16, 500, 4.0)
    est = estimate_rho1(S, GridSpec(0.5, 5.0))
    assert est.integral == pytest.approx(16.0)
    assert est.leakage == pytest.approx(0.0)
    assert np.all(est.se > 0)
    # uniform density 16 / (16 pi) well inside
    assert est.interpolate(np.zeros((1, 2)))[0] == pytest.approx(1 / math.pi, rel=0.2)
    assert OnePointDensity(h=0.5, extent=5.0).fit(S).predict(np.zeros((1, 2)))[0] > 0


def test_count_in_ball_binomial():
    S = uniform_disc_set(20, 4000, 2.0, seed=1)
    c = count_in_ball(S, [0.0, 0.0], 1.0, gammas=[0.0, 0.1])
    # Binomial(20, 1/4): mean 5, variance 3.75
    assert c.mean == pytest.approx(5.0, abs=4 * c.se_mean)
    assert c.variance == pytest.approx(3.75, rel=0.1)
    assert c.mgf[0] == 1.0
    assert c.mgf[1] == pytest.approx((0.75 + 0.25 * math.exp(0.1)) ** 20, rel=0.02)
    with pytest.raises(ValueError):
        count_in_ball(S, [0.0, 0.0, 0.0], 1.0)


def test_rho2_uniform_is_flat():
    S = uniform_disc_set(30, 400, 5.0, seed=2)
    rep = estimate_rho2(S, [[0.0, 0.0]], np.linspace(0.5, 2.0, 4), eps=1.0)
    expect = 30 * 29 / (25 * math.pi) ** 2
    for row in rep.table:
        assert row["rho2"] == pytest.approx(expect, abs=5 * row["se"])


def test_rider_center_undefined_at_small_N():
    # [DERIVED] log 128 - 2 log log 128 - log 2 pi < 0
    assert math.isnan(rider_center(128))
    L = math.log(10**6) - 2 * math.log(math.log(10**6)) - math.log(2 * math.pi)
    assert rider_center(10**6) == pytest.approx(1000 + 0.5 * math.sqrt(L))


def test_extreme_radius_on_exact_ginibre():
    mx = kostlan_sample_max(64, 4000, seed=0)
    # embed the exact maxima as one particle per sample (others at the origin)
    X = np.zeros((mx.size, 64, 2))
    X[:, 0, 0] = mx
    X[:, 1:, 0] = np.linspace(0.01, 0.5, 63)
    rep = extreme_radius(SampleSet(X, {}), beta=2.0)
    assert rep.summary["mean"] == pytest.approx(float(mx.mean()))
    assert rep.summary["below_bound"]


def test_field_mean_value():
    harm = lambda P: P[:, 0] * P[:, 1] + P[:, 0]  # noqa: E731
    sub = lambda P: np.sum(P * P, axis=1)  # noqa: E731
    assert abs(field_mean_value_test(harm, [0.3, 0.2], 1.0, 2)) < 1e-12
    # |x|^2 on a circle of radius r: mean exceeds the centre value by r^2
    assert field_mean_value_test(sub, [0.3, 0.2], 1.0, 2) == pytest.approx(-1.0)


def test_subharmonicity_geometry(eq2):
    S = uniform_disc_set(16, 200, 4.0)
    rho = estimate_rho1(S, GridSpec(0.5, 8.0))
    p = GasParams(16, 2.0, 2, Quadratic(0.5, 2))
    with pytest.raises(GeometryError):
        subharmonicity_test(rho, eq2, p, [((3.0, 0.0), 1.5)])
    with pytest.raises(ValueError):
        subharmonicity_test(rho, eq2, p, [((6.5, 0.0), 0.5)])
    rep = subharmonicity_test(rho, eq2, p, [((6.0, 0.0), 1.0)])
    assert rep.summary["balls"] == 1


def test_confinement_and_vacuum_tail_run(eq2):
    S = uniform_disc_set(16, 300, 4.3, seed=3)
    p = GasParams(16, 2.0, 2, Quadratic(0.5, 2))
    conf = confinement_profile(S, eq2, p)
    assert conf.summary["max_in_rho1"] > 0
    vt = vacuum_tail(S, eq2, p, np.linspace(0.05, 1.0, 5))
    probs = [r["probability"] for r in vt.table]
    assert all(a >= b for a, b in zip(probs, probs[1:]))


def test_poisson_suite_on_synthetic_control(eq2):
    S = synthetic_poisson_sampleset(256, 4000, 14.0, seed=1)
    wins = [w for w in bulk_windows(eq2, 256) if np.all(np.abs(w[0]) <= 12) and np.all(np.abs(w[1]) <= 12)]
    rep = poisson_tests(S, wins)
    assert 0.85 <= rep.summary["dispersion_min"] <= rep.summary["dispersion_max"] <= 1.15
    assert rep.summary["tv_max"] < 0.1


def test_bulk_windows_inside_droplet(eq2):
    wins = bulk_windows(eq2, 256)
    R = 16.0
    assert wins
    for lo, hi in wins:
        assert np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))) <= R


def test_report_serialization(eq2):
    S = synthetic_poisson_sampleset(64, 100, 6.0, seed=0)
    rep = poisson_tests(S, [(np.zeros(2), np.ones(2))])
    assert '"dispersion_min"' in rep.to_json()
    assert rep.to_csv().startswith("lo,hi,")
