"""End-to-end acceptance experiments, one function per criterion.

Each ``criterion_k(cfg)`` returns a dict with the criterion id, a title, the
result it probes, a list of named checks (value, threshold, passed), the
runtime and its budget. A criterion passes when every check passes. Monte
Carlo runs shared between criteria are cached in-process by their parameters.
"""

import math
import time

import numpy as np

from ..equilibrium import (
    GridSpec,
    sample_measure,
    solve_equilibrium,
    solve_thermal_equilibrium,
    thermal_properties_report,
)
from ..estimators import (
    bulk_windows,
    confinement_profile,
    estimate_rho1,
    extreme_radius,
    field_mean_value_test,
    poisson_tests,
    rider_center,
    subharmonicity_test,
    synthetic_poisson_sampleset,
    vacuum_tail,
)
from ..oracle import (
    QuadratureGas,
    check_1pt_iso,
    check_iso_adjoint,
    check_iso_energy,
    check_kpt_comp,
    check_split_identity,
    check_split_thermal,
    check_squeeze,
    kostlan_max_mean,
    quadrature_rho1,
    squeeze_sides,
)
from ..potential import Quadratic
from ..sampler import GasParams, integrated_autocorr_time, sample_chains

CRITERIA = {
    1: ("Splitting identities", "electric and thermal splitting formulas"),
    2: ("Isotropic averaging", "Iso energy identity and Iso adjoint"),
    3: ("Obstacle solver accuracy", "equilibrium measure as an obstacle problem"),
    4: ("Thermal equilibrium", "thermal equilibrium measure and its properties"),
    5: ("Oracle inequality suite", "mean-value inequalities and k-point comparison"),
    6: ("Subharmonicity", "subharmonicity of exp(beta zeta) rho_1 outside the droplet"),
    7: ("Confinement", "rho_1 bound and vacuum probability"),
    8: ("Ginibre extreme radius", "radial confinement and the extreme-radius law"),
    9: ("High-temperature Poisson behaviour", "mixed Poisson limit (finite-N evidence)"),
    10: ("Squeeze inequality", "squeezing bound and its error term"),
}

BUDGET = {1: 60, 2: 60, 3: 120, 4: 120, 5: 600, 6: 600, 7: 1200, 8: 1200, 9: 900, 10: 300}

_SAMPLES = {}
SPHERE_CLEARANCE = 0.1


def _check(name, value, threshold, passed, **extra):
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed), **extra}


def _result(k, checks, t0, notes=None, data=None):
    runtime = time.perf_counter() - t0
    checks = list(checks) + [_check("runtime_seconds", runtime, BUDGET[k], runtime < BUDGET[k])]
    title, probes = CRITERIA[k]
    return {"id": k, "title": title, "probes": probes, "passed": all(c["passed"] for c in checks),
            "checks": checks, "runtime": runtime, "budget": BUDGET[k], "notes": notes or [], "data": data or {}}


def gas_samples(N, beta, dim, samples, seed, chains=4, thin=None, burn_in=None, threads=1):
    """Cached MCMC SampleSet for the quadratic potential V_1 = |x|^2 / 2."""
    key = (N, beta, dim, samples, seed, chains, thin, burn_in)
    if key not in _SAMPLES:
        p = Quadratic(0.5, dim)
        params = GasParams(N, beta, dim, p, equilibrium=solve_equilibrium(p))
        per = int(math.ceil(samples / chains))
        sched = {"burnIn": 200 * N if burn_in is None else burn_in, "thin": N if thin is None else thin,
                 "samples": per}
        _SAMPLES[key] = sample_chains(params, sched, seed=seed, chains=chains, threads=threads)
    return _SAMPLES[key]


def _random_configs(eq, N, count, rng, noise=0.3):
    s = N ** (1.0 / eq.dim)
    return [s * sample_measure(eq.measure, N, rng) + noise * rng.standard_normal((N, eq.dim)) for _ in range(count)]


# ----------------------------------------------------------------------------


def criterion_1(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.get("seed", 1))
    beta = cfg.get("beta", 2.0)
    count = cfg.get("configs", 100)
    tol = cfg.get("thermalTol", 1e-11)
    split_max, thermal_max = 0.0, 0.0
    rows = []
    for d in (2, 3):
        p = Quadratic(0.5, d)
        eq = solve_equilibrium(p)
        for N in cfg.get("N", [5, 20]):
            params = GasParams(N, beta, d, p)
            t = solve_thermal_equilibrium(p, theta=params.theta, eq=eq, tol=tol)
            sr, tr = [], []
            for X in _random_configs(eq, N, count, rng):
                sr.append(check_split_identity(X, eq))
                tr.append(check_split_thermal(X, t, params))
            rows.append({"dim": d, "N": N, "theta": params.theta, "split_max": max(sr), "thermal_max": max(tr),
                         "thermal_solver_residual": t.residual})
            split_max = max(split_max, max(sr))
            thermal_max = max(thermal_max, max(tr))
    checks = [_check("split_relative_residual_max", split_max, 1e-8, split_max < 1e-8),
              _check("thermal_log_residual_max", thermal_max, 1e-6, thermal_max < 1e-6)]
    return _result(1, checks, t0, [f"thermal solves at tolerance {tol:g}"], {"cases": rows})


def _iso_case(eq, N, rng, inside):
    d = eq.dim
    s = N ** (1.0 / d)
    Rd = eq.droplet_radius_estimate() * s
    u = rng.standard_normal(d)
    u /= np.linalg.norm(u)
    if inside:
        c = u * rng.uniform(0.0, 0.5 * Rd)
        R = rng.uniform(0.3, 0.9) * (Rd - np.linalg.norm(c))
    else:
        R = rng.uniform(0.5, 2.0)
        c = u * (Rd + R + rng.uniform(0.1, 2.0))
    while True:
        def in_ball(frac_lo, frac_hi):
            v = rng.standard_normal(d)
            return c + R * rng.uniform(frac_lo, frac_hi) * v / np.linalg.norm(v)

        X = [in_ball(0.0, 0.8)] + [in_ball(0.05, 0.85) for _ in range(3)]
        X += list(s * sample_measure(eq.measure, N - 4, rng) + 0.3 * rng.standard_normal((N - 4, d)))
        X = np.array(X)
        # fixed sphere rules cannot resolve a charge hugging the sphere
        if np.all(np.abs(np.linalg.norm(X[1:] - c, axis=1) - R) > SPHERE_CLEARANCE * R):
            return X, (c, R)


def _trig_field(rng, dim, terms=6, kmax=3):
    K = rng.integers(-kmax, kmax + 1, size=(terms, dim)).astype(float)
    a = rng.standard_normal(terms)
    ph = rng.uniform(0, 2 * np.pi, terms)
    return lambda P: np.cos(np.asarray(P) @ K.T * 0.7 + ph) @ a


def criterion_2(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.get("seed", 2))
    N = cfg.get("N", 10)
    cases = cfg.get("cases", 50)
    energy = {}
    for d in (2, 3):
        eq = solve_equilibrium(Quadratic(0.5, d))
        mu = eq.measure_N(N)
        nodes = 512 if d == 2 else cfg.get("nodes3d", 32768)
        res = [check_iso_energy(*_iso_case_args(eq, N, rng, k % 2 == 0), background=mu, n_nodes=nodes)
               for k in range(cases)]
        energy[d] = (max(res), nodes)
    # the same d=3 cases at 512 product-rule nodes, for the record
    rng3 = np.random.default_rng(cfg.get("seed", 2) + 100)
    eq3 = solve_equilibrium(Quadratic(0.5, 3))
    coarse3 = max(check_iso_energy(*_iso_case_args(eq3, N, rng3, k % 2 == 0), background=eq3.measure_N(N),
                                   n_nodes=512) for k in range(10))
    adj = []
    for k in range(cfg.get("adjointCases", 4)):
        c = rng.uniform(-1, 1, 2)
        R = rng.uniform(0.5, 1.5)
        ax = [np.linspace(c[j] - R - 0.05, c[j] + R + 0.05, 256) for j in range(2)]
        F = _trig_field(rng, 2)
        G = _trig_field(rng, 2)
        mesh = np.stack([m.ravel() for m in np.meshgrid(*ax, indexing="ij")], axis=1)
        adj.append(check_iso_adjoint((c, R), (ax, F(mesh).reshape(256, 256)), G, 2)["residual"])
    adj3 = check_iso_adjoint((rng.uniform(-1, 1, 3), 1.0), _trig_field(rng, 3, kmax=2), _trig_field(rng, 3, kmax=2),
                             3)["residual"]
    checks = [_check("iso_energy_residual_max_d2_512_nodes", energy[2][0], 1e-6, energy[2][0] < 1e-6),
              _check(f"iso_energy_residual_max_d3_{energy[3][1]}_nodes", energy[3][0], 1e-6, energy[3][0] < 1e-6),
              _check("iso_adjoint_residual_max_d2_grid256", max(adj), 1e-4, max(adj) < 1e-4),
              _check("iso_adjoint_residual_d3", adj3, 1e-4, adj3 < 1e-4)]
    notes = [f"every other particle keeps a clearance of {SPHERE_CLEARANCE} R from the sphere",
             f"d=3 with 512 product-rule nodes gives residual {coarse3:.2e} (sphere rule too coarse), "
             f"so the d=3 cases use {energy[3][1]} nodes"]
    return _result(2, checks, t0, notes, {"iso_energy_d3_512_nodes": coarse3})


def _iso_case_args(eq, N, rng, inside):
    X, ball = _iso_case(eq, N, rng, inside)
    return X, 0, ball


def criterion_3(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    h = cfg.get("h", 1.0 / 128)
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p, grid=GridSpec(h, None, "cartesian"), method="cartesian")
    m = eq.measure
    radii = np.concatenate([np.linalg.norm(c, axis=1) for c in eq.droplet_boundary()])
    radius_err = float(np.max(np.abs(radii - 1.0)))
    C = m.centers()
    sub = 16
    off = (np.arange(sub) + 0.5) / sub - 0.5
    S = np.stack([g.ravel() for g in np.meshgrid(off, off, indexing="ij")], axis=1) * m.h
    frac = np.mean(np.linalg.norm(C[:, None, :] + S[None], axis=2) < 1.0, axis=1)
    exact = frac / np.pi
    err = np.abs(m.values.ravel() - exact)
    away = np.abs(np.linalg.norm(C, axis=1) - 1.0) >= 2 * h
    sup_away = float(np.max(err[away]))
    checks = [_check("droplet_radius_error", radius_err, 2 * h, radius_err <= 2 * h),
              _check("density_sup_error_off_boundary_cells", sup_away, 2e-2, sup_away < 2e-2)]
    notes = ["density error measured against cell averages of the closed form on cells at least 2h from the "
             f"exact free boundary; including boundary cells the sup error is {float(err.max()):.3g}"]
    return _result(3, checks, t0, notes, {"solver_log": eq.log, "sup_error_all_cells": float(err.max())})


def criterion_4(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p)
    checks, data = [], {}
    for theta in cfg.get("thetas", [5.0, 50.0]):
        t = solve_thermal_equilibrium(p, theta=theta, eq=eq, tol=cfg.get("tol", 1e-10))
        rep = thermal_properties_report(t, eq)
        data[str(theta)] = rep
        checks += [
            _check(f"relation_residual_theta{theta:g}", rep["relation_residual"], 1e-8, rep["relation_residual"] < 1e-8),
            _check(f"mass_error_theta{theta:g}", abs(rep["mass"] - 1.0), 1e-10, abs(rep["mass"] - 1.0) < 1e-10),
            _check(f"convert_ratio_min_theta{theta:g}", rep["convert_ratio_min"], 0.1, rep["convert_ratio_min"] >= 0.1),
            _check(f"convert_ratio_max_theta{theta:g}", rep["convert_ratio_max"], 10.0, rep["convert_ratio_max"] <= 10),
        ]
    t = solve_thermal_equilibrium(p, theta=200.0, eq=eq, tol=cfg.get("tol", 1e-10))
    r = t.measure.centers
    inner = r <= cfg.get("interiorRadius", 0.9)
    sup = float(np.max(np.abs(t.measure.values[inner] - 1.0 / np.pi)))
    checks.append(_check("theta200_interior_sup_distance", sup, 5e-2, sup < 5e-2))
    notes = [f"interior means |x| <= {cfg.get('interiorRadius', 0.9)} (macroscopic)"]
    return _result(4, checks, t0, notes, data)


def criterion_5(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    worst_iso, worst_kpt = 0.0, 0.0
    rows = []
    for d in cfg.get("dims", [2, 3]):
        p = Quadratic(0.5, d)
        eq = solve_equilibrium(p)
        e = np.eye(d)[0]
        f = np.eye(d)[1]
        balls = [(np.zeros(d), 1.0), (1.5 * e, 0.8), (3.0 * e + f, 1.0)]
        inner = [[0.3 * e], [1.5 * e + 0.3 * f], [3.2 * e + f]]
        y2 = 1.6 * e + 0.2 * f
        for beta in cfg.get("betas", [0.5, 1.0, 2.0]):
            for N in (1, 2):
                g = QuadratureGas(GasParams(N, beta, d, p))
                a = check_1pt_iso(g, eq, balls, points=inner)
                k = check_kpt_comp(g, [(0.5 * e, 1.0), (2.0 * e, 0.8)])
                worst_iso = max(worst_iso, a.summary["max_violation"])
                worst_kpt = max(worst_kpt, k.summary["max_violation"])
                rows.append({"dim": d, "beta": beta, "N": N, "conditioned": False,
                             "iso": a.summary["max_violation"], "kpt": k.summary["max_violation"]})
                if N == 2:
                    a = check_1pt_iso(g, eq, balls[1:2], conditioned=[y2])
                    k = check_kpt_comp(g, [(e, 1.0)], conditioned=[1.25 * e])
                    worst_iso = max(worst_iso, a.summary["max_violation"])
                    worst_kpt = max(worst_kpt, k.summary["max_violation"])
                    rows.append({"dim": d, "beta": beta, "N": N, "conditioned": True,
                                 "iso": a.summary["max_violation"], "kpt": k.summary["max_violation"],
                                 "kpt_log_margin": k.table[0]["log_margin"]})
    # MCMC against quadrature at N=2
    p = Quadratic(0.5, 2)
    beta = cfg.get("mcmcBeta", 1.0)
    S = gas_samples(2, beta, 2, cfg.get("mcmcSamples", 200000), cfg.get("seed", 5), chains=4, thin=5, burn_in=1000)
    grid = GridSpec(0.5, 4.0)
    est = estimate_rho1(S, grid)
    ref = quadrature_rho1(QuadratureGas(GasParams(2, beta, 2, p)), grid=grid)
    z = np.abs(est.values - ref.values) / est.se
    zmax = float(np.max(z))
    checks = [_check("1pt_iso_max_violation", worst_iso, 1e-4, worst_iso <= 1e-4),
              _check("kpt_comp_max_violation", worst_kpt, 1e-4, worst_kpt <= 1e-4),
              _check("mcmc_vs_quadrature_max_z", zmax, 5.0, zmax <= 5.0)]
    return _result(5, checks, t0, data={"cases": rows, "mcmc_bins": int(z.size)})


def _subharmonic_fields():
    harmonic = lambda P: P[:, 0] ** 2 - P[:, 1] ** 2 + np.exp(P[:, 0]) * np.cos(P[:, 1])  # noqa: E731
    subharm = lambda P: np.sum(P**2, axis=1) + np.exp(P[:, 0])  # noqa: E731
    h = max(abs(field_mean_value_test(harmonic, c, 0.7, 2)) for c in ([0.0, 0.0], [1.0, -0.5], [2.0, 2.0]))
    s = max(field_mean_value_test(subharm, c, 0.7, 2) for c in ([0.0, 0.0], [1.0, -0.5], [2.0, 2.0]))
    return h, s


def criterion_6(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    N, beta = cfg.get("N", 64), cfg.get("beta", 2.0)
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p)
    S = gas_samples(N, beta, 2, cfg.get("samples", 20000), cfg.get("seed", 6), threads=cfg.get("threads", 1))
    rho = estimate_rho1(S, GridSpec(0.5, None))
    Rd = eq.droplet_radius_estimate() * math.sqrt(N)
    radius = cfg.get("ballRadius", 1.0)
    ang = 2 * np.pi * np.arange(20) / 20
    dist = Rd + radius + cfg.get("gap", 0.2)
    balls = [(dist * np.array([math.cos(a), math.sin(a)]), radius) for a in ang]
    rep = subharmonicity_test(rho, eq, GasParams(N, beta, 2, p), balls)
    h, s = _subharmonic_fields()
    checks = [_check("max_excess_in_se", rep.summary["max_excess_in_se"], 3.0, rep.summary["violations"] == 0),
              _check("harmonic_field_mean_value_defect", h, 1e-10, h < 1e-10),
              _check("subharmonic_field_center_minus_mean", s, 0.0, s <= 0.0)]
    data = {"samples": S.M, "acceptance": S.header["acceptance"], "autocorrelation": S.header["autocorrelation"],
            "balls": rep.table}
    return _result(6, checks, t0, data=data)


def criterion_7(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p)
    # confinement on the criterion-6 run
    N0, beta0 = cfg.get("N", 64), cfg.get("beta", 2.0)
    S0 = gas_samples(N0, beta0, 2, cfg.get("samples", 20000), cfg.get("seed", 6), threads=cfg.get("threads", 1))
    conf = confinement_profile(S0, eq, GasParams(N0, beta0, 2, p))
    # vacuum tail across N
    beta = cfg.get("tailBeta", 1.0)
    gammas = np.array(cfg.get("gammas", list(np.linspace(0.05, 3.0, 60))))
    Cs, rows = {}, []
    for N in cfg.get("Ns", [32, 64, 128]):
        S = gas_samples(N, beta, 2, cfg.get("tailSamples", 8000), cfg.get("seed", 6) + 1000 + N,
                        threads=cfg.get("threads", 1))
        vt = vacuum_tail(S, eq, GasParams(N, beta, 2, p), gammas)
        Cs[N] = vt.summary["fitted_C"]
        rows.append({"N": N, "beta": beta, "samples": S.M, "fitted_C": Cs[N]})
    spread = max(Cs.values()) / min(Cs.values()) if min(Cs.values()) > 0 else float("inf")
    ratio = conf.summary["ratio"]
    checks = [_check("exterior_sup_over_interior_max", ratio, 3.0, ratio <= 3.0),
              _check("vacuum_tail_C_spread", spread, 3.0, spread <= 3.0)]
    return _result(7, checks, t0, data={"fitted_C": rows, "confinement": conf.summary})


def criterion_8(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    N, beta = cfg.get("N", 128), 2.0
    S = gas_samples(N, beta, 2, cfg.get("samples", 8000), cfg.get("seed", 6) + N, threads=cfg.get("threads", 1))
    rep = extreme_radius(S, beta=beta)
    mx = rep.summary["maxima"]
    chains = cfg.get("chains", 4)
    taus = [integrated_autocorr_time(c) for c in np.array_split(mx, chains)]
    ess = float(S.M / max(taus))
    center = rider_center(N)
    gap = abs(rep.summary["mean"] - center)
    exact = kostlan_max_mean(N)
    checks = [_check("effective_samples", ess, 2000, ess >= 2000),
              _check("mean_max_minus_rider_center", gap, 0.5, bool(gap <= 0.5)),
              _check("exceedance_below_fitted_bound", rep.summary["below_bound"], True, rep.summary["below_bound"])]
    notes = [f"log N - 2 log log N - log 2 pi = {math.log(N) - 2 * math.log(math.log(N)) - math.log(2 * math.pi):.4f} "
             "at this N, so the centering value is undefined",
             f"exact finite-N mean from independent Gamma moduli: {exact:.4f}"]
    data = {"mean": rep.summary["mean"], "se_mean": rep.summary["se_mean"], "rider_center": center,
            "exact_mean": exact, "mean_minus_exact": rep.summary["mean"] - exact, "fitted_C": rep.summary["fitted_C"],
            "taus": taus}
    return _result(8, checks, t0, notes, data)


def criterion_9(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    N, beta = cfg.get("N", 256), cfg.get("beta", 0.02)
    p = Quadratic(0.5, 2)
    eq = solve_equilibrium(p)
    M = cfg.get("samples", 8000)
    S = gas_samples(N, beta, 2, M, cfg.get("seed", 9), thin=cfg.get("thin", 16), burn_in=cfg.get("burnIn", 2000),
                    threads=cfg.get("threads", 1))
    wins = bulk_windows(eq, N)
    rep = poisson_tests(S, wins)
    half = cfg.get("syntheticHalfWidth", 14.0)
    ctrl_wins = [w for w in wins if np.all(np.abs(w[0]) <= half - 2) and np.all(np.abs(w[1]) <= half - 2)]
    ctrl = poisson_tests(synthetic_poisson_sampleset(N, M, half, 2, seed=cfg.get("seed", 9)), ctrl_wins)
    checks = []
    for tag, r in (("gas", rep), ("synthetic", ctrl)):
        s = r.summary
        checks += [
            _check(f"{tag}_dispersion_min", s["dispersion_min"], 0.85, s["dispersion_min"] >= 0.85),
            _check(f"{tag}_dispersion_max", s["dispersion_max"], 1.15, s["dispersion_max"] <= 1.15),
            _check(f"{tag}_tv_max", s["tv_max"], 0.1, s["tv_max"] < 0.1),
            _check(f"{tag}_rho1_flatness", s["rho1_flatness"], 1.2, s["rho1_flatness"] < 1.2),
        ]
    # informational: how much of the rho_1 spread is the macroscopic thermal profile at this N
    s = N ** 0.5
    th = solve_thermal_equilibrium(p, theta=GasParams(N, beta, 2, p).theta, eq=eq)
    centres = np.array([(lo + hi) / 2 for lo, hi in wins]) / s
    prof = th.density1(centres)
    r1 = np.array([r["rho1"] for r in rep.table])
    normalized = r1 / prof
    profile = {"thermal_profile_flatness": float(prof.max() / prof.min()),
               "profile_normalized_flatness": float(normalized.max() / normalized.min())}
    notes = ["finite-N evidence for the high-temperature limit, not a verification",
             f"thermal density varies by {profile['thermal_profile_flatness']:.3f} across the bulk windows"]
    return _result(9, checks, t0, notes, {"windows": len(wins), "gas": rep.summary, "synthetic": ctrl.summary,
                                          "profile": profile})


def squeeze_n3_symbolic(x2, x3, a=0.5):
    """Err for N=3, d=3, V_1 = a |x|^2 from a symbolic expansion of the shell averages.

    Particle 0 is the one replaced; x2, x3 are the others. When both shells lie
    in the droplet, zeta vanishes on them and h^{mu} = const - a |x|^2, so
    Err = (1/2) [1/|x2 - x3| + sum_i A(eta_i) + a sum_i B(eta_i)] with A, B the
    averages of 1/|y| and |y|^2 over the shell eta/2 < |y| < eta.
    """
    import sympy as sp

    r, eta = sp.symbols("r eta", positive=True)
    vol = sp.integrate(r**2, (r, eta / 2, eta))
    A = sp.simplify(sp.integrate(r, (r, eta / 2, eta)) / vol)
    B = sp.simplify(sp.integrate(r**4, (r, eta / 2, eta)) / vol)
    dist = float(np.linalg.norm(np.asarray(x2, dtype=float) - np.asarray(x3, dtype=float)))
    e = sp.Float(0.25 * min(1.0, dist), 30)
    val = (1 / sp.Float(dist, 30) + 2 * A.subs(eta, e) + 2 * a * B.subs(eta, e)) / 2
    return float(val), (A, B)


def criterion_10(cfg=None):
    cfg = cfg or {}
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.get("seed", 10))
    p = Quadratic(0.5, 3)
    eq = solve_equilibrium(p)
    checks, data = [], {}
    for N in cfg.get("Ns", [8, 16]):
        Cs, sides = [], []
        for X in _random_configs(eq, N, cfg.get("configs", 100), rng, noise=0.5):
            r = check_squeeze(X, eq)
            Cs.append(r["implied_C"])
        for X in _random_configs(eq, N, 3, rng, noise=0.5):
            lhs, rhs = squeeze_sides(X, eq)
            sides.append(abs((lhs - rhs) - check_squeeze(X, eq)["Err"]))
        Cs = np.array(Cs)
        ratio = float(np.max(Cs) / np.median(Cs))
        data[str(N)] = {"implied_C_max": float(Cs.max()), "implied_C_median": float(np.median(Cs)),
                        "implied_C_min": float(Cs.min()), "direct_vs_algebra_max": max(sides)}
        checks.append(_check(f"implied_C_max_over_median_N{N}", ratio, 20.0, bool(np.all(np.isfinite(Cs))) and ratio < 20))
    # N=3 against the symbolic expansion: particle 0 far away, particles 1, 2 inside the droplet
    x2 = np.array([0.3, -0.2, 0.1])
    x3 = np.array([-0.25, 0.35, -0.1])
    X = np.array([[5.0, 5.0, 5.0], x2, x3])
    sym, _ = squeeze_n3_symbolic(x2, x3)
    num = check_squeeze(X, eq)["Err"]
    checks.append(_check("N3_symbolic_difference", abs(sym - num), 1e-6, abs(sym - num) < 1e-6))
    data["N3"] = {"symbolic": sym, "numeric": num}
    return _result(10, checks, t0, data=data)


RUNNERS = {k: globals()[f"criterion_{k}"] for k in CRITERIA}


def run_criteria(ids=None, cfg=None):
    cfg = cfg or {}
    out = []
    for k in ids or sorted(RUNNERS):
        out.append(RUNNERS[k](cfg.get(str(k), {})))
    return out
