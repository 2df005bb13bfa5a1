"""Observables from SampleSets: counts, one- and two-point densities,
subharmonicity and confinement diagnostics, extreme radii, vacuum tails,
far-field occupancy and Poisson tests.

Standard errors use batch means over consecutive samples, so moderate
autocorrelation in an MCMC SampleSet is accounted for. Every function is a
deterministic function of its inputs.
"""

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq
from sklearn.base import BaseEstimator

from .equilibrium import GridSpec, zeta_eval
from .errors import GeometryError
from .kernel.core import BALL_VOLUME, SPHERE_AREA, kernel_radial
from .kernel.green import harmonic_measure_nodes


def _n_batches(M, requested=None):
    return int(min(requested or 50, M))


def _batches(M, nb):
    return np.array_split(np.arange(M), nb)


def _batch_se(per_batch_means):
    """Standard error of the grand mean from (nb, ...) batch means."""
    nb = per_batch_means.shape[0]
    if nb < 2:
        return np.zeros(per_batch_means.shape[1:])
    return per_batch_means.std(axis=0, ddof=1) / math.sqrt(nb)


@dataclass
class Report:
    """Summary dictionary plus a flat table (one row per bin/window/gamma)."""

    kind: str
    summary: dict
    table: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(self.summary.get("passed", True))

    def to_dict(self):
        return {"kind": self.kind, "summary": _jsonable(self.summary), "table": _jsonable(self.table)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        if self.table:
            keys = list(self.table[0].keys())
            w = csv.DictWriter(buf, fieldnames=keys)
            w.writeheader()
            for row in self.table:
                w.writerow({k: _jsonable(row.get(k)) for k in keys})
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# ----------------------------------------------------------------------------
# counts


@dataclass
class CountStatistics:
    center: np.ndarray
    radius: float
    counts: np.ndarray
    mean: float
    variance: float
    dispersion: float
    se_mean: float
    gammas: list
    mgf: list
    mgf_se: list

    def to_dict(self):
        return _jsonable({k: getattr(self, k) for k in ("center", "radius", "mean", "variance", "dispersion",
                                                         "se_mean", "gammas", "mgf", "mgf_se")})


def _counts_in_ball(X, center, r):
    return np.sum(np.sum((X - center) ** 2, axis=-1) <= r * r, axis=1)


def count_in_ball(samples, center, r, gammas=(), n_batches=None):
    """Per-sample counts in B_r(center), summary statistics and the empirical
    MGF E[exp(gamma X(B_r))] with batch-jackknife standard errors."""
    if not r > 0:
        raise ValueError("r must be positive")
    X = samples.positions
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size != X.shape[2]:
        raise ValueError("center dimension does not match samples")
    n = _counts_in_ball(X, center, r)
    M = n.size
    nb = _n_batches(M, n_batches)
    idx = _batches(M, nb)
    bm = np.array([n[i].mean() for i in idx])
    mean = float(n.mean())
    var = float(n.var(ddof=1)) if M > 1 else 0.0
    mgf, mgf_se = [], []
    for g in gammas:
        if g == 0:
            mgf.append(1.0)
            mgf_se.append(0.0)
            continue
        e = np.exp(g * n.astype(float))
        sums = np.array([e[i].sum() for i in idx])
        sizes = np.array([len(i) for i in idx])
        # leave-one-batch-out jackknife
        loo = (sums.sum() - sums) / (sizes.sum() - sizes) if nb > 1 else sums / sizes
        mgf.append(float(e.mean()))
        mgf_se.append(float(math.sqrt((nb - 1) / nb * np.sum((loo - loo.mean()) ** 2))) if nb > 1 else 0.0)
    return CountStatistics(
        center=center, radius=float(r), counts=n, mean=mean, variance=var,
        dispersion=var / mean if mean > 0 else float("nan"),
        se_mean=float(_batch_se(bm[:, None])[0]), gammas=list(gammas), mgf=mgf, mgf_se=mgf_se,
    )


# ----------------------------------------------------------------------------
# one- and two-point densities


@dataclass
class DensityEstimate:
    """Histogram density on cubic bins of side h starting at ``origin``."""

    origin: np.ndarray
    h: float
    values: np.ndarray
    se: np.ndarray
    samples: int
    N: int
    leakage: float

    @property
    def dim(self):
        return self.values.ndim

    @property
    def bin_volume(self):
        return self.h**self.dim

    @property
    def integral(self):
        return float(self.values.sum() * self.bin_volume)

    def axes(self):
        return [self.origin[k] + self.h * (np.arange(n) + 0.5) for k, n in enumerate(self.values.shape)]

    def centers(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _interp(self, field_, X):
        f = RegularGridInterpolator(self.axes(), field_, method="linear", bounds_error=False, fill_value=None)
        X = np.atleast_2d(X)
        out = f(X)
        lo = self.origin
        hi = self.origin + self.h * np.array(self.values.shape)
        inside = np.all((X >= lo) & (X <= hi), axis=1)
        return np.where(inside, np.maximum(out, 0.0), 0.0)

    def interpolate(self, X):
        """Bilinear (trilinear) interpolation of the density; 0 outside the grid."""
        return self._interp(self.values, X)

    def interpolate_se(self, X):
        return self._interp(self.se, X)

    def ball_integral(self, center, r, sub=8):
        """int_{B_r(center)} rho_hat with bins split into sub^d subcells."""
        d = self.dim
        off = (np.arange(sub) + 0.5) / sub - 0.5
        sm = np.stack([m.ravel() for m in np.meshgrid(*([off] * d), indexing="ij")], axis=1) * self.h
        C = self.centers()
        frac = np.zeros(C.shape[0])
        near = np.linalg.norm(C - center, axis=1) <= r + self.h * math.sqrt(d)
        for s in sm:
            frac[near] += np.sum((C[near] + s - center) ** 2, axis=1) <= r * r
        frac /= sm.shape[0]
        v = self.values.ravel()
        e = self.se.ravel()
        return float(np.sum(frac * v) * self.bin_volume), float(np.sum(frac * e) * self.bin_volume)

    def to_table(self):
        C = self.centers()
        return [dict({f"x{k}": C[j, k] for k in range(self.dim)}, rho=float(v), se=float(s))
                for j, (v, s) in enumerate(zip(self.values.ravel(), self.se.ravel()))]


def _bin_grid(samples, grid):
    d = samples.dim
    if grid is None:
        grid = GridSpec(0.5, None)
    h = grid.h or 0.5
    if grid.extent is None:
        ext = float(np.max(np.abs(samples.positions))) + h
    else:
        ext = float(grid.extent)
    n = int(math.ceil(2 * ext / h))
    origin = -0.5 * n * h * np.ones(d)
    return origin, h, n


def estimate_rho1(samples, grid=None, n_batches=None, se_floor=True):
    """Histogram estimate of rho_1 with per-bin batch-means standard errors.

    ``grid`` is a GridSpec: bins of side ``h`` (default 0.5) covering
    [-extent, extent]^d (default: the bounding box of the samples). With
    ``se_floor`` each bin's SE is at least that of one count, so bins with no
    observations are not treated as exactly known.
    """
    X = samples.positions
    M, N, d = X.shape
    origin, h, n = _bin_grid(samples, grid)
    edges = [origin[k] + h * np.arange(n + 1) for k in range(d)]
    nb = _n_batches(M, n_batches)
    vol = h**d
    bmeans = []
    total = np.zeros((n,) * d)
    for idx in _batches(M, nb):
        H, _ = np.histogramdd(X[idx].reshape(-1, d), bins=edges)
        total += H
        bmeans.append(H / (len(idx) * vol))
    bmeans = np.array(bmeans)
    values = total / (M * vol)
    se = _batch_se(bmeans)
    if se_floor:
        se = np.maximum(se, np.sqrt(np.maximum(total, 1.0)) / (M * vol))
    leak = 1.0 - total.sum() / (M * N)
    if leak > 0.01:
        warnings.warn(f"rho1 grid misses {leak:.2%} of the particles", stacklevel=2)
    return DensityEstimate(origin, h, values, se, M, N, float(leak))


def estimate_rho2(samples, centers, radial_bins, eps=0.5, n_batches=None):
    """Radially averaged rho_2(x, x + s e) near the given centers.

    Ordered pairs (x_i, x_j) with x_i in B_eps(center) and |x_j - x_i| in a
    radial bin are counted and divided by M |B_eps| |shell|. Returns a Report
    with one row per (center, bin).
    """
    X = samples.positions
    M, N, d = X.shape
    edges = np.asarray(radial_bins, dtype=float)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    nb = _n_batches(M, n_batches)
    shell = SPHERE_AREA[d] * np.diff(edges**d) / d
    ball = BALL_VOLUME[d] * eps**d
    rows = []
    for ci, c in enumerate(centers):
        bm = []
        tot = np.zeros(edges.size - 1)
        for idx in _batches(M, nb):
            cnt = np.zeros(edges.size - 1)
            for m in idx:
                P = X[m]
                sel = np.nonzero(np.sum((P - c) ** 2, axis=1) <= eps * eps)[0]
                for i in sel:
                    r = np.linalg.norm(P - P[i], axis=1)
                    r = np.delete(r, i)
                    cnt += np.histogram(r, bins=edges)[0]
            tot += cnt
            bm.append(cnt / (len(idx) * ball * shell))
        bm = np.array(bm)
        val = tot / (M * ball * shell)
        se = np.maximum(_batch_se(bm), np.sqrt(np.maximum(tot, 1.0)) / (M * ball * shell))
        for k in range(edges.size - 1):
            rows.append({"center": ci, "s_lo": edges[k], "s_hi": edges[k + 1], "s_mid": 0.5 * (edges[k] + edges[k + 1]),
                         "rho2": float(val[k]), "se": float(se[k]), "pairs": int(tot[k])})
    return Report("rho2", {"eps": eps, "centers": centers, "samples": M}, rows)


def binomial_comparison(samples, y, s_values, r, beta, laplacian_max, k=2):
    """E[C(X(B_s), k)] against its comparison with E[C(X(B_r), k)].

    For each s the smallest C with
    E[C(X(B_s),k)] <= C^k exp(-beta C(k,2)(g(2s) - g(r/2)) + C beta k r^2 M) (s/r)^{dk} E[C(X(B_r),k)]
    is reported (the fitted C); M is the caller's bound on max(Delta V, 0) near y.
    """
    X = samples.positions
    d = X.shape[2]
    y = np.asarray(y, dtype=float)
    nr = _counts_in_ball(X, y, r)
    big = float(np.mean([math.comb(int(v), k) for v in nr]))
    rows = []
    for s in s_values:
        if not 4 * s <= r:
            raise ValueError("the comparison needs 4s <= r")
        ns = _counts_in_ball(X, y, s)
        small = float(np.mean([math.comb(int(v), k) for v in ns]))
        rep = beta * math.comb(k, 2) * (kernel_radial(2 * s, d) - kernel_radial(r / 2, d))

        def rhs(C):
            return C**k * math.exp(-rep + C * beta * k * r * r * laplacian_max) * (s / r) ** (d * k) * big

        if small == 0:
            C = 0.0
        elif big == 0:
            C = float("inf")
        else:
            C = brentq(lambda c: rhs(c) - small, 0.0, 1e6) if rhs(1e6) > small else float("inf")
        rows.append({"s": s, "r": r, "lhs": small, "rhs_binomial_r": big, "fitted_C": C})
    return Report("binomial_comparison", {"y": y, "k": k, "fitted_C_max": max(r_["fitted_C"] for r_ in rows)}, rows)


# ----------------------------------------------------------------------------
# subharmonicity and confinement


def _zeta_micro(eq, params, X):
    return zeta_eval(eq, params.N, X)


def subharmonicity_test(rho1, eq, params, circles, n_nodes=256, nsigma=3.0):
    """Mean-value test of u = exp(beta zeta) rho_1 on balls outside the droplet.

    Subharmonicity means u(center) <= average of u over the sphere. A ball is
    a violation if u(center) - average exceeds ``nsigma`` combined standard
    errors. Coordinates are microscopic.
    """
    d = rho1.dim
    if d != params.dim or d != eq.dim:
        raise ValueError("dimension mismatch between rho1, params and equilibrium")
    rows = []
    worst = -np.inf
    for c, R in circles:
        c = np.asarray(c, dtype=float).reshape(d)
        if R < 2 * rho1.h:
            raise ValueError(f"test radius {R} is below two bin widths ({2 * rho1.h})")
        dist = float(eq.distance_to_droplet_N(params.N, c[None])[0])
        if dist < R:
            raise GeometryError(f"ball at {c.tolist()} with radius {R} meets the droplet (distance {dist:.3g})")
        nodes, w = harmonic_measure_nodes(c, R, d, n_nodes)
        bz = params.beta * _zeta_micro(eq, params, np.vstack([c[None], nodes]))
        rho = rho1.interpolate(np.vstack([c[None], nodes]))
        se = rho1.interpolate_se(np.vstack([c[None], nodes]))
        u = np.exp(bz) * rho
        use = np.exp(bz) * se
        avg = float(np.dot(w, u[1:]))
        se_avg = float(np.dot(w, use[1:]))
        se_tot = math.hypot(use[0], se_avg)
        z = (u[0] - avg) / se_tot if se_tot > 0 else (0.0 if u[0] <= avg else np.inf)
        worst = max(worst, z)
        rows.append({"center": c.tolist(), "radius": R, "u_center": float(u[0]), "u_average": avg,
                     "se": se_tot, "excess_in_se": float(z), "violation": bool(z > nsigma)})
    summary = {"balls": len(rows), "max_excess_in_se": float(worst), "nsigma": nsigma,
               "violations": int(sum(r["violation"] for r in rows))}
    summary["passed"] = summary["violations"] == 0
    return Report("subharmonicity", summary, rows)


def field_mean_value_test(u, center, radius, dim, n_nodes=256):
    """u(center) minus the harmonic-measure average of a callable field u."""
    nodes, w = harmonic_measure_nodes(np.asarray(center, dtype=float), radius, dim, n_nodes)
    return float(u(np.asarray(center, dtype=float)[None])[0] - np.dot(w, u(nodes)))


def confinement_profile(samples, eq, params, shell_width=0.5, min_count=20, center=None):
    """Shell averages of q = rho_1 exp(beta zeta) outside the droplet.

    q on a shell is estimated by sum_i exp(beta zeta(x_i)) / (M |shell|) over
    the particles in that shell, so the steep variation of zeta across a
    shell does not bias it. Shells with fewer than ``min_count`` particles are
    listed but marked unresolved and excluded from the supremum. The ratio of
    the supremum to the largest in-droplet bin density gives the implied C.
    """
    X = samples.positions
    M, N, d = X.shape
    if d != params.dim:
        raise ValueError("dimension mismatch")
    c0 = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    P = X.reshape(-1, d)
    r = np.linalg.norm(P - c0, axis=1)
    w = np.exp(params.beta * _zeta_micro(eq, params, P))
    edges = np.arange(0.0, r.max() + shell_width, shell_width)
    k = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, edges.size - 2)
    vol = SPHERE_AREA[d] * np.diff(edges**d) / d
    qsum = np.bincount(k, weights=w, minlength=edges.size - 1)
    cnt = np.bincount(k, minlength=edges.size - 1)
    q = qsum / (M * vol)
    rho = cnt / (M * vol)
    mid = 0.5 * (edges[1:] + edges[:-1])
    Y = np.zeros((mid.size, d))
    Y[:, 0] = mid
    lo = np.zeros((mid.size, d))
    lo[:, 0] = edges[:-1]
    outside = eq.distance_to_droplet_N(N, lo) > 0
    inside = ~outside
    rho1 = estimate_rho1(samples)
    in_mask = eq.in_droplet(rho1.centers() / N ** (1.0 / d)).reshape(rho1.values.shape)
    max_in = float(np.max(rho1.values[in_mask])) if np.any(in_mask) else float("nan")
    resolved = outside & (cnt >= min_count)
    sup_out = float(np.max(q[resolved])) if np.any(resolved) else float("nan")
    rows = [{"r_lo": edges[j], "r_hi": edges[j + 1], "count": int(cnt[j]), "rho_shell": float(rho[j]),
             "q": float(q[j]), "outside": bool(outside[j]), "resolved": bool(cnt[j] >= min_count)}
            for j in range(mid.size)]
    ratio = sup_out / max_in
    summary = {"sup_out_q": sup_out, "max_in_rho1": max_in, "ratio": ratio, "implied_C": ratio,
               "inside_q_equals_rho": bool(np.allclose(q[inside & (cnt > 0)], rho[inside & (cnt > 0)], rtol=0.25)),
               "unresolved_outside_shells": int(np.sum(outside & (cnt < min_count)))}
    return Report("confinement_profile", summary, rows)


# ----------------------------------------------------------------------------
# extremes and tails


def rider_center(N):
    """sqrt(N) + sqrt(log N - 2 log log N - log 2 pi)/2 (nan when the root is negative)."""
    L = math.log(N) - 2 * math.log(math.log(N)) - math.log(2 * math.pi)
    return math.sqrt(N) + (0.5 * math.sqrt(L) if L >= 0 else float("nan"))


def extreme_radius(samples, beta=None, ts=None, center=None):
    """Per-sample max_i |x_i| with quantiles and the exceedance curve
    P(max >= sqrt N + sqrt((log N - log log N + 2t) / (2 beta))) against t.
    The fitted C is max_t P e^t over t with a nonzero exceedance."""
    X = samples.positions
    M, N, d = X.shape
    c0 = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    mx = np.max(np.linalg.norm(X - c0, axis=2), axis=1)
    summary = {"N": N, "samples": M, "mean": float(mx.mean()),
               "quantiles": {str(q): float(np.quantile(mx, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)}}
    nb = _n_batches(M)
    summary["se_mean"] = float(_batch_se(np.array([mx[i].mean() for i in _batches(M, nb)])[:, None])[0])
    rows = []
    if beta is not None and N > 2:
        if ts is None:
            ts = np.linspace(-1.0, math.log(N), 25)
        L0 = math.log(N) - math.log(math.log(N))
        Cfit = 0.0
        for t in ts:
            arg = L0 + 2 * t
            s = math.sqrt(N) + (math.sqrt(arg / (2 * beta)) if arg > 0 else 0.0)
            P = float(np.mean(mx >= s))
            rows.append({"t": float(t), "threshold": s, "exceedance": P})
            Cfit = max(Cfit, P * math.exp(t))
        for row in rows:
            row["bound"] = min(1.0, Cfit * math.exp(-row["t"]))
        summary["fitted_C"] = Cfit
        summary["rider_center"] = rider_center(N)
        summary["below_bound"] = all(r["exceedance"] <= r["bound"] + 1e-12 for r in rows)
    summary["maxima"] = mx
    return Report("extreme_radius", summary, rows)


def _zeta_integral(eq, params, gammas, weight=None, n=4000):
    """int_{zeta_N >= gamma} weight(x) exp(-beta zeta_N(x)) dx over microscopic space, per gamma."""
    N, d, beta = params.N, params.dim, params.beta
    s = N ** (1.0 / d)
    if eq.potential.radial:
        rmax = min(eq.potential.max_radius(), 50.0) * s
        # split at the droplet scale to resolve the steep exterior decay
        r = np.concatenate([np.linspace(0, 2 * s, n), np.geomspace(2 * s, max(rmax, 2 * s * 1.0001), n)[1:]])
        X = np.zeros((r.size, d))
        X[:, 0] = r
        z = zeta_eval(eq, N, X)
        f = np.exp(-beta * z) * SPHERE_AREA[d] * r ** (d - 1)
        if weight is not None:
            f = f * weight(X)
        out = []
        for g in gammas:
            out.append(float(np.trapezoid(np.where(z >= g, f, 0.0), r)))
        return np.array(out)
    L = eq.grid.extent if eq.grid is not None and eq.grid.extent else 3.0
    m = 600
    ax = np.linspace(-L, L, m) * s
    G = np.stack([a.ravel() for a in np.meshgrid(ax, ax, indexing="ij")], axis=1)
    z = zeta_eval(eq, N, G)
    f = np.exp(-beta * z) * (ax[1] - ax[0]) ** 2
    if weight is not None:
        f = f * weight(G)
    return np.array([float(np.sum(np.where(z >= g, f, 0.0))) for g in gammas])


def vacuum_tail(samples, eq, params, gammas, min_events=5):
    """Empirical P(max_i zeta_N(x_i) >= gamma) against int_{zeta>=gamma} exp(-beta zeta).

    C is fitted as max over gammas with at least ``min_events`` exceedances of
    (P / integral)^{1/(1+beta)}. The distance version reports
    P(max_i dist(x_i, Sigma) >= gamma sqrt(log N / beta)) for the same gammas.
    """
    X = samples.positions
    M, N, d = X.shape
    z = zeta_eval(eq, N, X.reshape(-1, d)).reshape(M, N)
    zmax = z.max(axis=1)
    dist = eq.distance_to_droplet_N(N, X.reshape(-1, d)).reshape(M, N).max(axis=1)
    I = _zeta_integral(eq, params, gammas)
    rows = []
    Cfit = 0.0
    scale = math.sqrt(math.log(N) / params.beta) if N > 1 else 1.0
    for g, Ig in zip(gammas, I):
        k = int(np.sum(zmax >= g))
        P = k / M
        # one-sided 95% upper limit when nothing is observed
        if k == 0:
            upper = 1 - 0.05 ** (1 / M)
        elif k == M:
            upper = 1.0
        else:
            upper = float(stats.beta.ppf(0.975, k + 1, M - k))
        ratio = P / Ig if Ig > 0 else float("inf") if P > 0 else 0.0
        if k >= min_events and Ig > 0:
            Cfit = max(Cfit, ratio ** (1.0 / (1.0 + params.beta)))
        rows.append({"gamma": float(g), "events": k, "probability": P, "upper95": upper, "integral": float(Ig),
                     "dist_probability": float(np.mean(dist >= g * scale))})
    for r in rows:
        r["bound"] = Cfit ** (1 + params.beta) * r["integral"]
    return Report("vacuum_tail", {"fitted_C": Cfit, "N": N, "beta": params.beta, "samples": M}, rows)


def farfield_conditional_check(samples, eq, params, region, n_sub=4):
    """Per-particle occupancy of an annulus far outside the droplet against
    N^{-1} exp(C beta N) int e^{-beta log|y| - beta zeta(y)} dy (d=2) or
    N^{-1} exp(C beta N^{2/d}) int e^{-beta zeta(y)} dy (d=3).

    C is fitted per sub-annulus (the largest implied value); the bound with
    that C is then checked on the whole annulus.
    """
    X = samples.positions
    M, N, d = X.shape
    r0, r1 = map(float, region)
    if not r1 > r0 > 0:
        raise ValueError("annulus radii must satisfy 0 < r0 < r1")
    probe = np.zeros((1, d))
    probe[0, 0] = r0
    if eq.distance_to_droplet_N(N, probe)[0] <= 0 or np.any(eq.in_droplet(np.linspace(r0, r1, 32)[:, None]
                                                                            * np.eye(d)[0] / N ** (1 / d))):
        raise GeometryError("region must lie outside the droplet")
    beta = params.beta
    expo = beta * N if d == 2 else beta * N ** (2.0 / d)
    r = np.linalg.norm(X.reshape(-1, d), axis=1)
    edges = np.linspace(r0, r1, n_sub + 1)

    def integral(a, b):
        rr = np.linspace(a, b, 2001)
        Y = np.zeros((rr.size, d))
        Y[:, 0] = rr
        z = zeta_eval(eq, N, Y)
        f = np.exp(-beta * z) * SPHERE_AREA[d] * rr ** (d - 1)
        if d == 2:
            f = f * np.exp(-beta * np.log(rr))
        return float(np.trapezoid(f, rr))

    rows = []
    Cfit = -np.inf
    for a, b in zip(edges[:-1], edges[1:]):
        occ = float(np.sum((r >= a) & (r < b))) / (M * N)
        Ii = integral(a, b)
        if occ > 0 and Ii > 0:
            Cfit = max(Cfit, math.log(N * occ / Ii) / expo)
        rows.append({"r_lo": a, "r_hi": b, "occupancy": occ, "integral": Ii})
    Cfit = max(Cfit, 0.0) if np.isfinite(Cfit) else 0.0
    occ_all = float(np.sum((r >= r0) & (r < r1))) / (M * N)
    I_all = integral(r0, r1)
    bound = math.exp(Cfit * expo) * I_all / N
    summary = {"occupancy": occ_all, "integral": I_all, "fitted_C": Cfit, "bound": bound,
               "passed": bool(occ_all <= bound * (1 + 1e-12))}
    return Report("farfield", summary, rows)


# ----------------------------------------------------------------------------
# Poisson tests


def bulk_windows(eq, N, dim=2, side=1.0, margin_diameters=2.0):
    """Unit boxes inside the rescaled droplet, at least ``margin_diameters``
    window diameters from its edge (tiling a centered lattice)."""
    diam = side * math.sqrt(dim)
    s = N ** (1.0 / dim)
    R = eq.droplet_radius_estimate() * s
    k = int(R // side) + 1
    ax = (np.arange(-k, k) + 0.5) * side
    wins = []
    for cx in ax:
        for cy in ax:
            c = np.array([cx, cy])
            corners = c + 0.5 * side * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
            if np.all(eq.in_droplet(corners / s)):
                # distance of the window to the droplet complement
                if np.linalg.norm(c) + 0.5 * diam + margin_diameters * diam <= R:
                    wins.append((c - 0.5 * side, c + 0.5 * side))
    return wins


def _box_counts(X, lo, hi):
    return np.sum(np.all((X >= lo) & (X < hi), axis=2), axis=1)


def poisson_tests(samples, windows, n_batches=None):
    """Dispersion index, total variation to the fitted Poisson law, and
    flatness of rho_1 and rho_2 across windows.

    Finite-N evidence only: a Poisson fit per window, with heterogeneity of
    the fitted intensities across windows reported as the flatness ratio.
    """
    X = samples.positions
    M = X.shape[0]
    nb = _n_batches(M, n_batches)
    rows = []
    for lo, hi in windows:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        vol = float(np.prod(hi - lo))
        n = _box_counts(X, lo, hi)
        mean = float(n.mean())
        var = float(n.var(ddof=1))
        disp = var / mean if mean > 0 else float("nan")
        bd = []
        for idx in _batches(M, nb):
            nn = n[idx]
            m_ = nn.mean()
            bd.append(nn.var(ddof=1) / m_ if m_ > 0 and len(nn) > 1 else np.nan)
        bd = np.array(bd)
        se = float(np.nanstd(bd, ddof=1) / math.sqrt(np.sum(np.isfinite(bd)))) if np.sum(np.isfinite(bd)) > 1 else float("nan")
        kmax = int(n.max())
        emp = np.bincount(n, minlength=kmax + 1) / M
        pk = stats.poisson.pmf(np.arange(kmax + 1), mean)
        tv = 0.5 * (np.sum(np.abs(emp - pk)) + stats.poisson.sf(kmax, mean))
        rows.append({"lo": lo.tolist(), "hi": hi.tolist(), "mean": mean, "variance": var, "dispersion": disp,
                     "dispersion_se": se, "tv_poisson": float(tv), "rho1": mean / vol,
                     "rho2": float(np.mean(n * (n - 1.0))) / vol**2})
    r1 = np.array([r["rho1"] for r in rows])
    r2 = np.array([r["rho2"] for r in rows])
    summary = {
        "windows": len(rows),
        "dispersion_min": float(min(r["dispersion"] for r in rows)),
        "dispersion_max": float(max(r["dispersion"] for r in rows)),
        "dispersion_mean": float(np.mean([r["dispersion"] for r in rows])),
        "tv_max": float(max(r["tv_poisson"] for r in rows)),
        "rho1_flatness": float(r1.max() / r1.min()) if r1.min() > 0 else float("inf"),
        "rho2_flatness": float(r2.max() / r2.min()) if r2.min() > 0 else float("inf"),
        "note": "finite-N evidence for a mixed Poisson limit, not a verification",
    }
    return Report("poisson", summary, rows)


def synthetic_poisson_sampleset(N, M, half_width, dim=2, seed=0):
    """N i.i.d. uniform points in a cube: window counts are Binomial(N, |W|/|box|),
    which is Poisson to within the factor 1 - |W|/|box| in the variance."""
    from .sampler import SampleSet

    rng = np.random.default_rng(seed)
    X = rng.uniform(-half_width, half_width, size=(M, N, dim))
    return SampleSet(X, {"kind": "synthetic-poisson", "seed": seed, "samples": M})


class OnePointDensity(BaseEstimator):
    """Estimator wrapper: ``fit(samples)`` builds rho_1; ``predict(X)`` interpolates it."""

    def __init__(self, h=0.5, extent=None):
        self.h = h
        self.extent = extent

    def fit(self, samples, y=None):
        self.density_ = estimate_rho1(samples, GridSpec(self.h, self.extent))
        return self

    def predict(self, X):
        return self.density_.interpolate(X)
