"""Deterministic small-N verification: quadrature one-point functions, the
splitting identities, isotropic averaging, mean-value and k-point comparison
inequalities, the squeezing bound, and an exact Ginibre reference.

Quadrature one-point functions integrate out the free particles with polar
coordinates centred on a singular point: the radial factor s^{d-1} |s|^beta
(d=2) is absorbed into a Gauss-Jacobi weight, so the kernel singularity costs
no accuracy. Self-convergence under doubling of all node counts is checked
and GridTooCoarse raised above 1e-4 relative change.
"""

import math

import numba
import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline, RegularGridInterpolator
from scipy.special import gammainc, roots_jacobi, sph_harm_y

from .equilibrium import GridSpec, RadialMeasure, zeta_eval
from .errors import DegenerateConfig, GeometryError, GridTooCoarse, OutOfDomain, Unsupported
from .estimators import DensityEstimate, Report
from .kernel.core import (
    BALL_VOLUME,
    SPHERE_AREA,
    Configuration,
    as_configuration,
    fundamental_constant,
    kernel_radial,
    pair_energy,
    total_energy,
)
from .kernel.green import (
    dirichlet_potential_charges,
    dirichlet_potential_constant,
    dirichlet_potential_measure,
    green_function_ball,
    harmonic_measure_nodes,
    sphere_rule,
)
from .kernel.measures import ZeroMeasure, jellium_energy
from .potential import Quadratic, ScaledPotential, laplacian_bound
from .sampler import _numba_potential, _vn

TAIL_LOG = -math.log(1e-12)
SELF_CONVERGENCE_TOL = 1e-4

# k-point comparison constants from averaging the mean-value bound over
# spheres of radius s in [r/2, r]: 1 / (|B_1| (1 - 2^{-d})), and the torsion
# bound h_{B_s}^{M / c_d} <= M s^2 / (2d).
KPT_VOLUME_CONSTANT = {d: 1.0 / (BALL_VOLUME[d] * (1.0 - 2.0**-d)) for d in (2, 3)}
KPT_LAPLACIAN_CONSTANT = {d: 1.0 / (2.0 * d) for d in (2, 3)}


def _g(r, dim):
    return -np.log(r) if dim == 2 else 1.0 / r


@numba.njit(cache=True, parallel=True)
def _j_kernel(P0, Q, s, ws, U, W, beta, V0, Rcut, kind, fp, ra, va, da, grid):
    """Polar-coordinate Boltzmann integrals around each row of P0 (see QuadratureGas._J_batch).
    Nodes beyond Rcut from the origin carry negligible weight and are skipped."""
    B, d = P0.shape
    out = np.zeros(B)
    for b in numba.prange(B):
        z = np.empty(d)
        acc = 0.0
        for k in range(s.shape[1]):
            sk = s[b, k]
            part = 0.0
            for a in range(U.shape[0]):
                n2 = 0.0
                for t in range(d):
                    z[t] = P0[b, t] + sk * U[a, t]
                    n2 += z[t] * z[t]
                if n2 > Rcut * Rcut:
                    continue
                v = _vn(kind, fp, ra, va, da, grid, z)
                if np.isnan(v):
                    continue
                e = v - V0
                if d == 2:
                    prod = 1.0
                    for q in range(Q.shape[0]):
                        r2 = 0.0
                        for t in range(d):
                            r2 += (z[t] - Q[q, t]) ** 2
                        prod *= r2
                    part += W[a] * np.exp(-beta * e) * prod ** (0.5 * beta)
                else:
                    for q in range(Q.shape[0]):
                        r2 = 0.0
                        for t in range(d):
                            r2 += (z[t] - Q[q, t]) ** 2
                        e += 1.0 / np.sqrt(r2)
                    part += W[a] * np.exp(-beta * (e + 1.0 / sk))
            acc += ws[b, k] * part
        out[b] = acc
    return out


# ----------------------------------------------------------------------------
# quadrature gas


class QuadratureGas:
    """Brute-force Gibbs measure for N <= 3 with deterministic quadrature.

    ``n_radial`` Gauss nodes per radial panel (panels of width <= 1) and
    ``n_angular`` sphere nodes (default 64 in d=2, 512 in d=3). Boltzmann weights are shifted by the minimum
    of V_N so no overflow occurs; the shift cancels in every normalized
    quantity. Supported one-point functions: N=1; N=2 with 0 or 1
    conditioned points; N=3 with 1 or 2 conditioned points.
    """

    def __init__(self, params, n_radial=16, n_angular=None):
        if params.N > 3:
            raise ValueError("QuadratureGas is limited to N <= 3")
        self.params = params
        self.N = params.N
        self.dim = params.dim
        self.beta = params.beta
        self.V = ScaledPotential(params.potential, params.N)
        self.n_radial = int(n_radial)
        self.n_angular = int(n_angular or (64 if self.dim == 2 else 512))
        self._setup()
        self._cache = {}

    def _setup(self):
        d = self.dim
        U, _ = sphere_rule(d, 64)
        r = np.linspace(0.0, 20.0 * self.N ** (1.0 / d) + 20.0, 4001)
        vals = np.array([np.min(self.V(rr * U)) for rr in r[::40]])
        self.V0 = float(np.min(vals))
        # radius beyond which every Boltzmann factor is below 1e-12 of the maximum,
        # with a margin for the growth of the d=2 pair factor |x - y|^beta
        cut = None
        for rr in r[1:]:
            vmin = float(np.min(self.V(rr * U)))
            grow = self.beta * (self.N - 1) * math.log(1.0 + 2.0 * rr) if d == 2 else 0.0
            if self.beta * (vmin - self.V0) - grow >= TAIL_LOG + 2.0:
                cut = rr
                break
        if cut is None:
            raise GridTooCoarse("could not find a cutoff radius with negligible Boltzmann weight")
        self.Rcut = float(cut)

    def with_resolution(self, factor):
        return QuadratureGas(self.params, self.n_radial * factor, self.n_angular * factor)

    # Boltzmann weight exp(-beta (V - V0 + sum_p g(z - p)))
    def _log_weight(self, Z, points):
        lw = -self.beta * (self.V(Z) - self.V0)
        for p in points:
            lw = lw - self.beta * _g(np.linalg.norm(Z - p, axis=1), self.dim)
        return lw

    def _panels(self, p0, others):
        d = self.dim
        alpha = d - 1 + (self.beta if d == 2 else 0.0)
        S = self.Rcut + float(np.linalg.norm(p0))
        a = min(1.0, S)
        for q in others:
            dist = float(np.linalg.norm(np.asarray(q) - p0))
            if dist > 0:
                a = min(a, 0.5 * dist)
        x, w = roots_jacobi(self.n_radial, 0.0, alpha)
        s = [a * (x + 1.0) / 2.0]
        ws = [(a / 2.0) ** (alpha + 1.0) * w]
        xl, wl = np.polynomial.legendre.leggauss(self.n_radial)
        edges = np.linspace(a, S, max(2, int(math.ceil(S - a)) + 1))
        for lo, hi in zip(edges[:-1], edges[1:]):
            sk = lo + (hi - lo) * (xl + 1.0) / 2.0
            s.append(sk)
            ws.append((hi - lo) / 2.0 * wl * sk**alpha)
        return np.concatenate(s), np.concatenate(ws)

    def polar_integral(self, p0, others=(), extra=None):
        """int exp(-beta (V(z) - V0 + g(z - p0) + sum_others g(z - q))) [extra(z)] dz,
        in polar coordinates around p0."""
        d = self.dim
        p0 = np.asarray(p0, dtype=float)
        s, ws = self._panels(p0, others)
        U, W = sphere_rule(d, self.n_angular)
        W = W * SPHERE_AREA[d]
        Z = p0[None, None, :] + s[None, :, None] * U[:, None, :]
        flat = Z.reshape(-1, d)
        lw = self._log_weight(flat, others).reshape(U.shape[0], s.size)
        if d == 3:
            lw = lw - self.beta / s[None, :]
        f = np.exp(lw)
        if extra is not None:
            f = f * extra(flat).reshape(f.shape)
        return float(np.sum(W[:, None] * ws[None, :] * f))

    def _outer_radial(self, func, S):
        """sigma_d int_0^S r^{d-1} func(r) dr with Gauss panels of width <= 1."""
        d = self.dim
        xl, wl = np.polynomial.legendre.leggauss(self.n_radial)
        edges = np.linspace(0.0, S, max(2, int(math.ceil(S)) + 1))
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            r = lo + (hi - lo) * (xl + 1.0) / 2.0
            total += np.sum((hi - lo) / 2.0 * wl * r ** (d - 1) * func(r))
        return SPHERE_AREA[d] * total

    def _single(self, X, fixed):
        """Normalized density of one free particle against fixed charges."""
        Z = self.polar_integral(fixed[0], fixed[1:]) if fixed else self._free_partition()
        return np.exp(self._log_weight(X, fixed)) / Z

    def _free_partition(self):
        if "Z1" not in self._cache:
            if self.params.potential.radial:
                U = np.zeros((1, self.dim))
                U[0, 0] = 1.0
                self._cache["Z1"] = self._outer_radial(
                    lambda r: np.exp(self._log_weight(r[:, None] * U, [])), self.Rcut)
            else:
                self._cache["Z1"] = self._tensor_integral(lambda Z: np.exp(self._log_weight(Z, [])))
        return self._cache["Z1"]

    def _tensor_integral(self, f, n=None):
        d = self.dim
        n = n or 8 * self.n_radial
        ax = np.linspace(-self.Rcut, self.Rcut, n)
        h = ax[1] - ax[0]
        G = np.stack([m.ravel() for m in np.meshgrid(*([ax] * d), indexing="ij")], axis=1)
        return float(np.sum(f(G)) * h**d)

    @property
    def _compiled(self):
        if "compiled" not in self._cache:
            self._cache["compiled"] = _numba_potential(self.params)
        return self._cache["compiled"]

    def _J_batch(self, P0, fixed):
        """J(p; fixed) = int exp(-beta (V(y) - V0 + g(y - p) + sum_fixed g(y - q))) dy for each row p.

        Polar coordinates around each p with a Gauss-Jacobi first panel of
        width min(1, dist(p, fixed) / 2) and a common number of Legendre
        panels (width <= 1) up to |p| + Rcut.
        """
        d = self.dim
        P0 = np.atleast_2d(np.asarray(P0, dtype=float))
        fixed = [np.asarray(q, dtype=float) for q in fixed]
        alpha = d - 1 + (self.beta if d == 2 else 0.0)
        xj, wj = roots_jacobi(self.n_radial, 0.0, alpha)
        xl, wl = np.polynomial.legendre.leggauss(self.n_radial)
        U, W = sphere_rule(d, self.n_angular)
        W = W * SPHERE_AREA[d]
        norms = np.linalg.norm(P0, axis=1)
        S = self.Rcut + norms
        a = np.minimum(1.0, S)
        for q in fixed:
            dist = np.linalg.norm(P0 - q, axis=1)
            a = np.where(dist > 0, np.minimum(a, 0.5 * dist), a)
        m = max(1, int(math.ceil(float(np.max(S - a)))))
        # radial nodes and weights, shape (B, n_s)
        s = [a[:, None] * (xj[None, :] + 1.0) / 2.0]
        ws = [(a[:, None] / 2.0) ** (alpha + 1.0) * wj[None, :]]
        width = (S - a) / m
        for k in range(m):
            lo = a + k * width
            sk = lo[:, None] + width[:, None] * (xl[None, :] + 1.0) / 2.0
            s.append(sk)
            ws.append(width[:, None] / 2.0 * wl[None, :] * sk**alpha)
        s = np.concatenate(s, axis=1)
        ws = np.concatenate(ws, axis=1)
        Q = np.array(fixed, dtype=float).reshape(-1, d)
        return _j_kernel(P0, Q, s, ws, U, W, self.beta, self.V0, self.Rcut, *self._compiled)

    def _pair_marginal_unnormalized(self, X, fixed):
        """exp(-beta (V(x) + sum_fixed g)) J(x; fixed) for one integrated partner."""
        X = np.atleast_2d(X)
        base = np.exp(self._log_weight(X, fixed))
        out = np.zeros(X.shape[0])
        live = base > 0
        if np.any(live):
            out[live] = base[live] * self._J_batch(X[live], fixed)
        return out

    def _pair_partition(self, fixed):
        key = ("Z2", tuple(map(tuple, fixed)))
        if key not in self._cache:
            d = self.dim
            if not fixed and self.params.potential.radial:
                U = np.zeros((1, d))
                U[0, 0] = 1.0
                self._cache[key] = self._outer_radial(
                    lambda r: self._pair_marginal_unnormalized(r[:, None] * U, []), self.Rcut)
            elif fixed:
                # outer polar integral around the first fixed point
                p0 = np.asarray(fixed[0])
                coarse = QuadratureGas(self.params, max(8, self.n_radial // 2), max(24, self.n_angular // 2))
                s, ws = coarse._panels(p0, fixed[1:])
                U, W = sphere_rule(d, coarse.n_angular)
                W = W * SPHERE_AREA[d]
                Z = (p0[None, None, :] + s[None, :, None] * U[:, None, :]).reshape(-1, d)
                lw = self._log_weight(Z, fixed[1:]).reshape(U.shape[0], s.size)
                if d == 3:
                    lw = lw - self.beta / s[None, :]
                Jv = self._J_batch(Z, fixed).reshape(lw.shape)
                self._cache[key] = float(np.sum(W[:, None] * ws[None, :] * np.exp(lw) * Jv))
            else:
                self._cache[key] = self._tensor_integral(lambda G: self._pair_marginal_unnormalized(G, []),
                                                         n=4 * self.n_radial)
        return self._cache[key]

    def _radial_pair_profile(self):
        if "profile" not in self._cache:
            d = self.dim
            r = np.linspace(0.0, self.Rcut, 6 * int(math.ceil(self.Rcut)) + 1)
            U = np.zeros((r.size, d))
            U[:, 0] = r
            self._cache["profile"] = CubicSpline(r, self._pair_marginal_unnormalized(U, []))
        return self._cache["profile"]

    def rho1_values(self, X, conditioned=()):
        """rho_1 (or the conditional rho_1 given ``conditioned``) at points X.

        Normalization follows the counting convention: the integral equals
        N - k + 1 for k - 1 conditioned points.
        """
        d = self.dim
        X = np.atleast_2d(np.asarray(X, dtype=float))
        fixed = [np.asarray(c, dtype=float).reshape(d) for c in conditioned]
        free = self.N - len(fixed)
        if free < 1:
            raise ValueError("too many conditioned points")
        if free == 1:
            return self._single(X, fixed)
        if free == 2:
            if not fixed and self.params.potential.radial:
                prof = self._radial_pair_profile()
                vals = np.where(np.linalg.norm(X, axis=1) <= self.Rcut, prof(np.linalg.norm(X, axis=1)), 0.0)
            else:
                vals = self._pair_marginal_unnormalized(X, fixed)
            return 2.0 * np.maximum(vals, 0.0) / self._pair_partition(fixed)
        raise Unsupported("unconditioned N=3 one-point functions are not supported; condition on a point")

    def rho1(self, X, conditioned=(), check=True):
        """rho1_values with a self-convergence check against doubled resolution."""
        vals = self.rho1_values(X, conditioned)
        if check:
            fine = self.with_resolution(2).rho1_values(X, conditioned)
            scale = max(float(np.max(np.abs(fine))), 1e-300)
            change = float(np.max(np.abs(fine - vals))) / scale
            if change > SELF_CONVERGENCE_TOL:
                raise GridTooCoarse(f"quadrature changed by {change:.2e} relative under refinement")
            return fine
        return vals

    def pair_distance_density(self, r):
        """Density of |x_1 - x_2| for N = 2 at the radii r."""
        if self.N != 2:
            raise ValueError("pair distance density needs N = 2")
        d = self.dim
        r = np.atleast_1d(np.asarray(r, dtype=float))
        U, W = sphere_rule(d, self.n_angular)
        W = W * SPHERE_AREA[d]
        Z2 = self._pair_partition([])

        def inner(R, rr):
            # for each outer radius R (point R e_1), angular average of the partner factor
            out = np.empty(R.size)
            for k, Rk in enumerate(R):
                x = np.zeros(d)
                x[0] = Rk
                Y = x + rr * U
                lw = self._log_weight(x[None], [])[0] + self._log_weight(Y, []) - self.beta * _g(rr, d)
                out[k] = np.sum(W * np.exp(lw)) * rr ** (d - 1)
            return out

        if not self.params.potential.radial:
            raise Unsupported("pair distance density is implemented for radial potentials")
        with np.errstate(divide="ignore"):
            return np.array([self._outer_radial(lambda R: inner(R, rr), self.Rcut) for rr in r]) / Z2


def quadrature_rho1(g, conditioned=(), grid=None, points_per_bin=3, check=True):
    """Exact (to quadrature) rho_1 as bin averages on a GridSpec grid.

    Bin averages use a points_per_bin^d Gauss rule, so the result is directly
    comparable to a histogram estimate on the same bins.
    """
    d = g.dim
    grid = grid or GridSpec(0.5, None)
    h = grid.h or 0.5
    ext = grid.extent if grid.extent is not None else g.Rcut
    n = int(math.ceil(2 * ext / h))
    origin = -0.5 * n * h * np.ones(d)
    xg, wg = np.polynomial.legendre.leggauss(points_per_bin)
    xg = (xg + 1.0) / 2.0
    wg = wg / 2.0
    sub = np.stack([m.ravel() for m in np.meshgrid(*([xg] * d), indexing="ij")], axis=1) * h
    wsub = np.prod(np.stack(np.meshgrid(*([wg] * d), indexing="ij"), axis=0).reshape(d, -1), axis=0)
    idx = np.stack([m.ravel() for m in np.meshgrid(*([np.arange(n)] * d), indexing="ij")], axis=1)
    corners = origin + idx * h
    P = (corners[:, None, :] + sub[None, :, :]).reshape(-1, d)
    vals = g.rho1(P, conditioned, check=check).reshape(corners.shape[0], -1) @ wsub
    values = vals.reshape((n,) * d)
    dens = DensityEstimate(origin, h, values, np.zeros_like(values), 0, g.N, 0.0)
    dens.leakage = float(1.0 - dens.integral / (g.N - len(conditioned)))
    return dens


# ----------------------------------------------------------------------------
# splitting identities


def check_split_identity(config, eq, p=None, relative=True):
    """|H - (E(mu_inf, V) + F(X, mu_inf) + sum zeta(x_i))|, divided by 1 + |H| if ``relative``."""
    config = as_configuration(config)
    N = config.N
    p = p or ScaledPotential(eq.potential, N)
    H = total_energy(config, p)
    E = eq.energy_N(N)
    F = jellium_energy(config, eq.measure_N(N), warn=False)
    Z = float(np.sum(eq.zeta_N(N, config.positions)))
    res = abs(H - (E + F + Z))
    return res / (1.0 + abs(H)) if relative else res


def _thermal_cell_quadrature(t):
    """Cell sums of h, V_1 and log mu at the solver's cell centres (unit mass)."""
    h, V, dens, geom = t._cell_fields()
    m = t.measure
    if isinstance(m, RadialMeasure):
        vol = SPHERE_AREA[t.dim] * np.diff(m.edges**t.dim) / t.dim
    else:
        vol = np.full(dens.size, m.cell_volume)
    w = dens * vol
    return float(np.sum(w * h)), float(np.sum(w * V)), float(np.sum(w * np.log(dens)))


def check_split_thermal(config, t, params, c_shift=0.0):
    """Log-residual of exp(-beta H) = exp(-beta E_theta - beta F(X, mu_theta)) prod mu_theta(x_i).

    E_theta = E(mu_theta, V) + beta^{-1} int mu_theta log mu_theta: the
    entropy term is what makes the identity exact. Integrals use the
    solver's cell-centre quadrature (the discretization in which the defining
    relation holds to solver tolerance) and mu_theta(x_i) is the pointwise
    extension exp(theta (c - h - V_1)) of the discrete solution. ``c_shift``
    perturbs c_{theta,N} (sensitivity check).
    """
    config = as_configuration(config)
    N, d, beta = config.N, config.dim, params.beta
    if abs(t.theta - params.theta) > 1e-9 * params.theta:
        raise ValueError(f"thermal solution has theta={t.theta}, params need {params.theta}")
    s = N ** (1.0 / d)
    amp = N ** (2.0 / d)
    big = N ** (1.0 + 2.0 / d)
    S1, V1, ent1 = _thermal_cell_quadrature(t)
    S_N = big * S1 - (0.5 * N * N * math.log(N) if d == 2 else 0.0)
    E_N = 0.5 * S_N + big * V1
    ent_N = N * ent1
    X = config.positions
    Y = X / s
    h1 = t.measure.potential(Y)
    hN = amp * h1 - (0.5 * N * math.log(N) if d == 2 else 0.0)
    pairs = pair_energy(X, d)
    F = pairs - float(np.sum(hN)) + 0.5 * S_N
    VN = amp * t.potential.V1(Y)
    H = pairs + float(np.sum(VN))
    c_N = t.c_N(N) + c_shift
    log_mu = beta * (c_N - hN - VN)
    return abs(-beta * H + beta * E_N + ent_N + beta * F - float(np.sum(log_mu)))


# ----------------------------------------------------------------------------
# isotropic averaging


def check_iso_energy(config, i, ball, background=None, n_nodes=None, detail=False):
    """Iso-averaged jellium energy against F - h_omega^{sum_{j != i} delta_{x_j} - mu}(x_i).

    The average over the harmonic measure of the ball seen from x_i uses
    Poisson-reweighted sphere nodes, normalized to unit mass. Only x_i-
    dependent terms of F are averaged (the rest cancels exactly). The default
    node count is 512 in d=2 and 32768 in d=3.
    """
    config = as_configuration(config)
    d = config.dim
    X = config.positions
    c, R = np.asarray(ball[0], dtype=float).reshape(d), float(ball[1])
    background = background if background is not None else ZeroMeasure(d)
    n_nodes = n_nodes or (512 if d == 2 else 32768)
    xi = X[i]
    if np.linalg.norm(xi - c) >= R:
        raise OutOfDomain("x_i must lie inside the ball")
    others = np.delete(X, i, axis=0)
    if others.size and np.any(np.abs(np.linalg.norm(others - c, axis=1) - R) < 1e-9 * R):
        raise GeometryError("a particle lies on the sphere (quadrature node collision)")
    nodes, w = harmonic_measure_nodes(c, R, d, n_nodes, x=xi)
    w = w / np.sum(w)

    def x_dependent(Z):
        out = np.zeros(Z.shape[0])
        for xj in others:
            out += _g(np.linalg.norm(Z - xj, axis=1), d)
        out -= background.potential(Z)
        return out

    lhs = float(np.dot(w, x_dependent(nodes)) - x_dependent(xi[None])[0])
    corr = sum(green_function_ball(c, R, xi, xj, d) for xj in others if np.linalg.norm(xj - c) < R)
    if not isinstance(background, ZeroMeasure):
        corr -= dirichlet_potential_measure(background, c, R, x=xi)
    rhs = -corr
    res = abs(lhs - rhs)
    if detail:
        return {"iso_minus_F": lhs, "minus_h_omega": rhs, "residual": res}
    return res


def _field_callable(F, dim):
    if callable(F):
        return F
    axes, values = F
    values = np.asarray(values, dtype=float)
    if dim == 2:
        spl = RectBivariateSpline(axes[0], axes[1], values, kx=3, ky=3)
        return lambda P: spl.ev(P[:, 0], P[:, 1])
    rgi = RegularGridInterpolator(axes, values, method="cubic")
    return rgi


def _sph_matrix(U, L):
    """Complex spherical harmonics Y_lm(U) for l <= L, with the degree of each column."""
    theta = np.arccos(np.clip(U[:, 2], -1.0, 1.0))
    phi = np.arctan2(U[:, 1], U[:, 0])
    cols, deg = [], []
    for l in range(L + 1):
        for m in range(-l, l + 1):
            cols.append(sph_harm_y(l, m, theta, phi))
            deg.append(l)
    return np.stack(cols, axis=1), np.array(deg, dtype=float)


def check_iso_adjoint(ball, F, G, dim, n_boundary=None, n_radial=64, n_chord=None):
    """|int_omega F Iso G - int_{partial omega} (Iso* F) G| for a ball omega.

    F is a callable or a grid field (axes, values) interpolated by cubic
    splines; G is a callable on boundary points or its values at the
    ``sphere_rule(dim, n_boundary)`` nodes. Iso G is the harmonic extension
    (Fourier series in d=2, spherical harmonics in d=3). Iso* F(z) is computed
    in polar coordinates around the boundary point z, where the Poisson
    kernel times the Jacobian is (l - s) / (sigma_d R) with chord l.
    """
    c, R = np.asarray(ball[0], dtype=float).reshape(dim), float(ball[1])
    Ff = _field_callable(F, dim)
    n_boundary = n_boundary or (512 if dim == 2 else 3200)
    n_chord = n_chord or (48 if dim == 2 else 24)
    U, Wb = sphere_rule(dim, n_boundary)
    Zb = c + R * U
    Gb = np.asarray(G(Zb) if callable(G) else G, dtype=float).reshape(-1)
    area = SPHERE_AREA[dim] * R ** (dim - 1)

    # left side: polar Gauss over the ball
    xr, wr = np.polynomial.legendre.leggauss(n_radial)
    r = R * (xr + 1.0) / 2.0
    wr = R / 2.0 * wr * r ** (dim - 1)
    if dim == 2:
        ghat = np.fft.fft(Gb)
        k = np.fft.fftfreq(n_boundary, d=1.0 / n_boundary)
        iso = np.real(np.fft.ifft(ghat[None, :] * (r[:, None] / R) ** np.abs(k)[None, :], axis=1))
        P = c + r[:, None, None] * U[None, :, :]
        Fv = Ff(P.reshape(-1, dim)).reshape(r.size, n_boundary)
        lhs = float(np.sum(wr[:, None] * (2 * np.pi / n_boundary) * Fv * iso))
    else:
        # spherical-harmonic expansion of G, truncated where the product rule is exact
        L = int(round(math.sqrt(Zb.shape[0] / 2.0))) - 1
        Ua, Wa = sphere_rule(3, 2 * (L + 8) ** 2)
        Yb, deg = _sph_matrix(U, L)
        Ya, _ = _sph_matrix(Ua, L)
        coef = (4 * np.pi * Wb * Gb) @ np.conj(Yb)
        iso = np.real(Ya @ (coef[:, None] * (r[None, :] / R) ** deg[:, None])).T
        P = c + r[:, None, None] * Ua[None, :, :]
        Fv = Ff(P.reshape(-1, 3)).reshape(r.size, -1)
        lhs = float(np.sum(wr[:, None] * (4 * np.pi * Wa)[None, :] * Fv * iso))

    # right side: Iso* F at each boundary node
    xs, ws = np.polynomial.legendre.leggauss(n_chord)
    ts = (xs + 1.0) / 2.0
    ws = ws / 2.0
    iso_star = np.empty(Zb.shape[0])
    if dim == 2:
        psi = np.pi / 2.0 * xs
        wpsi = np.pi / 2.0 * np.polynomial.legendre.leggauss(n_chord)[1]
        for k, z in enumerate(Zb):
            nin = -U[k]
            tang = np.array([-nin[1], nin[0]])
            dirs = np.cos(psi)[:, None] * nin + np.sin(psi)[:, None] * tang
            ell = 2.0 * R * np.cos(psi)
            s = ell[:, None] * ts[None, :]
            Pts = z + s[:, :, None] * dirs[:, None, :]
            Fv = Ff(Pts.reshape(-1, 2)).reshape(s.shape)
            integrand = (ell[:, None] - s) * Fv * ell[:, None] * ws[None, :]
            iso_star[k] = float(np.sum(wpsi[:, None] * integrand)) / (2 * np.pi * R)
    else:
        ca, wca = np.polynomial.legendre.leggauss(n_chord // 2)
        ca = (ca + 1.0) / 2.0
        wca = wca / 2.0
        nphi = n_chord
        phi = 2 * np.pi * np.arange(nphi) / nphi
        for k, z in enumerate(Zb):
            nin = -U[k]
            a = np.array([1.0, 0.0, 0.0]) if abs(nin[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
            e1 = np.cross(nin, a)
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(nin, e1)
            sa = np.sqrt(1.0 - ca**2)
            dirs = (ca[:, None, None] * nin + sa[:, None, None] * (np.cos(phi)[None, :, None] * e1
                                                                    + np.sin(phi)[None, :, None] * e2))
            ell = 2.0 * R * ca
            s = ell[:, None] * ts[None, :]
            Pts = z + s[:, None, :, None] * dirs[:, :, None, :]
            Fv = Ff(Pts.reshape(-1, 3)).reshape(ca.size, nphi, ts.size)
            integrand = (ell[:, None, None] - s[:, None, :]) * Fv * ell[:, None, None] * ws[None, None, :]
            iso_star[k] = float(np.sum(wca[:, None] * (2 * np.pi / nphi) * integrand.sum(axis=2))) / (4 * np.pi * R)
    rhs = float(np.sum(area * Wb * iso_star * Gb))
    return {"lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs)}


# ----------------------------------------------------------------------------
# mean-value and k-point comparison inequalities


def _laplacian_potential(V, c, R, x, dim):
    """h_omega^{Delta V / c_d}(x) for a scaled potential."""
    if isinstance(V.base, Quadratic):
        return dirichlet_potential_constant(2.0 * V.base.a * dim / fundamental_constant(dim), c, R, x, dim)

    class _Lap:
        pass

    lap = _Lap()
    lap.dim = dim
    lap.density = lambda Y: V.laplacian(Y) / fundamental_constant(dim)
    return dirichlet_potential_measure(lap, c, R, x=x)


def check_1pt_iso(g, eq, balls, conditioned=(), points=None, n_nodes=512, check=True):
    """Both mean-value inequalities for rho_1 (or the conditional rho_1).

    old:  rho(x) <= exp(beta h_omega^{Delta V / c_d - sum delta_y}(x)) int rho dharm_x
    zeta: e^{beta zeta} rho(x) <= exp(beta h_omega^{mu_inf - sum delta_y}(x)) int e^{beta zeta} rho dharm_x
    evaluated at each ball centre (and optional interior ``points`` per ball).
    The reported violation is max(0, lhs / rhs - 1).
    """
    if g.N > 2:
        raise ValueError("check_1pt_iso needs N <= 2")
    d, beta, N = g.dim, g.beta, g.N
    fixed = [np.asarray(y, dtype=float).reshape(d) for y in conditioned]
    muN = eq.measure_N(N)
    rows = []
    for b, (c, R) in enumerate(balls):
        c = np.asarray(c, dtype=float).reshape(d)
        pts = [c] + ([np.asarray(p, dtype=float).reshape(d) for p in points[b]] if points else [])
        for x in pts:
            nodes, w = harmonic_measure_nodes(c, R, d, n_nodes, x=None if np.array_equal(x, c) else x)
            w = w / np.sum(w)
            rho = g.rho1(np.vstack([x[None], nodes]), fixed, check=check)
            green = dirichlet_potential_charges(c, R, x, np.array(fixed), dim=d) if fixed else 0.0
            lhs_old = rho[0]
            rhs_old = math.exp(beta * (_laplacian_potential(g.V, c, R, x, d) - green)) * float(np.dot(w, rho[1:]))
            z = zeta_eval(eq, N, np.vstack([x[None], nodes]))
            lhs_z = math.exp(beta * z[0]) * rho[0]
            hmu = dirichlet_potential_measure(muN, c, R, x=x)
            rhs_z = math.exp(beta * (hmu - green)) * float(np.dot(w, np.exp(beta * z[1:]) * rho[1:]))
            rows.append({"ball": b, "x": x.tolist(), "radius": float(R),
                         "lhs_old": float(lhs_old), "rhs_old": rhs_old,
                         "violation_old": max(0.0, lhs_old / rhs_old - 1.0) if rhs_old > 0 else float(lhs_old > 0),
                         "lhs_zeta": float(lhs_z), "rhs_zeta": rhs_z,
                         "violation_zeta": max(0.0, lhs_z / rhs_z - 1.0) if rhs_z > 0 else float(lhs_z > 0)})
    worst = max(max(r["violation_old"], r["violation_zeta"]) for r in rows)
    return Report("1pt_iso", {"max_violation": worst, "passed": worst <= 1e-4, "cases": len(rows)}, rows)


def _ball_integral(g, y, r, fixed, check, n_r=48, n_a=256):
    d = g.dim
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    s = r * (xr + 1.0) / 2.0
    wr = r / 2.0 * wr * s ** (d - 1)
    U, W = sphere_rule(d, n_a)
    W = W * SPHERE_AREA[d]
    P = (y[None, None, :] + s[None, :, None] * U[:, None, :]).reshape(-1, d)
    vals = g.rho1(P, fixed, check=check).reshape(U.shape[0], s.size)
    return float(np.sum(W[:, None] * wr[None, :] * vals))


def check_kpt_comp(g, pairs, conditioned=(), check=True):
    """rho(y) <= C r^{-d} e^A int_{B_r(y)} rho with the pinned constants.

    C = KPT_VOLUME_CONSTANT[d], A = beta r^2 M / (2d) - beta sum_j max(0, g(y - y_j) - g(r/2)),
    with M the sup of max(Delta V_N, 0) over B_r(y). Margins are log(rhs / lhs).
    """
    if g.N > 2:
        raise ValueError("check_kpt_comp needs N <= 2")
    d, beta = g.dim, g.beta
    fixed = [np.asarray(q, dtype=float).reshape(d) for q in conditioned]
    rows = []
    for y, r in pairs:
        y = np.asarray(y, dtype=float).reshape(d)
        pts = y + r * np.vstack([np.zeros((1, d)), sphere_rule(d, 32)[0], 0.5 * sphere_rule(d, 32)[0]])
        M = max(float(np.max(g.V.laplacian(pts))), 0.0)
        rep = sum(max(0.0, float(_g(np.linalg.norm(y - q), d)) - float(kernel_radial(r / 2.0, d))) for q in fixed)
        A = beta * r * r * M * KPT_LAPLACIAN_CONSTANT[d] - beta * rep
        lhs = float(g.rho1(y[None], fixed, check=check)[0])
        rhs = KPT_VOLUME_CONSTANT[d] * r ** (-d) * math.exp(A) * _ball_integral(g, y, r, fixed, check)
        margin = math.log(rhs / lhs) if lhs > 0 and rhs > 0 else float("inf")
        rows.append({"y": y.tolist(), "r": float(r), "lhs": lhs, "rhs": rhs, "log_margin": margin,
                     "violation": max(0.0, lhs / rhs - 1.0) if rhs > 0 else float(lhs > 0)})
    worst = max(r["violation"] for r in rows)
    return Report("kpt_comp", {"max_violation": worst, "passed": worst <= 1e-4,
                               "C": KPT_VOLUME_CONSTANT[d]}, rows)


# ----------------------------------------------------------------------------
# squeezing and eta energy


def shell_averages_3d(eta):
    """Averages over the uniform measure on B_eta minus B_{eta/2} in d=3:
    E[1/|y|] = 9 / (7 eta) and E[|y|^2] = 93 eta^2 / 140."""
    return 9.0 / (7.0 * eta), 93.0 * eta * eta / 140.0


def _shell_average(f, x, eta, dim, n_r=16, n_a=128):
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    s = eta / 2.0 + eta / 2.0 * (xr + 1.0) / 2.0
    wr = wr * s ** (dim - 1)
    wr = wr / np.sum(wr)
    U, W = sphere_rule(dim, n_a)
    P = (x[None, None, :] + s[None, :, None] * U[:, None, :]).reshape(-1, dim)
    return float(np.sum(W[:, None] * wr[None, :] * f(P).reshape(U.shape[0], s.size)))


def check_squeeze(config, eq, n_shell=16):
    """Exact Err in the squeezing inequality and the constant it implies.

    The configuration is X_N; particle 0 is the one replaced by
    nu = (N-1)^{-1} sum_{i>=1} nu_{x_i, eta~_i}. Err is the left side minus the
    main right-side terms, evaluated exactly:
    Err = (N-1)^{-1} [sum_{i<j} g(x_i - x_j) + sum 9/(7 eta~_i) - sum delta h_i
          + sum (int zeta dnu_i - zeta(x_i))]
    over i, j >= 1, with delta h_i the shell average of h^{mu_inf} minus its
    centre value. The implied constant is Err / (1 + (N-1)^{-1} sum (g(eta~_i) + M_{x_i})).
    """
    config = as_configuration(config)
    d, N = config.dim, config.N
    if d != 3:
        raise Unsupported("the squeezing inequality is a d=3 statement")
    if N < 3:
        raise ValueError("check_squeeze needs N >= 3")
    Xp = config.positions[1:]
    n = Xp.shape[0]
    D = np.linalg.norm(Xp[:, None, :] - Xp[None, :, :], axis=2)
    np.fill_diagonal(D, np.inf)
    if np.any(D == 0):
        raise DegenerateConfig("coincident points give eta~_i = 0")
    eta = 0.25 * np.minimum(1.0, D.min(axis=1))
    muN = eq.measure_N(N)
    iu = np.triu_indices(n, 1)
    pair_sum = float(np.sum(1.0 / D[iu]))
    self_sum = float(np.sum(9.0 / (7.0 * eta)))
    dh = np.empty(n)
    dz = np.empty(n)
    for i in range(n):
        dh[i] = _shell_average(muN.potential, Xp[i], eta[i], d, n_r=n_shell) - float(muN.potential(Xp[i][None])[0])
        zf = lambda P: eq.zeta_N(N, P)  # noqa: E731
        dz[i] = _shell_average(zf, Xp[i], eta[i], d, n_r=n_shell) - float(zf(Xp[i][None])[0])
    err = (pair_sum + self_sum - float(np.sum(dh)) + float(np.sum(dz))) / (N - 1)
    p = eq.potential
    M = np.array([laplacian_bound(ScaledPotential(p, N), x) for x in Xp])
    scale = 1.0 + float(np.sum(1.0 / eta + M)) / (N - 1)
    return {"Err": err, "implied_C": err / scale, "scale": scale, "eta_tilde": eta, "pair_term": pair_sum / (N - 1),
            "self_term": self_sum / (N - 1), "delta_h": dh, "delta_zeta": dz}


def squeeze_sides(config, eq):
    """Left and right sides of the squeezing inequality without Err, by direct
    evaluation of F((y, X'), mu) averaged over nu (independent of check_squeeze's algebra)."""
    config = as_configuration(config)
    d, N = config.dim, config.N
    Xp = config.positions[1:]
    n = Xp.shape[0]
    D = np.linalg.norm(Xp[:, None, :] - Xp[None, :, :], axis=2)
    np.fill_diagonal(D, np.inf)
    eta = 0.25 * np.minimum(1.0, D.min(axis=1))
    muN = eq.measure_N(N)
    cfg = Configuration(Xp, d)
    F_rest = jellium_energy(cfg, muN, warn=False)
    zsum = float(np.sum(eq.zeta_N(N, Xp)))
    lhs = 0.0
    for i in range(n):
        # exact shell average of g(y - x_i) plus quadrature for the smooth terms
        others = np.delete(Xp, i, axis=0)

        def smooth(P):
            out = -muN.potential(P) + eq.zeta_N(N, P)
            for xj in others:
                out = out + 1.0 / np.linalg.norm(P - xj, axis=1)
            return out

        lhs += (9.0 / (7.0 * eta[i]) + _shell_average(smooth, Xp[i], eta[i], d, n_r=24, n_a=512)) / n
    lhs += F_rest + zsum
    rhs = (1.0 + 1.0 / (N - 1)) * (F_rest + zsum) - muN.self_energy() / (2.0 * (N - 1))
    return lhs, rhs


def check_eta_energy(config, background):
    """sum_i g(eta_i) - 2 F(X, mu) with eta_i = min(1, min_{j != i} |x_i - x_j|) / 4."""
    config = as_configuration(config)
    X = config.positions
    d, N = config.dim, config.N
    if N == 1:
        eta = np.array([0.25])
    else:
        D = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
        np.fill_diagonal(D, np.inf)
        if np.any(D == 0):
            raise DegenerateConfig("coincident points")
        eta = 0.25 * np.minimum(1.0, D.min(axis=1))
    sg = float(np.sum(_g(eta, d)))
    F = jellium_energy(config, background, warn=False)
    excess = sg - 2.0 * F
    return {"sum_g_eta": sg, "two_F": 2.0 * F, "excess": excess, "excess_per_particle": excess / N,
            "ratio": sg / (2.0 * F) if F > 0 else float("nan")}


# ----------------------------------------------------------------------------
# Ginibre reference (beta = 2, V_1 = |x|^2 / 2, d = 2)


def kostlan_sample_max(N, M, seed=0):
    """max_k |z_k| for M Ginibre(N) samples: the moduli squared are independent Gamma(k, 1)."""
    rng = np.random.default_rng(seed)
    G = rng.gamma(np.arange(1, N + 1)[None, :], 1.0, size=(M, N))
    return np.sqrt(G.max(axis=1))


def kostlan_max_cdf(t, N):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(1, N + 1)
    return np.exp(np.sum(np.log(np.maximum(gammainc(k[None, :], (t * t)[:, None]), 1e-300)), axis=1))


def kostlan_max_mean(N, n=20000):
    """E max_k |z_k| = int_0^inf (1 - P(max <= t)) dt."""
    top = math.sqrt(N) + 12.0
    t = np.linspace(0.0, top, n)
    return float(np.trapezoid(1.0 - kostlan_max_cdf(t, N), t))
