"""Equilibrium measure (obstacle problem), effective potential zeta and the
thermal equilibrium measure.

The obstacle problem is posed for zeta_1 = h^{mu} + V_1 - c on a bounded
domain with Neumann data d_n zeta = d_n (g + V_1) on the outer boundary:

    zeta >= 0,   r := -Delta zeta + Delta V >= 0,   zeta * r = 0,

and mu = r / c_d. The Neumann data encodes unit mass, so no search over the
constant c is needed; c is recovered afterwards from the discrete potential.
Finite volumes with exact face fluxes of V keep the discrete mass equal to 1.
"""

import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from ._validation import check_dim, check_points
from .errors import NonConvergence, UnsupportedGeometry
from .kernel.core import SPHERE_AREA, fundamental_constant
from .kernel.measures import CartesianMeasure, RadialMeasure
from .potential import GridSampled, PotentialSpec, Quadratic, ScaledPotential

DENSITY_THRESHOLD = 1e-6
TAIL_EXPONENT = 27.6  # exp(-27.6) ~ 1e-12


@dataclass
class GridSpec:
    """Discretization request. ``h`` is the cell size (macroscopic units);
    ``extent`` the outer radius (radial) or half-width of the box (Cartesian).
    ``geometry`` is 'auto', 'radial' or 'cartesian'."""

    h: float = None
    extent: float = None
    geometry: str = "auto"

    def to_dict(self):
        return {"h": self.h, "extent": self.extent, "geometry": self.geometry}


# ----------------------------------------------------------------------------
# equilibrium data


class EquilibriumData:
    """mu_{infty,1}, c_{infty,1} and zeta_1, with the N-scaled views."""

    def __init__(self, potential, measure, c, method, grid=None, log=None, zeta_grid=None):
        self.potential = potential
        self.dim = potential.dim
        self.measure = measure
        self.c = float(c)
        self.method = method
        self.grid = grid
        self.log = dict(log or {})
        self.zeta_grid = zeta_grid
        self._tree = None

    # macroscopic (N = 1) objects
    @property
    def muInf1(self):
        return self.measure

    @property
    def cInf1(self):
        return self.c

    def density1(self, X):
        return self.measure.density(X)

    def zeta1(self, X):
        """h^{mu} + V_1 - c evaluated from the discrete measure (no clipping)."""
        X = check_points(X, self.dim)
        return self.measure.potential(X) + self.potential.V1(X) - self.c

    @property
    def droplet_indicator(self):
        return self.measure.values > DENSITY_THRESHOLD

    def _radial_intervals(self):
        m = self.droplet_indicator
        e = self.measure.edges
        out, k = [], 0
        while k < m.size:
            if m[k]:
                j = k
                while j + 1 < m.size and m[j + 1]:
                    j += 1
                out.append((e[k], e[j + 1]))
                k = j + 1
            else:
                k += 1
        return out

    def in_droplet(self, X):
        X = check_points(X, self.dim)
        return self.measure.density(X) > DENSITY_THRESHOLD

    def distance_to_droplet(self, X):
        """Macroscopic distance to the droplet (0 inside)."""
        X = check_points(X, self.dim)
        if isinstance(self.measure, RadialMeasure):
            r = np.linalg.norm(X, axis=1)
            best = np.full(r.shape, np.inf)
            for a, b in self._radial_intervals():
                best = np.minimum(best, np.abs(r - np.clip(r, a, b)))
            return best
        if self._tree is None:
            C = self.measure.centers()[self.droplet_indicator.ravel()]
            self._tree = cKDTree(C)
        d, _ = self._tree.query(X)
        inside = self.in_droplet(X)
        return np.where(inside, 0.0, np.maximum(d - 0.5 * self.measure.h, 0.0))

    def droplet_radius_estimate(self):
        if isinstance(self.measure, RadialMeasure):
            iv = self._radial_intervals()
            return float(iv[-1][1]) if iv else 0.0
        C = self.measure.centers()[self.droplet_indicator.ravel()]
        return float(np.max(np.linalg.norm(C, axis=1)) + 0.5 * self.measure.h * math.sqrt(2))

    def droplet_boundary(self):
        """Boundary polyline(s) of the droplet.

        Radial: the outer radius (and inner radius for annuli) found by bisection
        on the density. Cartesian: marching squares on the contact indicator.
        """
        if isinstance(self.measure, RadialMeasure):
            return [b for iv in self._radial_intervals() for b in iv if b > 0]
        from skimage.measure import find_contours

        field_ = self.droplet_indicator.astype(float)
        out = []
        for c in find_contours(field_, 0.5):
            out.append(self.measure.origin + (c + 0.5) * self.measure.h)
        return out

    # N-scaled views
    def measure_N(self, N):
        return self.measure.rescaled(N)

    def c_N(self, N):
        d = self.dim
        return N ** (2.0 / d) * self.c - (0.5 * N * math.log(N) if d == 2 else 0.0)

    def zeta_N(self, N, X):
        X = check_points(X, self.dim)
        return N ** (2.0 / self.dim) * self.zeta1(X / N ** (1.0 / self.dim))

    def distance_to_droplet_N(self, N, X):
        s = N ** (1.0 / self.dim)
        return s * self.distance_to_droplet(check_points(X, self.dim) / s)

    def V1_integral(self):
        if isinstance(self.measure, RadialMeasure):
            return self.measure.integrate_radial(self.potential.V1_radial)
        return self.measure.integrate(self.potential.V1)

    def energy_N(self, N):
        """E(mu_{infty,N}, V_N) = 1/2 iint g dmu dmu + int V_N dmu."""
        d = self.dim
        return 0.5 * self.measure_N(N).self_energy() + N ** (1.0 + 2.0 / d) * self.V1_integral()

    def to_dict(self):
        return {
            "method": self.method,
            "dim": self.dim,
            "cInf1": self.c,
            "grid": None if self.grid is None else self.grid.to_dict(),
            "log": self.log,
        }


def zeta_eval(eq, N, x):
    """zeta_N(x) = N^{2/d} zeta_1(N^{-1/d} x), clipped at 0 (discretization noise inside the droplet)."""
    x = np.asarray(x, dtype=float)
    vals = np.maximum(eq.zeta_N(N, x), 0.0)
    return float(vals[0]) if x.ndim == 1 else vals


def zeta_growth_alpha(eq, N, X):
    """Largest alpha with zeta_N >= alpha min(dist(x, Sigma)^2, N^{2/d}) on the given points."""
    X = check_points(X, eq.dim)
    dist = eq.distance_to_droplet_N(N, X)
    keep = dist > 0
    if not np.any(keep):
        return math.inf
    z = eq.zeta_N(N, X[keep])
    return float(np.min(z / np.minimum(dist[keep] ** 2, N ** (2.0 / eq.dim))))


# ----------------------------------------------------------------------------
# closed form


def quadratic_droplet_radius(a, dim):
    return 1.0 / math.sqrt(2.0 * a) if dim == 2 else (2.0 * a) ** (-1.0 / 3.0)


def _closed_form(p):
    d = p.dim
    R = quadratic_droplet_radius(p.a, d)
    mu = RadialMeasure.uniform_ball(R, 1.0, d)
    c = float(mu.potential_radial(np.array([0.0]))[0])
    return EquilibriumData(p, mu, c, "closed_form", log={"droplet_radius": R})


# ----------------------------------------------------------------------------
# radial finite-volume PSOR


@numba.njit(cache=True)
def _psor_1d(z, am, ap, b, vol, omega, tol, max_sweeps, check_every, stall=100):
    n = z.size
    diag = am + ap
    res = np.inf
    best = np.inf
    idle = 0
    sweeps = 0
    while sweeps < max_sweeps:
        for i in range(n):
            s = -b[i]
            if i > 0:
                s += am[i] * z[i - 1]
            if i < n - 1:
                s += ap[i] * z[i + 1]
            gs = s / diag[i]
            v = (1.0 - omega) * z[i] + omega * gs
            z[i] = v if v > 0.0 else 0.0
        sweeps += 1
        if sweeps % check_every == 0 or sweeps == max_sweeps:
            res = 0.0
            for i in range(n):
                r = diag[i] * z[i] + b[i]
                if i > 0:
                    r -= am[i] * z[i - 1]
                if i < n - 1:
                    r -= ap[i] * z[i + 1]
                r /= vol[i]
                m = min(z[i], r)
                if abs(m) > res:
                    res = abs(m)
            if res < tol:
                break
            # stop once rounding noise dominates (no 10% gain over `stall` checks)
            if res < 0.9 * best:
                best = res
                idle = 0
            else:
                idle += 1
                if idle > stall:
                    break
    return sweeps, res


def _radial_operator(p, edges):
    d = p.dim
    S = SPHERE_AREA[d]
    dr = np.diff(edges)
    A = S * edges ** (d - 1)
    dV = p.dV1_radial(edges)
    dV[0] = 0.0 if edges[0] == 0 else dV[0]
    centers = 0.5 * (edges[1:] + edges[:-1])
    hc = np.diff(centers)
    am = np.zeros(centers.size)
    ap = np.zeros(centers.size)
    am[1:] = A[1:-1] / hc
    ap[:-1] = A[1:-1] / hc
    flux_V = A[1:] * dV[1:] - A[:-1] * dV[:-1]
    L = edges[-1]
    gprime = -1.0 / L if d == 2 else -1.0 / L**2
    b = flux_V.copy()
    b[-1] -= A[-1] * (gprime + dV[-1])
    vol = S * (edges[1:] ** d - edges[:-1] ** d) / d
    return am, ap, b, vol, dr


def _radius_guess(p):
    d = p.dim

    def flux(r):
        return r ** (d - 1) * float(p.dV1_radial(np.array([r]))[0]) - 1.0

    hi = 1.0
    rmax = p.max_radius()
    while flux(min(hi, rmax)) < 0:
        if hi >= rmax:
            raise UnsupportedGeometry("potential does not confine unit mass within its sampled domain")
        hi *= 2.0
    hi = min(hi, rmax)
    return brentq(flux, 1e-12, hi, xtol=1e-12)


def _default_omega(n):
    return 2.0 / (1.0 + math.pi / n)


def _solve_radial(p, grid, omega, tol, max_sweeps):
    R0 = _radius_guess(p)
    L = grid.extent or min(max(1.6 * R0, R0 + 0.5), p.max_radius())
    h = grid.h or L / 2048
    n = max(8, int(round(L / h)))
    n = 8 * int(math.ceil(n / 8))
    levels = [n // 8, n // 4, n // 2, n]
    z = None
    total = 0
    t0 = time.perf_counter()
    for k, m in enumerate(levels):
        edges = np.linspace(0.0, L, m + 1)
        am, ap, b, vol, _ = _radial_operator(p, edges)
        centers = 0.5 * (edges[1:] + edges[:-1])
        if z is None:
            z = np.maximum(p.V1_radial(centers) - p.V1_radial(np.array([R0]))[0], 0.0)
        else:
            z = np.repeat(z, 2)
        w = omega if omega is not None else _default_omega(m)
        sweeps, res = _psor_1d(z, am, ap, b, vol, w, tol, max_sweeps, 10)
        total += sweeps
    if res >= tol:
        # over-relaxation near 2 amplifies rounding; plain Gauss-Seidel sweeps remove that floor
        sweeps, res = _psor_1d(z, am, ap, b, vol, 1.0, tol, min(max_sweeps, 5000), 10)
        total += sweeps
    if res >= tol:
        raise NonConvergence(f"radial PSOR stopped at residual {res:.3e} after {total} sweeps", res)
    r = (am + ap) * z + b
    r[1:] -= am[1:] * z[:-1]
    r[:-1] -= ap[:-1] * z[1:]
    cd = fundamental_constant(p.dim)
    dens = np.maximum(r, 0.0) / (cd * vol)
    mass = np.sum(dens * vol)
    dens /= mass
    mu = RadialMeasure(edges, dens, p.dim)
    rc = 0.0 if dens[0] > DENSITY_THRESHOLD else float(mu.centers[np.argmax(dens * vol)])
    c = float(mu.potential_radial(np.array([rc]))[0] + p.V1_radial(np.array([rc]))[0])
    log = {
        "solver": "psor-radial", "omega": omega if omega is not None else "optimal", "sweeps": int(total),
        "residual": float(res), "levels": levels, "cells": n, "extent": L,
        "mass_before_renormalization": float(mass), "seconds": time.perf_counter() - t0,
    }
    return EquilibriumData(p, mu, c, "radial_psor", GridSpec(L / n, L, "radial"), log, zeta_grid=z)


# ----------------------------------------------------------------------------
# 2-D Cartesian PSOR


@numba.njit(cache=True)
def _psor_2d(z, b, k, omega, tol, max_sweeps, check_every, vol, stall=100):
    nx, ny = z.shape
    res = np.inf
    best = np.inf
    idle = 0
    sweeps = 0
    while sweeps < max_sweeps:
        for i in range(nx):
            for j in range(ny):
                s = -b[i, j]
                if i > 0:
                    s += z[i - 1, j]
                if i < nx - 1:
                    s += z[i + 1, j]
                if j > 0:
                    s += z[i, j - 1]
                if j < ny - 1:
                    s += z[i, j + 1]
                v = (1.0 - omega) * z[i, j] + omega * s / k[i, j]
                z[i, j] = v if v > 0.0 else 0.0
        sweeps += 1
        if sweeps % check_every == 0 or sweeps == max_sweeps:
            res = 0.0
            for i in range(nx):
                for j in range(ny):
                    r = k[i, j] * z[i, j] + b[i, j]
                    if i > 0:
                        r -= z[i - 1, j]
                    if i < nx - 1:
                        r -= z[i + 1, j]
                    if j > 0:
                        r -= z[i, j - 1]
                    if j < ny - 1:
                        r -= z[i, j + 1]
                    m = min(z[i, j], r / vol)
                    if abs(m) > res:
                        res = abs(m)
            if res < tol:
                break
            # stop once rounding noise dominates (no 10% gain over `stall` checks)
            if res < 0.9 * best:
                best = res
                idle = 0
            else:
                idle += 1
                if idle > stall:
                    break
    return sweeps, res


@numba.njit(cache=True)
def _boundary_angles(P1, P2, C, m):
    """sum_j m_j * (angle subtended by segment P1[f]P2[f] at C[j]) for each face f."""
    out = np.zeros(P1.shape[0])
    for f in range(P1.shape[0]):
        acc = 0.0
        for j in range(C.shape[0]):
            ax = P1[f, 0] - C[j, 0]
            ay = P1[f, 1] - C[j, 1]
            bx = P2[f, 0] - C[j, 0]
            by = P2[f, 1] - C[j, 1]
            acc += m[j] * abs(math.atan2(ax * by - ay * bx, ax * bx + ay * by))
        out[f] = acc
    return out


def _box_faces(lo, h, nx, ny):
    """Boundary faces as (cell index, P1, P2) lists for the four box sides."""
    cells, P1, P2 = [], [], []
    x0, y0 = lo
    x1, y1 = x0 + nx * h, y0 + ny * h
    for i in range(nx):
        xa, xb = x0 + i * h, x0 + (i + 1) * h
        cells += [(i, 0), (i, ny - 1)]
        P1 += [(xa, y0), (xa, y1)]
        P2 += [(xb, y0), (xb, y1)]
    for j in range(ny):
        ya, yb = y0 + j * h, y0 + (j + 1) * h
        cells += [(0, j), (nx - 1, j)]
        P1 += [(x0, ya), (x1, ya)]
        P2 += [(x0, yb), (x1, yb)]
    return np.array(cells), np.array(P1, dtype=float), np.array(P2, dtype=float)


def _cartesian_rhs(p, lo, h, nx, ny, sources, masses):
    ax = lo[0] + (np.arange(nx) + 0.5) * h
    ay = lo[1] + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(ax, ay, indexing="ij")
    V = p.V1(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(nx, ny)
    b = np.zeros((nx, ny))
    k = np.zeros((nx, ny))
    b[:-1, :] += V[1:, :] - V[:-1, :]
    b[1:, :] += V[:-1, :] - V[1:, :]
    b[:, :-1] += V[:, 1:] - V[:, :-1]
    b[:, 1:] += V[:, :-1] - V[:, 1:]
    k[:-1, :] += 1
    k[1:, :] += 1
    k[:, :-1] += 1
    k[:, 1:] += 1
    cells, P1, P2 = _box_faces(lo, h, nx, ny)
    ang = _boundary_angles(P1, P2, sources, masses)
    np.add.at(b, (cells[:, 0], cells[:, 1]), ang)
    return b, k, V


def _cartesian_box(p, grid):
    if isinstance(p, GridSampled):
        box = np.array(p.domain["box"])
        lo, hi = box[:, 0], box[:, 1]
        h = grid.h or (hi[0] - lo[0]) / 256
        nx = int(math.floor((hi[0] - lo[0]) / h / 8)) * 8
        ny = int(math.floor((hi[1] - lo[1]) / h / 8)) * 8
        ctr = 0.5 * (lo + hi)
        lo = ctr - 0.5 * h * np.array([nx, ny])
        return lo, h, nx, ny
    if p.radial:
        R0 = _radius_guess(p)
        L = grid.extent or max(1.5 * R0, R0 + 0.5)
    else:
        L = grid.extent
        if L is None:
            raise UnsupportedGeometry("Cartesian solve needs grid.extent for this potential")
    h = grid.h or 2 * L / 256
    n = 8 * int(math.ceil(2 * L / h / 8))
    return -0.5 * n * h * np.ones(2), h, n, n


def _solve_cartesian(p, grid, omega, tol, max_sweeps):
    if p.dim != 2:
        raise UnsupportedGeometry("Cartesian obstacle solver is two-dimensional only")
    lo, h, nx, ny = _cartesian_box(p, grid)
    cd = fundamental_constant(2)
    t0 = time.perf_counter()
    # pass 1: monopole boundary data at the box center; pass 2: full discrete measure
    sources = np.array([lo + 0.5 * h * np.array([nx, ny])])
    masses = np.array([1.0])
    total = 0
    levels = [4, 2, 1]
    passes = []
    z = None
    for npass in range(2):
        for f in levels:
            hh, mx, my = h * f, nx // f, ny // f
            b, k, V = _cartesian_rhs(p, lo, hh, mx, my, sources, masses)
            if z is None:
                z = np.maximum(V - np.min(V), 0.0)
            elif z.shape != (mx, my):
                z = np.repeat(np.repeat(z, 2, axis=0), 2, axis=1)
            w = omega if omega is not None else _default_omega(max(mx, my))
            sweeps, res = _psor_2d(z, b, k, w, tol, max_sweeps, 20, hh * hh)
            total += sweeps
        if res >= tol:
            sweeps, res = _psor_2d(z, b, k, 1.0, tol, min(max_sweeps, 5000), 20, h * h)
            total += sweeps
        r = k * z + b
        r[1:, :] -= z[:-1, :]
        r[:-1, :] -= z[1:, :]
        r[:, 1:] -= z[:, :-1]
        r[:, :-1] -= z[:, 1:]
        dens = np.maximum(r, 0.0) / (cd * h * h)
        passes.append({"sweeps": int(sweeps), "residual": float(res)})
        mask = dens > 0
        ax = lo[0] + (np.arange(nx) + 0.5) * h
        ay = lo[1] + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(ax, ay, indexing="ij")
        sources = np.stack([X[mask], Y[mask]], axis=1)
        masses = dens[mask] * h * h / np.sum(dens[mask] * h * h)
        levels = [1]
    if res >= tol:
        raise NonConvergence(f"2-D PSOR stopped at residual {res:.3e} after {total} sweeps", res)
    mass = np.sum(dens) * h * h
    dens /= mass
    mu = CartesianMeasure(lo, h, dens)
    centroid = np.sum(sources * masses[:, None], axis=0)
    if mu.density(centroid[None, :])[0] <= DENSITY_THRESHOLD:
        centroid = sources[np.argmin(np.linalg.norm(sources - centroid, axis=1))]
    c = float(mu.potential(centroid[None, :])[0] + p.V1(centroid[None, :])[0])
    log = {
        "solver": "psor-cartesian", "omega": omega if omega is not None else "optimal",
        "sweeps": int(total), "residual": float(res), "passes": passes, "shape": [nx, ny], "h": h,
        "origin": lo.tolist(), "mass_before_renormalization": float(mass),
        "seconds": time.perf_counter() - t0,
    }
    return EquilibriumData(p, mu, c, "cartesian_psor", GridSpec(h, float(nx * h / 2), "cartesian"), log, zeta_grid=z)


def solve_equilibrium(p, dim=None, grid=None, omega=None, tol=1e-9, max_sweeps=100000, method="auto"):
    """Equilibrium measure mu_{infty,1}, constant c_{infty,1} and zeta_1 for V_1 = p.

    ``method``: 'auto' (closed form for quadratic, radial PSOR for radial kinds,
    2-D PSOR otherwise), 'closed_form', 'radial' or 'cartesian'. ``omega=None``
    selects the optimal SOR factor 2 / (1 + pi / n) per level.
    """
    if dim is not None and check_dim(dim) != p.dim:
        raise ValueError(f"potential is {p.dim}-dimensional, requested d={dim}")
    grid = grid or GridSpec()
    geometry = method if method != "auto" else grid.geometry
    if geometry in ("auto", "closed_form") and isinstance(p, Quadratic):
        return _closed_form(p)
    if geometry == "closed_form":
        raise UnsupportedGeometry("closed form only available for quadratic potentials")
    if geometry == "cartesian" or (geometry == "auto" and not p.radial):
        if p.dim == 3:
            raise UnsupportedGeometry("non-radial potentials are not supported in d=3")
        return _solve_cartesian(p, grid, omega, tol, max_sweeps)
    if not p.radial:
        raise UnsupportedGeometry("radial solver needs a radial potential")
    return _solve_radial(p, grid, omega, tol, max_sweeps)


# ----------------------------------------------------------------------------
# thermal equilibrium measure


class ThermalEquilibriumData:
    """mu_{theta,1} (unit mass) and c_{theta,1} with the N-scaled views."""

    def __init__(self, potential, theta, measure, c, residual, history, grid):
        self.potential = potential
        self.dim = potential.dim
        self.theta = float(theta)
        self.measure = measure
        self.c = float(c)
        self.residual = float(residual)
        self.history = history
        self.grid = grid

    @property
    def muTheta1(self):
        return self.measure

    @property
    def cTheta1(self):
        return self.c

    def density1(self, X):
        return self.measure.density(X)

    def measure_N(self, N):
        return self.measure.rescaled(N)

    def c_N(self, N):
        d = self.dim
        return N ** (2.0 / d) * self.c - (0.5 * N * math.log(N) if d == 2 else 0.0)

    def density_N(self, N, X):
        return self.measure.density(check_points(X, self.dim) / N ** (1.0 / self.dim))

    def relation_residual(self):
        """sup over cell centers of |h + V_1 + theta^{-1} log mu - c|."""
        h, V, dens, _ = self._cell_fields()
        return float(np.max(np.abs(h + V + np.log(dens) / self.theta - self.c)))

    def _cell_fields(self):
        m = self.measure
        if isinstance(m, RadialMeasure):
            r = m.centers
            return m.potential_radial(r), self.potential.V1_radial(r), m.values, m.edges
        C = m.centers()
        return m.potential_at_centers().ravel(), self.potential.V1(C), m.values.ravel(), C

    def entropy(self):
        """int mu_{theta,1} log mu_{theta,1}."""
        m = self.measure
        if isinstance(m, RadialMeasure):
            vol = SPHERE_AREA[self.dim] * np.diff(m.edges ** self.dim) / self.dim
            return float(np.sum(vol * m.values * np.log(m.values)))
        v = m.values.ravel()
        return float(np.sum(v * np.log(v)) * m.cell_volume)

    def V1_integral(self):
        m = self.measure
        if isinstance(m, RadialMeasure):
            return m.integrate_radial(self.potential.V1_radial)
        return m.integrate(self.potential.V1)

    def energy_N(self, N):
        """E(mu_{theta,N}, V_N)."""
        return 0.5 * self.measure_N(N).self_energy() + N ** (1.0 + 2.0 / self.dim) * self.V1_integral()


def _thermal_extent(eq, theta):
    d = eq.dim
    R = eq.droplet_radius_estimate()
    r = R
    step = max(0.05 * R, 0.01)
    while True:
        x = np.zeros((1, d))
        x[0, 0] = r
        if theta * eq.zeta1(x)[0] >= TAIL_EXPONENT:
            return r
        r += step
        if r > eq.potential.max_radius():
            return eq.potential.max_radius()


def _thermal_iterate(update, mu0, vol, theta, tol, max_iter):
    mu = mu0
    s = 0.5
    hist = []
    prev = np.inf
    best = None
    for it in range(max_iter):
        new, res, c = update(mu)
        hist.append((float(res), float(s)))
        if best is None or res < best[1]:
            best = (mu, res, c)
        if res < tol:
            return mu, res, c, hist
        if res > prev:
            s *= 0.5
        else:
            s = min(1.0, s * 1.25)
        prev = res
        mu = (1.0 - s) * mu + s * new
        mu /= np.sum(mu * vol)
    raise NonConvergence(
        f"thermal fixed point stopped at residual {best[1]:.3e} after {max_iter} iterations",
        best[1], hist,
    )


def solve_thermal_equilibrium(p, dim=None, theta=None, grid=None, eq=None, tol=1e-8, max_iter=20000,
                              allow_low_theta=False):
    """mu_{theta,1} from the damped fixed point mu <- normalize(exp(-theta (V_1 + h^mu))).

    Damping s starts at 0.5, halves whenever the residual grows and is relaxed
    by 25% when it shrinks. The extent is chosen so theta zeta_1 >= 27.6 at
    the outer boundary. theta <= 2 is refused unless ``allow_low_theta``.
    """
    if theta is None:
        raise ValueError("theta is required")
    theta = float(theta)
    if theta <= 2 and not allow_low_theta:
        raise ValueError(f"theta = {theta} violates theta > 2")
    if dim is not None and check_dim(dim) != p.dim:
        raise ValueError(f"potential is {p.dim}-dimensional, requested d={dim}")
    grid = grid or GridSpec()
    if eq is None:
        eq = solve_equilibrium(p)
    d = p.dim
    L = grid.extent or _thermal_extent(eq, theta)
    if p.radial and grid.geometry != "cartesian":
        n = int(round(L / grid.h)) if grid.h else 4000
        edges = np.linspace(0.0, L, n + 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
        vol = SPHERE_AREA[d] * np.diff(edges**d) / d
        V = p.V1_radial(centers)

        def update(mu):
            h = RadialMeasure(edges, mu, d).potential_radial(centers)
            u = -theta * (V + h)
            um = np.max(u)
            w = np.exp(u - um)
            Z = np.sum(w * vol)
            c = -(um + math.log(Z)) / theta
            new = w / Z
            res = np.max(np.abs(h + V + np.log(mu) / theta - c))
            return new, res, c

        mu0 = np.exp(-theta * np.maximum(eq.zeta1(np.c_[centers, np.zeros((n, d - 1))]), 0.0))
        mu0 /= np.sum(mu0 * vol)
        mu, res, c, hist = _thermal_iterate(update, mu0, vol, theta, tol, max_iter)
        measure = RadialMeasure(edges, mu, d)
        gs = GridSpec(L / n, L, "radial")
    else:
        if d != 2:
            raise UnsupportedGeometry("Cartesian thermal solve is two-dimensional only")
        h = grid.h or 2 * L / 256
        n = int(math.ceil(2 * L / h))
        lo = -0.5 * n * h * np.ones(2)
        shell = CartesianMeasure(lo, h, np.ones((n, n)))
        C = shell.centers()
        V = p.V1(C).reshape(n, n)
        vol = h * h

        def update(mu):
            hm = CartesianMeasure(lo, h, mu).potential_at_centers()
            u = -theta * (V + hm)
            um = np.max(u)
            w = np.exp(u - um)
            Z = np.sum(w) * vol
            c = -(um + math.log(Z)) / theta
            res = np.max(np.abs(hm + V + np.log(mu) / theta - c))
            return w / Z, res, c

        mu0 = np.exp(-theta * np.maximum(eq.zeta1(C), 0.0)).reshape(n, n)
        mu0 /= np.sum(mu0) * vol
        mu, res, c, hist = _thermal_iterate(update, mu0, vol, theta, tol, max_iter)
        measure = CartesianMeasure(lo, h, mu)
        gs = GridSpec(h, n * h / 2, "cartesian")
    return ThermalEquilibriumData(p, theta, measure, c, res, hist, gs)


def thermal_properties_report(t, eq, radii=(2.0, 10.0)):
    """Numerical values of the basic thermal-measure properties at N=1 scaling."""
    m = t.measure
    d = t.dim
    rep = {"theta": t.theta, "dim": d, "relation_residual": t.relation_residual(), "mass": m.mass}
    rep["sup_density"] = float(np.max(m.values))
    h_cells = t._cell_fields()[0]
    rep["min_potential"] = float(np.min(h_cells))
    rep["max_potential"] = float(np.max(h_cells))
    r = np.linspace(radii[0], radii[1], 400)
    X = np.zeros((r.size, d))
    X[:, 0] = r
    hx = m.potential(X)
    if d == 2:
        rep["max_abs_h_plus_log"] = float(np.max(np.abs(hx + np.log(r))))
    else:
        rep["max_abs_h_plus_log"] = None
    rep["self_energy"] = m.self_energy()
    # potential-difference bound: sup |h_theta - c_theta - h_inf + c_inf| over the thermal grid
    if isinstance(m, RadialMeasure):
        Y = np.zeros((m.centers.size, d))
        Y[:, 0] = m.centers
    else:
        Y = m.centers()
    diff = m.potential(Y) - t.c - eq.measure.potential(Y) + eq.c
    rep["potential_difference_sup"] = float(np.max(np.abs(diff)))
    rep["potential_difference_times_theta"] = rep["potential_difference_sup"] * t.theta
    z = np.maximum(eq.zeta1(Y), 0.0)
    ratio = t.measure.density(Y) / np.exp(-t.theta * z)
    rep["convert_ratio_min"] = float(np.min(ratio))
    rep["convert_ratio_max"] = float(np.max(ratio))
    return rep


def sample_measure(measure, n, rng):
    """i.i.d. draws from a (unit-normalized) discrete measure."""
    d = measure.dim
    if isinstance(measure, RadialMeasure):
        e = measure.edges
        cm = SPHERE_AREA[d] * measure.values * np.diff(e**d) / d
        k = rng.choice(cm.size, size=n, p=cm / cm.sum())
        u = rng.random(n)
        r = (e[k] ** d + u * (e[k + 1] ** d - e[k] ** d)) ** (1.0 / d)
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return r[:, None] * v
    w = measure.values.ravel()
    k = rng.choice(w.size, size=n, p=w / w.sum())
    idx = np.stack(np.unravel_index(k, measure.shape), axis=1)
    return measure.origin + (idx + rng.random((n, d))) * measure.h


# ----------------------------------------------------------------------------
# estimator-style wrappers


class EquilibriumMeasure(BaseEstimator):
    """Estimator wrapper: ``fit(potential)`` solves the obstacle problem.

    After fitting: ``data_`` (EquilibriumData), ``c_``, ``droplet_radius_``.
    ``transform(X)`` returns zeta_N at microscopic points, ``predict(X)`` the
    density of mu_{infty,N}.
    """

    def __init__(self, N=1, method="auto", h=None, extent=None, omega=None, tol=1e-9):
        self.N = N
        self.method = method
        self.h = h
        self.extent = extent
        self.omega = omega
        self.tol = tol

    def fit(self, potential, y=None):
        if not isinstance(potential, PotentialSpec):
            raise TypeError("fit expects a PotentialSpec")
        self.data_ = solve_equilibrium(potential, grid=GridSpec(self.h, self.extent), omega=self.omega,
                                       tol=self.tol, method=self.method)
        self.c_ = self.data_.c
        self.droplet_radius_ = self.data_.droplet_radius_estimate()
        return self

    def transform(self, X):
        return zeta_eval(self.data_, self.N, check_points(X, self.data_.dim))

    def predict(self, X):
        return self.data_.measure_N(self.N).density(X)


class ThermalEquilibriumMeasure(BaseEstimator):
    """Estimator wrapper around :func:`solve_thermal_equilibrium`."""

    def __init__(self, theta=10.0, N=1, h=None, extent=None, tol=1e-8):
        self.theta = theta
        self.N = N
        self.h = h
        self.extent = extent
        self.tol = tol

    def fit(self, potential, y=None):
        self.data_ = solve_thermal_equilibrium(potential, theta=self.theta, grid=GridSpec(self.h, self.extent),
                                               tol=self.tol)
        self.c_ = self.data_.c
        return self

    def predict(self, X):
        return self.data_.density_N(self.N, X)
