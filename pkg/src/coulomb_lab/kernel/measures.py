"""Discrete measures (radial profiles and Cartesian grids) and their potentials.

Radial measures are piecewise constant on radial cells and every quantity
(mass, potential, self-energy) is computed from closed-form shell integrals.
Cartesian measures are piecewise constant on a uniform grid; potentials use
midpoint quadrature with the cell containing the evaluation point replaced by
an equal-volume disk (d=2) or ball (d=3) centered at that point.
"""

from functools import cached_property

import numba
import numpy as np
from scipy.signal import fftconvolve

from .._validation import check_dim, check_points
from .core import SPHERE_AREA, kernel_radial

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class DiscreteMeasure:
    """Common interface: ``density``, ``potential``, ``self_energy``, ``mass``."""

    dim = 2

    @property
    def mass(self):
        raise NotImplementedError

    def density(self, X):
        raise NotImplementedError

    def potential(self, X):
        raise NotImplementedError

    def self_energy(self):
        raise NotImplementedError

    def rescaled(self, N):
        """Microscopic view x -> N^{1/d} x carrying total mass N * mass."""
        return ScaledMeasure(self, N)

    def __call__(self, X):
        return self.density(X)


def _outer_integral(a, b, rho, dim):
    """int_a^b g(s) rho |S| s^{d-1} ds for a constant density rho."""
    if dim == 3:
        return 4.0 * np.pi * rho * (b * b - a * a) / 2.0

    def prim(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = s * s / 2.0 * np.log(s) - s * s / 4.0
        return np.where(s > 0, out, 0.0)

    return -2.0 * np.pi * rho * (prim(b) - prim(a))


def _jn(n, a, b):
    """int_a^b r^n log r dr with the convention 0 log 0 = 0."""

    def prim(r):
        if r <= 0:
            return 0.0
        return r ** (n + 1) * (np.log(r) / (n + 1) - 1.0 / (n + 1) ** 2)

    return prim(b) - prim(a)


class RadialMeasure(DiscreteMeasure):
    """Radially symmetric measure, constant density ``values[k]`` on [edges[k], edges[k+1])."""

    def __init__(self, edges, values, dim):
        self.dim = check_dim(dim)
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.edges.ndim != 1 or self.edges.size != self.values.size + 1:
            raise ValueError("edges must have one more entry than values")
        if self.edges[0] != 0.0 or np.any(np.diff(self.edges) <= 0):
            raise ValueError("edges must start at 0 and increase strictly")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        d = self.dim
        S = SPHERE_AREA[d]
        self._cell_mass = S * self.values * (self.edges[1:] ** d - self.edges[:-1] ** d) / d
        self._cum_mass = np.concatenate([[0.0], np.cumsum(self._cell_mass)])
        outer = _outer_integral(self.edges[:-1], self.edges[1:], self.values, d)
        self._suffix = np.concatenate([np.cumsum(outer[::-1])[::-1], [0.0]])

    @classmethod
    def uniform_ball(cls, radius, mass, dim):
        dim = check_dim(dim)
        vol = SPHERE_AREA[dim] * radius**dim / dim
        return cls([0.0, radius], [mass / vol], dim)

    @property
    def mass(self):
        return float(self._cum_mass[-1])

    @property
    def support_radius(self):
        nz = np.nonzero(self.values > 0)[0]
        return float(self.edges[nz[-1] + 1]) if nz.size else 0.0

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def _cell(self, r):
        k = np.searchsorted(self.edges, r, side="right") - 1
        return np.clip(k, 0, self.values.size - 1)

    def density_radial(self, r):
        r = np.asarray(r, dtype=float)
        k = self._cell(r)
        return np.where(r < self.edges[-1], self.values[k], 0.0)

    def density(self, X):
        X = check_points(X, self.dim)
        return self.density_radial(np.linalg.norm(X, axis=1))

    def mass_within(self, r):
        r = np.asarray(r, dtype=float)
        k = self._cell(r)
        a = self.edges[k]
        rr = np.minimum(r, self.edges[k + 1])
        d = self.dim
        part = SPHERE_AREA[d] * self.values[k] * (np.maximum(rr, a) ** d - a**d) / d
        return np.where(r >= self.edges[-1], self.mass, self._cum_mass[k] + part)

    def potential_radial(self, r):
        """h(r) = g(r) M(r) + int_{|y|>r} g(y) dmu(y) (Newton's theorem)."""
        r = np.asarray(r, dtype=float)
        k = self._cell(r)
        inside = r < self.edges[-1]
        b = self.edges[k + 1]
        lo = np.clip(r, self.edges[k], b)
        partial = np.where(inside, _outer_integral(lo, b, self.values[k], self.dim), 0.0)
        tail = np.where(inside, self._suffix[k + 1], 0.0)
        m_in = self.mass_within(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            near = np.where(m_in > 0, kernel_radial(r, self.dim) * m_in, 0.0)
        return near + partial + tail

    def potential(self, X):
        X = check_points(X, self.dim)
        return self.potential_radial(np.linalg.norm(X, axis=1))

    def potential_at_centers(self):
        return self.potential_radial(self.centers)

    @cached_property
    def _self_energy(self):
        # iint g dmu dmu = 2 int G(r) M(r) dm(r), cell by cell in closed form
        d = self.dim
        S = SPHERE_AREA[d]
        total = 0.0
        for k, rho in enumerate(self.values):
            if rho == 0:
                continue
            a, b = self.edges[k], self.edges[k + 1]
            c = S * rho / d
            Ma = self._cum_mass[k]
            if d == 3:
                total += rho * S * ((Ma - c * a**3) * (b * b - a * a) / 2.0 + c * (b**5 - a**5) / 5.0)
            else:
                total += -rho * S * ((Ma - c * a * a) * _jn(1, a, b) + c * _jn(3, a, b))
        return 2.0 * total

    def self_energy(self):
        return float(self._self_energy)

    def integrate_radial(self, f):
        """int f(|x|) dmu(x) for a vectorized radial function f (8-point Gauss per cell)."""
        a, b = self.edges[:-1], self.edges[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        r = mid[:, None] + half[:, None] * _GL_X[None, :]
        vals = f(r) * SPHERE_AREA[self.dim] * r ** (self.dim - 1)
        return float(np.sum(self.values * half * (vals @ _GL_W)))


def disk_integral(h, dim):
    """int of g over the ball of volume h^d centered at the singularity."""
    if dim == 2:
        eps = h / np.sqrt(np.pi)
        return h * h * (0.5 - np.log(eps))
    eps = (3.0 / (4.0 * np.pi)) ** (1.0 / 3.0) * h
    return 2.0 * np.pi * eps * eps


@numba.njit(cache=True)
def _cartesian_potential(X, C, I, w, origin, h, dim, disk):
    n = X.shape[0]
    out = np.zeros(n)
    idx = np.zeros(dim, dtype=np.int64)
    for p in range(n):
        for k in range(dim):
            idx[k] = int(np.floor((X[p, k] - origin[k]) / h))
        acc = 0.0
        own_w = 0.0
        for j in range(C.shape[0]):
            same = True
            for k in range(dim):
                if I[j, k] != idx[k]:
                    same = False
                    break
            if same:
                own_w = w[j]
                continue
            r2 = 0.0
            for k in range(dim):
                dx = X[p, k] - C[j, k]
                r2 += dx * dx
            if dim == 2:
                acc += -0.5 * np.log(r2) * w[j]
            else:
                acc += w[j] / np.sqrt(r2)
        out[p] = acc + own_w / h**dim * disk
    return out


class CartesianMeasure(DiscreteMeasure):
    """Piecewise-constant density on a uniform grid with cell size h.

    ``values`` has shape ``shape``; cell (i, j[, k]) has center
    ``origin + (index + 1/2) h``.
    """

    def __init__(self, origin, h, values):
        self.values = np.asarray(values, dtype=float)
        self.dim = check_dim(self.values.ndim)
        self.origin = np.asarray(origin, dtype=float).reshape(self.dim)
        self.h = float(h)
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        self.shape = self.values.shape

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def mass(self):
        return float(np.sum(self.values) * self.cell_volume)

    def axes(self):
        return [self.origin[k] + (np.arange(n) + 0.5) * self.h for k, n in enumerate(self.shape)]

    def centers(self):
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def density(self, X):
        X = check_points(X, self.dim)
        idx = np.floor((X - self.origin) / self.h).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=1)
        out = np.zeros(X.shape[0])
        if np.any(ok):
            out[ok] = self.values[tuple(idx[ok].T)]
        return out

    @cached_property
    def _support(self):
        mask = self.values.reshape(-1) > 0
        I = np.stack(np.unravel_index(np.nonzero(mask)[0], self.shape), axis=1).astype(np.int64)
        return self.centers()[mask], I, self.values.reshape(-1)[mask] * self.cell_volume

    def potential(self, X):
        X = check_points(X, self.dim)
        C, I, w = self._support
        return _cartesian_potential(X, C, I, w, self.origin, self.h, self.dim, disk_integral(self.h, self.dim))

    @cached_property
    def _grid_potential(self):
        shape = self.shape
        ax = [np.arange(-(n - 1), n) * self.h for n in shape]
        grids = np.meshgrid(*ax, indexing="ij")
        r = np.sqrt(sum(g * g for g in grids))
        zero = tuple(n - 1 for n in shape)
        r[zero] = 1.0
        ker = kernel_radial(r, self.dim) * self.cell_volume
        ker[zero] = disk_integral(self.h, self.dim)
        full = fftconvolve(self.values, ker, mode="full")
        sl = tuple(slice(n - 1, 2 * n - 1) for n in shape)
        return full[sl]

    def potential_at_centers(self):
        """h^mu on all cell centers via FFT convolution, shape ``shape``."""
        return self._grid_potential.copy()

    @cached_property
    def _self_energy(self):
        return float(np.sum(self.values * self._grid_potential) * self.cell_volume)

    def self_energy(self):
        return self._self_energy

    def integrate(self, f):
        return float(np.sum(f(self.centers()) * self.values.reshape(-1)) * self.cell_volume)


class ScaledMeasure(DiscreteMeasure):
    """mu_N(A) = N mu_1(N^{-1/d} A), evaluated through the base measure."""

    def __init__(self, base, N):
        self.base = base
        self.N = float(N)
        self.dim = base.dim
        self.s = self.N ** (1.0 / self.dim)

    @property
    def mass(self):
        return self.N * self.base.mass

    def density(self, X):
        return self.base.density(check_points(X, self.dim) / self.s)

    def potential(self, X):
        X = check_points(X, self.dim)
        h1 = self.base.potential(X / self.s)
        if self.dim == 2:
            return self.N * h1 - 0.5 * self.N * np.log(self.N) * self.base.mass
        return self.N ** (2.0 / 3.0) * h1

    def self_energy(self):
        e1 = self.base.self_energy()
        if self.dim == 2:
            return self.N**2 * e1 - 0.5 * self.N**2 * np.log(self.N) * self.base.mass**2
        return self.N ** (5.0 / 3.0) * e1

    def rescaled(self, N):
        return ScaledMeasure(self.base, self.N * N)


class ZeroMeasure(DiscreteMeasure):
    def __init__(self, dim):
        self.dim = check_dim(dim)

    @property
    def mass(self):
        return 0.0

    def density(self, X):
        return np.zeros(check_points(X, self.dim).shape[0])

    def potential(self, X):
        return np.zeros(check_points(X, self.dim).shape[0])

    def self_energy(self):
        return 0.0

    def rescaled(self, N):
        return self


def electric_potential(measure, x):
    """h^nu(x) = int g(y - x) nu(dy) for a single point or an (n, d) array."""
    x = np.asarray(x, dtype=float)
    vals = measure.potential(x)
    return float(vals[0]) if x.ndim == 1 else vals


def jellium_energy(config, background, warn=True):
    """F(X, mu) = sum_{i<j} g(x_i - x_j) - sum_i h^mu(x_i) + 1/2 iint g dmu dmu."""
    import warnings

    from .core import as_configuration, pair_energy

    config = as_configuration(config, background.dim)
    P = config.positions
    if warn and config.N > 0 and abs(background.mass - config.N) > 1e-8 * max(config.N, 1):
        warnings.warn(f"background mass {background.mass:.6g} differs from N={config.N}", stacklevel=2)
    cross = float(np.sum(background.potential(P))) if config.N else 0.0
    return pair_energy(P, config.dim) - cross + 0.5 * background.self_energy()
