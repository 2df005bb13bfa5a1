"""Dirichlet Green function of a ball, harmonic-measure quadrature on spheres,
and Dirichlet potentials h_omega^nu(x) = int_omega g_omega(x, y) nu(dy).

Normalization follows the kernel: g_omega / c_d is the Green function of -Delta,
so g_omega(x, .) - g(x - .) is harmonic and g_omega vanishes on the sphere.
"""

import numpy as np

from .._validation import check_dim, check_point, check_points
from ..errors import OutOfDomain, Singular
from .core import SPHERE_AREA, fundamental_constant, kernel_radial


def _green_values(xt, Yt, R, dim):
    """g_omega for x (d,) and rows of Y (n, d), both measured from the center."""
    diff = np.sqrt(np.sum((Yt - xt) ** 2, axis=1))
    x2 = float(np.dot(xt, xt))
    y2 = np.sum(Yt * Yt, axis=1)
    Q = np.sqrt(np.maximum(x2 * y2 - 2.0 * R * R * (Yt @ xt) + R**4, 0.0))
    with np.errstate(divide="ignore"):
        if dim == 2:
            val = -np.log(diff) + np.log(Q / R)
        else:
            val = 1.0 / diff - R / Q
    return np.where(y2 < R * R, val, 0.0)


def green_function_ball(center, radius, x, y, dim):
    """Image-charge Green function g_omega(x, y) of the ball B_radius(center).

    d=2: -log|x-y| + log(Q/R); d=3: 1/|x-y| - R/Q, with
    Q = sqrt(|x|^2 |y|^2 - 2 R^2 x.y + R^4) in coordinates centered at ``center``.
    """
    dim = check_dim(dim)
    c = check_point(center, dim)
    xt = check_point(x, dim) - c
    yt = check_point(y, dim) - c
    R = float(radius)
    if np.dot(xt, xt) > R * R or np.dot(yt, yt) > R * R:
        raise OutOfDomain("green_function_ball needs x and y inside the ball")
    if np.array_equal(xt, yt):
        raise Singular("green_function_ball evaluated at x = y")
    if np.dot(yt, yt) == R * R or np.dot(xt, xt) == R * R:
        return 0.0
    return float(_green_values(xt, yt[None, :], R, dim)[0])


def sphere_rule(dim, n):
    """Unit-sphere directions and weights summing to 1.

    d=2: n equispaced angles. d=3: product rule with n_t Gauss-Legendre nodes in
    cos(polar angle) and 2 n_t equispaced azimuths, n_t = round(sqrt(n / 2)),
    exact for spherical harmonics of degree < 2 n_t.
    """
    dim = check_dim(dim)
    n = int(n)
    if n < 2:
        raise ValueError("need at least 2 sphere nodes")
    if dim == 2:
        a = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(a), np.sin(a)], axis=1), np.full(n, 1.0 / n)
    nt = max(1, int(round(np.sqrt(n / 2.0))))
    nphi = 2 * nt
    ct, wt = np.polynomial.legendre.leggauss(nt)
    phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    st = np.sqrt(1.0 - ct**2)
    U = np.stack(
        [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(ct, nphi)], axis=1
    )
    W = np.repeat(wt / 2.0, nphi) / nphi
    return U, W


def poisson_weights(center, radius, x, nodes, dim):
    """Poisson kernel of the ball relative to normalized surface measure.

    R^{d-2} (R^2 - |x~|^2) / |x~ - z~|^d; equals 1 at the center.
    """
    xt = np.asarray(x, dtype=float) - center
    Zt = np.asarray(nodes, dtype=float) - center
    R = float(radius)
    dist = np.sqrt(np.sum((Zt - xt) ** 2, axis=1))
    return R ** (dim - 2) * (R * R - np.dot(xt, xt)) / dist**dim


def harmonic_measure_nodes(center, radius, dim, n, x=None):
    """Quadrature (points, weights) for the harmonic measure of B_radius(center) seen from x.

    Without ``x`` (or x = center) the measure is uniform on the sphere and the
    weights sum to 1. Off-center points reweight the same nodes by the Poisson kernel.
    """
    dim = check_dim(dim)
    c = check_point(center, dim)
    U, W = sphere_rule(dim, n)
    P = c + float(radius) * U
    if x is not None:
        x = check_point(x, dim)
        if np.dot(x - c, x - c) >= float(radius) ** 2:
            raise OutOfDomain("harmonic measure needs x inside the ball")
        W = W * poisson_weights(c, radius, x, P, dim)
    return P, W


def dirichlet_potential_charges(center, radius, x, points, charges=None, dim=None):
    """sum_j q_j g_omega(x, y_j); sources outside the ball contribute 0."""
    Y = check_points(points, dim)
    dim = Y.shape[1] if dim is None else dim
    if Y.shape[0] == 0:
        return 0.0
    q = np.ones(Y.shape[0]) if charges is None else np.asarray(charges, dtype=float)
    c = check_point(center, dim)
    xt = check_point(x, dim) - c
    Yt = Y - c
    if np.any(np.all(Yt == xt, axis=1)):
        raise Singular("source coincides with the evaluation point")
    return float(np.sum(q * _green_values(xt, Yt, float(radius), dim)))


def dirichlet_potential_constant(rho, center, radius, x, dim):
    """h_omega of a constant density rho on the whole ball: c_d rho (R^2 - |x~|^2) / (2d)."""
    dim = check_dim(dim)
    xt = check_point(x, dim) - check_point(center, dim)
    return fundamental_constant(dim) * rho * (radius**2 - float(np.dot(xt, xt))) / (2.0 * dim)


def radial_profile(measure):
    """(edges, values) in current coordinates if the measure is radial about 0, else None."""
    from .measures import RadialMeasure, ScaledMeasure

    if isinstance(measure, RadialMeasure):
        return measure.edges, measure.values
    if isinstance(measure, ScaledMeasure) and isinstance(measure.base, RadialMeasure):
        return measure.base.edges * measure.s, measure.base.values
    return None


def _smooth_panel(p, q, n):
    """Gauss nodes on [p, q] pushed through u -> 3u^2 - 2u^3 (absorbs sqrt endpoint kinks)."""
    u, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u + 1.0)
    w = 0.5 * w
    s = p + (q - p) * (3 * u**2 - 2 * u**3)
    ds = (q - p) * (6 * u - 6 * u**2)
    return s, w * ds


def _sphere_fraction(edge, m, s, dim):
    """Fraction of the sphere |y - c| = s (|c| = m) lying inside |y| < edge."""
    if m == 0.0:
        return (s < edge).astype(float)
    t = np.clip((edge * edge - m * m - s * s) / (2.0 * s * m), -1.0, 1.0)
    if dim == 2:
        return 1.0 - np.arccos(t) / np.pi
    return (t + 1.0) / 2.0


def _dirichlet_center_radial(edges, values, center, R, dim, n):
    m = float(np.linalg.norm(center))
    brk = {0.0, R}
    for e in edges:
        for b in (abs(e - m), e + m):
            if 0.0 < b < R:
                brk.add(b)
    brk = np.array(sorted(brk))
    total = 0.0
    for p, q in zip(brk[:-1], brk[1:]):
        s, w = _smooth_panel(p, q, n)
        dens = np.zeros_like(s)
        for k, rho in enumerate(values):
            if rho != 0.0:
                dens += rho * (_sphere_fraction(edges[k + 1], m, s, dim) - _sphere_fraction(edges[k], m, s, dim))
        gdiff = np.log(R / s) if dim == 2 else 1.0 / s - 1.0 / R
        total += np.sum(w * gdiff * SPHERE_AREA[dim] * s ** (dim - 1) * dens)
    return float(total)


def dirichlet_potential_measure(measure, center, radius, x=None, n_radial=48, n_angular=256):
    """h_omega^mu(x) for a discrete measure restricted to the ball omega.

    A ball inside a single constant-density shell of a radial measure uses
    the torsion formula. With x at the center and a radial measure, uses exact sphere-in-shell
    fractions and a 1-D radial quadrature (near machine precision). Otherwise
    polar quadrature around x with s = l t^2 in each direction, where l is the
    distance to the sphere; accuracy then follows the density's smoothness.
    """
    dim = measure.dim
    c = check_point(center, dim)
    x = c if x is None else check_point(x, dim)
    R = float(radius)
    xt = x - c
    if np.dot(xt, xt) >= R * R:
        raise OutOfDomain("evaluation point must lie inside the ball")
    prof = radial_profile(measure)
    if prof is not None:
        # a ball inside one constant-density shell has the closed-form torsion potential
        m = float(np.linalg.norm(c))
        edges, values = prof
        k = int(np.searchsorted(edges, m, side="right")) - 1
        if 0 <= k < values.size and edges[k] <= m - R and m + R <= edges[k + 1]:
            return dirichlet_potential_constant(values[k], c, R, x, dim)
        if m - R >= edges[-1]:
            return 0.0
    if prof is not None and np.array_equal(x, c):
        return _dirichlet_center_radial(prof[0], prof[1], c, R, dim, n_radial)
    U, W = sphere_rule(dim, n_angular)
    W = W * SPHERE_AREA[dim]
    b = U @ xt
    ell = -b + np.sqrt(b * b + R * R - np.dot(xt, xt))
    t, wt = np.polynomial.legendre.leggauss(n_radial)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    s = ell[:, None] * t[None, :] ** 2
    ds = 2.0 * ell[:, None] * t[None, :] * wt[None, :]
    Y = x[None, None, :] + s[:, :, None] * U[:, None, :]
    flatY = Y.reshape(-1, dim)
    dens = measure.density(flatY).reshape(s.shape)
    g = _green_values(xt, flatY - c, R, dim).reshape(s.shape)
    return float(np.sum(W[:, None] * ds * s ** (dim - 1) * g * dens))
