"""Confining potentials V_1, the N-scaling V_N(x) = N^{2/d} V_1(N^{-1/d} x),
local Laplacian bounds and numerical checks of the standing assumptions.

Potential spec JSON (schemaVersion 1)::

    {"schemaVersion": 1, "kind": "quadratic", "dim": 2,
     "parameters": {"coefficient": 0.5},
     "declaredAssumptions": {"A4": true, "A7": true},
     "domain": {}}

Kinds and parameters:

- ``quadratic``: coefficient a > 0, V_1 = a |x|^2.
- ``radial_power``: coefficient a > 0, power p > 0, V_1 = a |x|^p.
- ``log_growth``: coefficient k > 0, V_1 = k log(1 + |x|^2).
- ``radial_profile``: radii (starting at 0), values, derivatives, optional
  monotoneFrom; cubic Hermite interpolation, domain |x| <= radii[-1].
- ``grid`` (d=2 only): origin, h, values (2-D list); bilinear interpolation,
  domain is the grid's node box (``domain`` must repeat it as {"box": [[x0, x1], [y0, y1]]}).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, RegularGridInterpolator

from ._validation import check_dim, check_points
from .errors import OutOfDomain, SchemaError, Unsupported
from .kernel.core import SPHERE_AREA, kernel_radial

SCHEMA_VERSION = 1
ASSUMPTIONS = ("A1", "A2", "A3", "A4", "A5", "A6", "A7")


class PotentialSpec:
    """Base class: a macroscopic potential V_1 on R^d."""

    kind = "abstract"
    radial = False

    def __init__(self, dim, declared=None, domain=None):
        self.dim = check_dim(dim)
        declared = dict(declared or {})
        bad = set(declared) - set(ASSUMPTIONS)
        if bad:
            raise SchemaError(f"unknown assumption flags {sorted(bad)}")
        self.declared = declared
        self.domain = dict(domain or {})

    # radial kinds implement V1_radial, dV1_radial, d2V1_radial
    def V1(self, X):
        X = check_points(X, self.dim)
        return self.V1_radial(np.linalg.norm(X, axis=1))

    def laplacian1(self, X):
        X = check_points(X, self.dim)
        return self.laplacian_radial(np.linalg.norm(X, axis=1))

    def laplacian_radial(self, r):
        r = np.asarray(r, dtype=float)
        d2 = self.d2V1_radial(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = d2 + (self.dim - 1) * self.dV1_radial(r) / r
        return np.where(r > 0, lap, self.dim * self.d2V1_radial(np.zeros_like(r)))

    def max_radius(self):
        """Largest macroscopic radius where V_1 is defined (inf for analytic kinds)."""
        return math.inf

    def parameters(self):
        raise NotImplementedError

    def to_dict(self):
        return {
            "schemaVersion": SCHEMA_VERSION,
            "kind": self.kind,
            "dim": self.dim,
            "parameters": self.parameters(),
            "declaredAssumptions": self.declared,
            "domain": self.domain,
        }

    def scaled(self, N):
        return ScaledPotential(self, N)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, {self.parameters()})"


class Quadratic(PotentialSpec):
    kind = "quadratic"
    radial = True

    def __init__(self, coefficient=0.5, dim=2, declared=None, domain=None):
        super().__init__(dim, declared, domain)
        if not coefficient > 0:
            raise SchemaError("quadratic coefficient must be positive")
        self.a = float(coefficient)

    def V1(self, X):
        X = check_points(X, self.dim)
        return self.a * np.sum(X * X, axis=1)

    def V1_radial(self, r):
        return self.a * np.asarray(r, dtype=float) ** 2

    def dV1_radial(self, r):
        return 2.0 * self.a * np.asarray(r, dtype=float)

    def d2V1_radial(self, r):
        return np.full_like(np.asarray(r, dtype=float), 2.0 * self.a)

    def laplacian1(self, X):
        return np.full(check_points(X, self.dim).shape[0], 2.0 * self.a * self.dim)

    def parameters(self):
        return {"coefficient": self.a}


class RadialPower(PotentialSpec):
    kind = "radial_power"
    radial = True

    def __init__(self, coefficient, power, dim=2, declared=None, domain=None):
        super().__init__(dim, declared, domain)
        if not (coefficient > 0 and power > 0):
            raise SchemaError("radial_power needs coefficient > 0 and power > 0")
        self.a, self.p = float(coefficient), float(power)

    def V1_radial(self, r):
        return self.a * np.asarray(r, dtype=float) ** self.p

    def dV1_radial(self, r):
        return self.a * self.p * np.asarray(r, dtype=float) ** (self.p - 1)

    def d2V1_radial(self, r):
        r = np.asarray(r, dtype=float)
        if self.p == 2:
            return np.full_like(r, 2.0 * self.a)
        with np.errstate(divide="ignore"):
            return self.a * self.p * (self.p - 1) * r ** (self.p - 2)

    def laplacian_radial(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.a * self.p * (self.p + self.dim - 2) * r ** (self.p - 2)

    def parameters(self):
        return {"coefficient": self.a, "power": self.p}


class LogGrowth(PotentialSpec):
    kind = "log_growth"
    radial = True

    def __init__(self, coefficient, dim=2, declared=None, domain=None):
        super().__init__(dim, declared, domain)
        if not coefficient > 0:
            raise SchemaError("log_growth coefficient must be positive")
        self.k = float(coefficient)

    def V1_radial(self, r):
        return self.k * np.log1p(np.asarray(r, dtype=float) ** 2)

    def dV1_radial(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 * self.k * r / (1.0 + r * r)

    def d2V1_radial(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 * self.k * (1.0 - r * r) / (1.0 + r * r) ** 2

    def parameters(self):
        return {"coefficient": self.k}


class RadialProfile(PotentialSpec):
    """Sampled radial potential, cubic Hermite in r (values and derivatives given)."""

    kind = "radial_profile"
    radial = True

    def __init__(self, radii, values, derivatives, dim=2, monotone_from=None, declared=None, domain=None):
        super().__init__(dim, declared, domain)
        r = np.asarray(radii, dtype=float)
        v = np.asarray(values, dtype=float)
        dv = np.asarray(derivatives, dtype=float)
        if r.ndim != 1 or r.size < 2 or r.shape != v.shape or r.shape != dv.shape:
            raise SchemaError("radii, values and derivatives must be 1-D arrays of equal length >= 2")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise SchemaError("radii must start at 0 and increase strictly")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(dv))):
            raise SchemaError("profile values must be finite")
        self.radii, self.values, self.derivatives = r, v, dv
        self.monotone_from = None if monotone_from is None else float(monotone_from)
        if self.monotone_from is not None:
            tail = r >= self.monotone_from
            if np.any(np.diff(v[tail]) <= 0):
                raise SchemaError("profile must increase strictly beyond monotoneFrom")
        self._spl = CubicHermiteSpline(r, v, dv)
        self._d1 = self._spl.derivative(1)
        self._d2 = self._spl.derivative(2)

    @classmethod
    def from_function(cls, f, df, r_max, n=2001, dim=2, **kw):
        r = np.linspace(0.0, r_max, n)
        return cls(r, f(r), df(r), dim=dim, **kw)

    def max_radius(self):
        return float(self.radii[-1])

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self.radii[-1] * (1 + 1e-12)):
            raise OutOfDomain(f"radius beyond sampled profile (max {self.radii[-1]})")
        return r

    def V1_radial(self, r):
        return self._spl(self._check(r))

    def dV1_radial(self, r):
        return self._d1(self._check(r))

    def d2V1_radial(self, r):
        return self._d2(self._check(r))

    def parameters(self):
        out = {
            "radii": self.radii.tolist(),
            "values": self.values.tolist(),
            "derivatives": self.derivatives.tolist(),
        }
        if self.monotone_from is not None:
            out["monotoneFrom"] = self.monotone_from
        return out


class GridSampled(PotentialSpec):
    """Sampled potential on a 2-D node grid; bilinear values, finite-difference Laplacian."""

    kind = "grid"

    def __init__(self, origin, h, values, dim=2, declared=None, domain=None):
        super().__init__(dim, declared, domain)
        if self.dim != 2:
            raise Unsupported("grid-sampled potentials are only supported in d=2")
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 4:
            raise SchemaError("grid values must be a 2-D array with at least 4 nodes per axis")
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("grid values must be finite")
        self.origin = np.asarray(origin, dtype=float).reshape(2)
        self.h = float(h)
        self.axes = [self.origin[k] + self.h * np.arange(n) for k, n in enumerate(self.values.shape)]
        box = [[float(a[0]), float(a[-1])] for a in self.axes]
        if domain and "box" in domain and not np.allclose(domain["box"], box):
            raise SchemaError(f"declared domain {domain['box']} does not match grid extent {box}")
        self.domain = {"box": box}
        self._interp = RegularGridInterpolator(self.axes, self.values, method="linear")
        v = self.values
        lap = np.full_like(v, np.nan)
        lap[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]) / self.h**2
        self._lap = lap
        self._lap_interp = RegularGridInterpolator(
            [a[1:-1] for a in self.axes], lap[1:-1, 1:-1], method="linear"
        )

    @classmethod
    def from_function(cls, f, box, h, **kw):
        ax = [np.arange(b[0], b[1] + h / 2, h) for b in box]
        X, Y = np.meshgrid(*ax, indexing="ij")
        vals = f(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)
        return cls([ax[0][0], ax[1][0]], h, vals, **kw)

    def max_radius(self):
        return float(min(min(abs(b[0]), abs(b[1])) for b in self.domain["box"]))

    def _check(self, X, shrink=0):
        lo = np.array([a[shrink] for a in self.axes])
        hi = np.array([a[-1 - shrink] for a in self.axes])
        if np.any(X < lo - 1e-12) or np.any(X > hi + 1e-12):
            raise OutOfDomain("point outside the sampled potential's domain (no extrapolation)")
        return np.clip(X, lo, hi)

    def V1(self, X):
        X = check_points(X, 2)
        return self._interp(self._check(X))

    def laplacian1(self, X):
        X = check_points(X, 2)
        return self._lap_interp(self._check(X, shrink=1))

    def parameters(self):
        return {"origin": self.origin.tolist(), "h": self.h, "values": self.values.tolist()}


_KINDS = {
    "quadratic": (Quadratic, ["coefficient"]),
    "radial_power": (RadialPower, ["coefficient", "power"]),
    "log_growth": (LogGrowth, ["coefficient"]),
    "radial_profile": (RadialProfile, ["radii", "values", "derivatives"]),
    "grid": (GridSampled, ["origin", "h", "values"]),
}


def potential_from_dict(doc):
    """Build a PotentialSpec from a parsed JSON document; SchemaError on malformed input."""
    if not isinstance(doc, dict):
        raise SchemaError("potential spec must be a JSON object")
    version = doc.get("schemaVersion", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported potential schemaVersion {version}")
    kind = doc.get("kind")
    if kind not in _KINDS:
        raise SchemaError(f"unknown potential kind {kind!r}; expected one of {sorted(_KINDS)}")
    if "dim" not in doc:
        raise SchemaError("potential spec needs 'dim'")
    try:
        dim = check_dim(doc["dim"])
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise SchemaError("'parameters' must be an object")
    cls, required = _KINDS[kind]
    missing = [k for k in required if k not in params]
    if missing:
        raise SchemaError(f"{kind} potential missing parameters {missing}")
    kw = {k: params[k] for k in required}
    if kind == "radial_profile" and "monotoneFrom" in params:
        kw["monotone_from"] = params["monotoneFrom"]
    declared = doc.get("declaredAssumptions", {})
    if not isinstance(declared, dict):
        raise SchemaError("'declaredAssumptions' must be an object")
    try:
        return cls(dim=dim, declared=declared, domain=doc.get("domain", {}), **kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"invalid {kind} parameters: {exc}") from exc


def load_potential_spec(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return potential_from_dict(doc)


def save_potential_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)


class ScaledPotential:
    """V_N(x) = N^{2/d} V_1(N^{-1/d} x), callable on (n, d) arrays."""

    def __init__(self, base, N):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.base = base
        self.N = int(N)
        self.dim = base.dim
        self.s = self.N ** (1.0 / self.dim)
        self.amp = self.N ** (2.0 / self.dim)

    def __call__(self, X):
        X = check_points(X, self.dim)
        if isinstance(self.base, Quadratic):
            return self.base.a * np.sum(X * X, axis=1)
        return self.amp * self.base.V1(X / self.s)

    def laplacian(self, X):
        # Delta V_N(x) = Delta V_1(N^{-1/d} x)
        return self.base.laplacian1(check_points(X, self.dim) / self.s)


def eval_potential(p, x):
    """V_N(x) for a ScaledPotential and a single point or (n, d) array."""
    x = np.asarray(x, dtype=float)
    vals = p(x)
    return float(vals[0]) if x.ndim == 1 else vals


def ball_lattice(dim, n=11):
    """n^d cube lattice points on [-1, 1]^d restricted to the closed unit ball."""
    t = np.linspace(-1.0, 1.0, n)
    G = np.stack([g.ravel() for g in np.meshgrid(*([t] * dim), indexing="ij")], axis=1)
    return G[np.sum(G * G, axis=1) <= 1.0 + 1e-12]


def laplacian_bound(p, x, n=11):
    """M_{x,N}: sup of max(Delta V_1, 0) over the macroscopic unit ball around N^{-1/d} x."""
    if isinstance(p, PotentialSpec):
        p = ScaledPotential(p, 1)
    x = np.asarray(x, dtype=float).reshape(p.dim)
    y = x / p.s
    if isinstance(p.base, Quadratic):
        return max(2.0 * p.base.a * p.dim, 0.0)
    pts = y + ball_lattice(p.dim, n)
    return float(max(np.max(p.base.laplacian1(pts)), 0.0))


@dataclass
class TemperatureSchedule:
    """beta_N for each configured N (theta_N = beta_N N^{2/d})."""

    betaOfN: dict
    dim: int = 2

    def theta(self, N):
        return float(self.betaOfN[N]) * N ** (2.0 / self.dim)

    @property
    def theta_star(self):
        return min(self.theta(N) for N in self.betaOfN)

    @classmethod
    def constant_theta(cls, theta, Ns, dim=2):
        return cls({int(N): theta / N ** (2.0 / dim) for N in Ns}, dim)


@dataclass
class ValidationReport:
    entries: dict = field(default_factory=dict)

    def set(self, name, status, **info):
        self.entries[name] = {"status": status, **info}

    @property
    def passed(self):
        return all(e["status"] in ("pass", "declared") for e in self.entries.values())

    def status(self, name):
        return self.entries[name]["status"]

    def failures(self):
        return [k for k, e in self.entries.items() if e["status"] == "fail"]

    def to_dict(self):
        return {"passed": self.passed, "entries": self.entries}


def _radial_tail(f_log, r0, r1, dim, n=4001):
    """int_{r0 <= |x| <= r1} exp(f_log(r)) dx on a log-spaced grid, plus a remainder estimate."""
    u = np.linspace(np.log(r0), np.log(r1), n)
    r = np.exp(u)
    lf = f_log(r)
    vals = np.exp(lf) * SPHERE_AREA[dim] * r**dim
    integral = float(np.trapezoid(vals, u)) if hasattr(np, "trapezoid") else float(np.trapz(vals, u))
    # one-term Laplace remainder: f(R) |S| R^{d-1} / rate, rate = -(d/dr) log(f r^{d-1})
    # log of the radial integrand f |S| r^{d-1}, kept in log space so a fast
    # decay that underflows vals does not poison the rate
    lrad = lf + (dim - 1) * u
    rate = -(lrad[-1] - lrad[-2]) / (r[-1] - r[-2])
    if not np.isfinite(integral):
        return integral, math.inf
    remainder = float(SPHERE_AREA[dim] * np.exp(lrad[-1]) / rate) if rate > 0 else math.inf
    return integral, remainder


def validate_assumptions(p, schedule, equilibrium=None, cutoff=50.0):
    """Check (A1)-(A7) as far as they are numerically checkable.

    (A1) exactly; (A2)/(A3) by tail integrals on a log radial grid to ``cutoff``
    with a one-term remainder; (A5)/(A6) against an equilibrium solution (computed
    if not supplied and the potential is radial); (A4)/(A7) are declarations, with
    a growth spot check for (A7) in d=3.
    """
    rep = ValidationReport()
    d = p.dim
    theta_star = schedule.theta_star
    rep.set("A1", "pass" if theta_star > 2 else "fail", value=theta_star, detail="theta_* > 2")

    if p.radial and p.max_radius() >= cutoff:
        r = np.geomspace(1.0, cutoff, 400)
        w = p.V1_radial(r) + kernel_radial(r, d)
        grow = float(w[-1] - np.max(w[: len(w) // 2]))
        rep.set("A2", "pass" if grow > 1.0 else "fail", value=grow,
                detail=f"(V1+g)({cutoff}) minus max over [1, {cutoff ** 0.5:.3g}]")
        ts = theta_star
        if d == 2:
            t1, e1 = _radial_tail(lambda r: -ts / 2 * (p.V1_radial(r) - np.log(r)), 1.0, cutoff, d)
            t2, e2 = _radial_tail(
                lambda r: -ts * (p.V1_radial(r) - np.log(r)) + np.log(r * np.log(np.maximum(r, 1 + 1e-300)) ** 2 + 1e-300),
                1.0, cutoff, d,
            )
            total, rem = t1 + t2, e1 + e2
        else:
            total, rem = _radial_tail(lambda r: -ts / 2 * p.V1_radial(r), 1.0, cutoff, d)
        ok = np.isfinite(total) and np.isfinite(rem) and rem <= 1e-3 * max(total, 1e-300) + 1e-12
        rep.set("A3", "pass" if ok else "fail", value=total, remainder=rem, cutoff=cutoff)
    else:
        for name in ("A2", "A3"):
            rep.set(name, "declared" if p.declared.get(name) else "unchecked",
                    detail="potential not defined out to the tail cutoff")

    rep.set("A4", "declared" if p.declared.get("A4", p.radial) else "unchecked",
            detail="C^{1,1} droplet boundary cannot be checked numerically"
            + ("; radial droplet is a ball or annulus" if p.radial else ""))

    if equilibrium is None and p.radial and isinstance(p, Quadratic):
        from .equilibrium import solve_equilibrium

        equilibrium = solve_equilibrium(p, d)
    if equilibrium is not None:
        a5, a6 = _check_a5_a6(p, equilibrium)
        rep.set("A5", "pass" if a5 > 0 else "fail", value=a5, detail="min Delta V_1 near the droplet")
        rep.set("A6", "pass" if a6 > 0 else "fail", value=a6,
                detail="fitted alpha = min zeta_1 / min(dist^2, 1) on a grid")
    else:
        for name in ("A5", "A6"):
            rep.set(name, "declared" if p.declared.get(name) else "unchecked", detail="no equilibrium supplied")

    if d == 3:
        status = "declared" if p.declared.get("A7") else "unchecked"
        if p.radial and p.max_radius() >= cutoff:
            rr = np.array([cutoff / 4, cutoff / 2, cutoff])
            ratios = [p.V1_radial(np.array([x]))[0] / max(laplacian_bound(p, np.array([x, 0, 0])), 1e-300) for x in rr]
            status = "pass" if np.all(np.diff(ratios) > 0) else "fail"
            rep.set("A7", status, value=[float(v) for v in ratios], detail="V_1 / M_{x,1} at growing radii")
        else:
            rep.set("A7", status)
    else:
        rep.set("A7", "declared", detail="only required in d >= 3")
    return rep


def _check_a5_a6(p, eq, n=121):
    R = eq.droplet_radius_estimate()
    ext = max(2.0 * R, R + 1.5)
    if p.max_radius() < ext:
        ext = p.max_radius()
    if p.radial:
        r = np.linspace(0.0, ext, 4 * n)
        X = np.zeros((r.size, p.dim))
        X[:, 0] = r
    else:
        t = np.linspace(-ext, ext, n)
        G = np.meshgrid(t, t, indexing="ij")
        X = np.stack([g.ravel() for g in G], axis=1)
        X = X[np.linalg.norm(X, axis=1) <= ext]
    dist = eq.distance_to_droplet(X)
    near = dist <= 0.1
    lap = p.laplacian1(X[near]) if np.any(near) else np.array([np.inf])
    z = eq.zeta1(X)
    far = dist > 1e-9
    alpha = float(np.min(z[far] / np.minimum(dist[far] ** 2, 1.0))) if np.any(far) else math.inf
    return float(np.min(lap)), alpha
