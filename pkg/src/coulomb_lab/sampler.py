"""Gibbs-measure sampling: single-particle Metropolis chains and an exact
rejection sampler for N <= 3.

Random numbers come from Philox streams keyed by (seed, chain id) with the
counter set from the block index, so a chain's output is a pure function of
(seed, chain id, parameters, schedule) and independent of thread scheduling.
"""

import hashlib
import json
import math
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator

from ._validation import check_dim, check_positions, check_sample_array
from .equilibrium import sample_measure, solve_thermal_equilibrium
from .errors import EmptySampleSet, EnvelopeFailure, SchemaError
from .kernel.core import Configuration, total_energy
from .potential import GridSampled, LogGrowth, PotentialSpec, Quadratic, RadialPower, RadialProfile, ScaledPotential

BLOCK = 4096
MAGIC = b"CLSAMPL1"

K_QUADRATIC, K_POWER, K_LOG, K_HERMITE, K_GRID = 0, 1, 2, 3, 4


@dataclass
class GasParams:
    """N, beta, dimension and V_1; optional equilibrium / thermal data for initialization."""

    N: int
    beta: float
    dim: int
    potential: PotentialSpec
    equilibrium: object = None
    thermal: object = None

    def __post_init__(self):
        self.N = int(self.N)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        self.dim = check_dim(self.dim)
        if self.potential.dim != self.dim:
            raise ValueError("potential dimension does not match params.dim")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        self.beta = float(self.beta)

    @property
    def theta(self):
        return self.beta * self.N ** (2.0 / self.dim)

    @property
    def scaled_potential(self):
        return ScaledPotential(self.potential, self.N)

    def check_theta(self, confinement=False):
        if self.theta <= 2:
            msg = f"theta = beta N^(2/d) = {self.theta:.4g} <= 2"
            if confinement:
                raise ValueError(msg + " (confinement experiments need theta > 2)")
            warnings.warn(msg, stacklevel=2)

    def to_dict(self):
        return {"N": self.N, "beta": self.beta, "dim": self.dim, "potential": self.potential.to_dict()}

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _numba_potential(params):
    """Flatten V_N into (kind, float params, arrays) for the compiled kernel."""
    p = params.potential
    N, d = params.N, params.dim
    amp, s = N ** (2.0 / d), N ** (1.0 / d)
    empty = np.zeros(1)
    empty2 = np.zeros((1, 1))
    if isinstance(p, Quadratic):
        return K_QUADRATIC, np.array([p.a, amp, s, 0.0]), empty, empty, empty, empty2
    if isinstance(p, RadialPower):
        return K_POWER, np.array([p.a, amp, s, p.p]), empty, empty, empty, empty2
    if isinstance(p, LogGrowth):
        return K_LOG, np.array([p.k, amp, s, 0.0]), empty, empty, empty, empty2
    if isinstance(p, RadialProfile):
        return K_HERMITE, np.array([0.0, amp, s, 0.0]), p.radii, p.values, p.derivatives, empty2
    if isinstance(p, GridSampled):
        fp = np.array([p.origin[0], p.origin[1], p.h, amp, s])
        return K_GRID, fp, empty, empty, empty, p.values
    raise SchemaError(f"sampler does not support potential kind {p.kind}")


@numba.njit(cache=True)
def _vn(kind, fp, ra, va, da, grid, x):
    """V_N(x); returns nan outside the potential's domain."""
    d = x.shape[0]
    r2 = 0.0
    for k in range(d):
        r2 += x[k] * x[k]
    if kind == 0:
        return fp[0] * r2
    if kind == 4:
        amp, s = fp[3], fp[4]
        u = (x[0] / s - fp[0]) / fp[2]
        v = (x[1] / s - fp[1]) / fp[2]
        i = int(math.floor(u))
        j = int(math.floor(v))
        if i < 0 or j < 0 or i >= grid.shape[0] - 1 or j >= grid.shape[1] - 1:
            if not (u == grid.shape[0] - 1 or v == grid.shape[1] - 1):
                return np.nan
            i = min(i, grid.shape[0] - 2)
            j = min(j, grid.shape[1] - 2)
        fu = u - i
        fv = v - j
        val = (grid[i, j] * (1 - fu) * (1 - fv) + grid[i + 1, j] * fu * (1 - fv)
               + grid[i, j + 1] * (1 - fu) * fv + grid[i + 1, j + 1] * fu * fv)
        return amp * val
    amp, s = fp[1], fp[2]
    r = math.sqrt(r2) / s
    if kind == 1:
        return amp * fp[0] * r ** fp[3]
    if kind == 2:
        return amp * fp[0] * math.log1p(r * r)
    # cubic Hermite radial profile
    n = ra.shape[0]
    if r > ra[n - 1]:
        return np.nan
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ra[mid] <= r:
            lo = mid
        else:
            hi = mid
    hseg = ra[hi] - ra[lo]
    t = (r - ra[lo]) / hseg
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    return amp * (h00 * va[lo] + h10 * hseg * da[lo] + h01 * va[hi] + h11 * hseg * da[hi])


@numba.njit(cache=True, nogil=True)
def _mh_block(P, beta, step, idx, Z, U, kind, fp, ra, va, da, grid):
    """Run len(idx) single-particle Metropolis steps in place.

    Returns (accepted, rejected_out_of_domain, energy change).
    """
    N, d = P.shape
    new = np.empty(d)
    acc = 0
    ood = 0
    dE = 0.0
    for t in range(idx.shape[0]):
        i = idx[t]
        for k in range(d):
            new[k] = P[i, k] + step * Z[t, k]
        vn = _vn(kind, fp, ra, va, da, grid, new)
        if vn != vn:
            ood += 1
            continue
        delta = vn - _vn(kind, fp, ra, va, da, grid, P[i])
        if d == 2:
            # sum of log ratios, one log per 8 pairs to save transcendental calls
            prod = 1.0
            cnt = 0
            acc_log = 0.0
            for j in range(N):
                if j == i:
                    continue
                a2 = 0.0
                b2 = 0.0
                for k in range(d):
                    da_ = new[k] - P[j, k]
                    db_ = P[i, k] - P[j, k]
                    a2 += da_ * da_
                    b2 += db_ * db_
                prod *= b2 / a2
                cnt += 1
                if cnt == 8:
                    acc_log += math.log(prod)
                    prod = 1.0
                    cnt = 0
            acc_log += math.log(prod)
            delta += 0.5 * acc_log
        else:
            for j in range(N):
                if j == i:
                    continue
                a2 = 0.0
                b2 = 0.0
                for k in range(d):
                    da_ = new[k] - P[j, k]
                    db_ = P[i, k] - P[j, k]
                    a2 += da_ * da_
                    b2 += db_ * db_
                delta += 1.0 / math.sqrt(a2) - 1.0 / math.sqrt(b2)
        if beta == 0.0 or U[t] < math.exp(-beta * delta):
            for k in range(d):
                P[i, k] = new[k]
            acc += 1
            dE += delta
    return acc, ood, dE


@dataclass
class ChainState:
    """Mutable chain state: configuration, cached energy, step scale and counters."""

    positions: np.ndarray
    energy: float
    stepScale: float = 0.5
    seed: int = 0
    chainId: int = 0
    block: int = 0
    proposed: int = 0
    accepted: int = 0
    outOfDomain: int = 0
    trace: list = field(default_factory=list)
    maxEnergyDrift: float = 0.0

    @property
    def config(self):
        return Configuration(self.positions)

    @property
    def acceptance(self):
        return self.accepted / self.proposed if self.proposed else float("nan")


def _stream(seed, chain_id, block):
    bg = np.random.Philox(key=np.array([seed, chain_id], dtype=np.uint64), counter=np.array([0, block, 0, 0], dtype=np.uint64))
    return np.random.Generator(bg)


def init_configuration(params, seed, chain_id=0):
    """Initial ChainState: i.i.d. from mu_theta if supplied, else mu_infty, else a uniform box."""
    rng = _stream(seed, chain_id, 2**63)
    N, d = params.N, params.dim
    s = N ** (1.0 / d)
    if params.thermal is not None:
        X = s * sample_measure(params.thermal.measure, N, rng)
    elif params.equilibrium is not None:
        X = s * sample_measure(params.equilibrium.measure, N, rng)
    else:
        X = s * rng.uniform(-1.0, 1.0, size=(N, d))
    E = total_energy(Configuration(X, d), params.scaled_potential)
    return ChainState(positions=X, energy=E, seed=int(seed), chainId=int(chain_id))


def _run_steps(state, params, n_steps, block_size=BLOCK):
    kind, fp, ra, va, da, grid = _numba_potential(params)
    N, d = params.N, params.dim
    done = 0
    while done < n_steps:
        m = min(block_size, n_steps - done)
        rng = _stream(state.seed, state.chainId, state.block)
        idx = rng.integers(0, N, size=m)
        Z = rng.standard_normal((m, d))
        U = rng.random(m)
        acc, ood, dE = _mh_block(state.positions, params.beta, state.stepScale, idx, Z, U, kind, fp, ra, va, da, grid)
        state.block += 1
        state.proposed += m
        state.accepted += acc
        state.outOfDomain += ood
        state.energy += dE
        done += m
    return state


def mh_step(state, params):
    """One Metropolis step (uniform particle, Gaussian proposal of scale stepScale)."""
    return _run_steps(state, params, 1, block_size=1)


def check_energy(state, params, rtol=1e-8):
    E = total_energy(Configuration(state.positions, params.dim), params.scaled_potential)
    drift = abs(E - state.energy) / max(1.0, abs(E))
    state.maxEnergyDrift = max(state.maxEnergyDrift, drift)
    if drift > rtol:
        raise AssertionError(f"cached energy drifted by {drift:.3e} (relative)")
    state.energy = E
    return drift


def integrated_autocorr_time(x, c=5.0):
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return 1.0
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    taus = 2.0 * np.cumsum(acf) - 1.0
    window = np.arange(n) >= c * taus
    m = int(np.argmax(window)) if np.any(window) else n - 1
    return float(max(taus[m], 1.0))


@dataclass
class SampleSet:
    """Thinned configurations, shape (M, N, d), with a JSON-serializable header."""

    positions: np.ndarray
    header: dict

    def __post_init__(self):
        self.positions = check_sample_array(self.positions)

    @property
    def M(self):
        return self.positions.shape[0]

    @property
    def N(self):
        return self.positions.shape[1]

    @property
    def dim(self):
        return self.positions.shape[2]

    def __len__(self):
        return self.M

    def save(self, path):
        """Layout: 8-byte magic, uint32 LE header length, UTF-8 JSON header,
        then float64 little-endian positions in row-major (M, N, d) order."""
        hdr = dict(self.header)
        hdr["shape"] = list(self.positions.shape)
        hdr["dtype"] = "<f8"
        raw = json.dumps(hdr, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(np.ascontiguousarray(self.positions, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if not magic:
                raise EmptySampleSet(f"{path}: empty file")
            if magic != MAGIC:
                raise SchemaError(f"{path}: not a SampleSet file")
            (n,) = struct.unpack("<I", fh.read(4))
            hdr = json.loads(fh.read(n).decode())
            data = np.frombuffer(fh.read(), dtype="<f8")
        shape = tuple(hdr["shape"])
        if not shape or shape[0] == 0:
            raise EmptySampleSet(f"{path}: no configurations")
        if data.size != int(np.prod(shape)):
            raise SchemaError(f"{path}: payload size does not match header shape {shape}")
        return cls(data.reshape(shape).copy(), hdr)

    def digest(self):
        return hashlib.sha256(np.ascontiguousarray(self.positions, dtype="<f8").tobytes()).hexdigest()


def merge_samplesets(sets):
    """Order-independent merge: concatenation sorted by (chainId, sampleIndex)."""
    sets = sorted(sets, key=lambda s: s.header.get("chainId", 0))
    if not sets:
        raise ValueError("nothing to merge")
    X = np.concatenate([s.positions for s in sets], axis=0)
    hdr = dict(sets[0].header)
    hdr["chains"] = [
        {k: s.header.get(k) for k in ("chainId", "acceptance", "autocorrelation", "stepScale", "samples")}
        for s in sets
    ]
    hdr["chainId"] = None
    hdr["samples"] = int(X.shape[0])
    hdr["acceptance"] = float(np.mean([s.header["acceptance"] for s in sets]))
    hdr["autocorrelation"] = float(np.max([s.header["autocorrelation"] for s in sets]))
    return SampleSet(X, hdr)


def default_schedule(N, samples):
    return {"burnIn": 200 * N, "thin": N, "samples": int(samples)}


def run_chain(state, params, schedule, adapt=True, energy_check_every=50):
    """Burn in (adapting stepScale toward 0.23-0.5 acceptance), then freeze
    the scale and record ``samples`` configurations, ``thin`` sweeps apart.
    Units of burnIn and thin are sweeps (N single-particle steps)."""
    N = params.N
    burn, thin, M = int(schedule["burnIn"]), int(schedule["thin"]), int(schedule["samples"])
    if M <= 0 or thin <= 0 or burn < 0:
        raise ValueError("schedule must be positive")
    chunk = 10
    done = 0
    while done < burn:
        m = min(chunk, burn - done)
        p0, a0 = state.proposed, state.accepted
        _run_steps(state, params, m * N)
        done += m
        if adapt:
            rate = (state.accepted - a0) / max(1, state.proposed - p0)
            if rate < 0.23 or rate > 0.5:
                state.stepScale *= math.exp(rate - 0.35)
                state.stepScale = float(np.clip(state.stepScale, 1e-4, 1e4))
    frozen = state.stepScale
    p0, a0 = state.proposed, state.accepted
    out = np.empty((M, N, params.dim))
    energies = np.empty(M)
    for k in range(M):
        _run_steps(state, params, thin * N)
        out[k] = state.positions
        energies[k] = state.energy
        if energy_check_every and (k + 1) % energy_check_every == 0:
            check_energy(state, params)
    check_energy(state, params)
    assert state.stepScale == frozen
    state.trace = energies.tolist()
    acc = (state.accepted - a0) / max(1, state.proposed - p0)
    hdr = {
        "kind": "mcmc",
        "paramsDigest": params.digest(),
        "params": params.to_dict(),
        "seed": state.seed,
        "chainId": state.chainId,
        "schedule": {"burnIn": burn, "thin": thin, "samples": M},
        "acceptance": float(acc),
        "autocorrelation": integrated_autocorr_time(energies),
        "stepScale": frozen,
        "samples": M,
        "outOfDomainRejections": int(state.outOfDomain),
        "maxEnergyDrift": float(state.maxEnergyDrift),
    }
    return SampleSet(out, hdr)


def sample_chains(params, schedule, seed=0, chains=1, threads=1):
    """Run independent chains (chain ids 0..chains-1) and merge them."""

    def one(cid):
        st = init_configuration(params, seed, cid)
        return run_chain(st, params, schedule)

    if threads > 1 and chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            sets = list(ex.map(one, range(chains)))
    else:
        sets = [one(c) for c in range(chains)]
    return merge_samplesets(sets)


# ----------------------------------------------------------------------------
# exact rejection sampler for N <= 3


def _envelope(params):
    th = params.thermal
    if th is None:
        th = solve_thermal_equilibrium(params.potential, theta=max(params.theta, 0.25), eq=params.equilibrium,
                                       allow_low_theta=True)
    return th


def rejection_sample_small_N(params, seed, count, batch=20000, max_batches=100000):
    """Exact i.i.d. samples of the Gibbs measure for N <= 3.

    Proposals are i.i.d. from the product of the N-scaled thermal measure at
    theta = beta N^{2/d}; the log weight -beta H - sum log q(x_i) is bounded by
    a grid search plus local optimization, inflated by a 0.5 margin. Any
    proposal exceeding the bound raises EnvelopeFailure. Mass of the thermal
    grid's exterior (below 1e-12) is not proposed.
    """
    N, d = params.N, params.dim
    if N > 3:
        raise ValueError("rejection sampling is limited to N <= 3")
    th = _envelope(params)
    s = N ** (1.0 / d)
    V = params.scaled_potential
    dens1 = th.measure

    def logq(X):
        # density of x / s under the unit-mass measure, pushed to microscopic scale
        return np.log(np.maximum(dens1.density(X / s), 1e-300)) - d * math.log(s)

    def logw(batchX):
        M = batchX.shape[0]
        flat = batchX.reshape(M * N, d)
        lw = -params.beta * V(flat).reshape(M, N).sum(1) - logq(flat).reshape(M, N).sum(1)
        for i in range(N):
            for j in range(i + 1, N):
                r = np.linalg.norm(batchX[:, i] - batchX[:, j], axis=1)
                g = -np.log(r) if d == 2 else 1.0 / r
                lw -= params.beta * g
        return lw

    rng = _stream(seed, 0, 2**62)
    probe = s * sample_measure(dens1, 200000 * N, rng).reshape(200000, N, d)
    lw = logw(probe)
    best = np.argsort(lw)[-20:]
    bound = float(np.max(lw))
    for k in best:
        res = minimize(lambda v: -logw(v.reshape(1, N, d))[0], probe[k].ravel(), method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
        if np.isfinite(res.fun):
            bound = max(bound, -float(res.fun))
    bound += 0.5
    out = []
    proposed = 0
    for b in range(max_batches):
        rb = _stream(seed, 1, b)
        X = s * sample_measure(dens1, batch * N, rb).reshape(batch, N, d)
        lw = logw(X)
        if np.any(lw > bound):
            raise EnvelopeFailure(f"log weight {np.max(lw):.4f} exceeds envelope bound {bound:.4f}")
        keep = np.log(rb.random(batch)) < lw - bound
        proposed += batch
        out.append(X[keep])
        if sum(len(o) for o in out) >= count:
            break
    Y = np.concatenate(out, axis=0)[:count]
    hdr = {
        "kind": "rejection",
        "paramsDigest": params.digest(),
        "params": params.to_dict(),
        "seed": int(seed),
        "chainId": 0,
        "samples": int(Y.shape[0]),
        "acceptance": float(sum(len(o) for o in out) / proposed),
        "autocorrelation": 1.0,
        "envelopeLogBound": bound,
        "envelopeTheta": th.theta,
    }
    return SampleSet(Y, hdr)


class CoulombGasSampler(BaseEstimator):
    """Estimator wrapper: ``fit(potential)`` runs the chains; samples in ``samples_``."""

    def __init__(self, N=16, beta=1.0, samples=1000, burn_in=None, thin=None, chains=1, seed=0, threads=1):
        self.N = N
        self.beta = beta
        self.samples = samples
        self.burn_in = burn_in
        self.thin = thin
        self.chains = chains
        self.seed = seed
        self.threads = threads

    def fit(self, potential, y=None, equilibrium=None):
        params = GasParams(self.N, self.beta, potential.dim, potential, equilibrium=equilibrium)
        sched = default_schedule(self.N, self.samples)
        if self.burn_in is not None:
            sched["burnIn"] = self.burn_in
        if self.thin is not None:
            sched["thin"] = self.thin
        self.samples_ = sample_chains(params, sched, self.seed, self.chains, self.threads)
        self.acceptance_ = self.samples_.header["acceptance"]
        return self

    def transform(self, X=None):
        return self.samples_.positions
