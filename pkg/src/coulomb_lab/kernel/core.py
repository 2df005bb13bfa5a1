"""Coulomb kernel, configurations and configuration energies."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .._validation import check_dim, check_point, check_positions
from ..errors import Singular

SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}
BALL_VOLUME = {2: np.pi, 3: 4.0 * np.pi / 3.0}


def fundamental_constant(dim):
    """c_d in -Delta g = c_d delta_0: 2 pi for d=2, 4 pi for d=3."""
    return SPHERE_AREA[check_dim(dim)]


def kernel_radial(r, dim):
    """g as a function of the distance r (vectorized, no zero check)."""
    r = np.asarray(r, dtype=float)
    if dim == 2:
        return -np.log(r)
    return 1.0 / r


def coulomb_kernel(x, dim):
    """Coulomb kernel g(x): -log|x| in d=2, 1/|x| in d=3."""
    dim = check_dim(dim)
    x = check_point(x, dim)
    r = float(np.sqrt(np.dot(x, x)))
    if r == 0.0:
        raise Singular("Coulomb kernel evaluated at x = 0")
    return float(kernel_radial(r, dim))


@dataclass(frozen=True)
class Configuration:
    """Immutable snapshot of N particle positions (microscopic coordinates)."""

    positions: np.ndarray
    dim: int

    def __init__(self, positions, dim=None):
        P = np.asarray(positions, dtype=float)
        if dim is None:
            dim = P.shape[-1] if P.ndim == 2 and P.size else 2
        dim = check_dim(dim)
        P = check_positions(P, dim).copy()
        P.setflags(write=False)
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "dim", dim)

    @property
    def N(self):
        return self.positions.shape[0]

    def moved(self, i, new_pos):
        P = self.positions.copy()
        P[i] = check_point(new_pos, self.dim)
        return Configuration(P, self.dim)

    def __len__(self):
        return self.N


def as_configuration(config, dim=None):
    if isinstance(config, Configuration):
        return config
    return Configuration(config, dim)


def _potential_sum(potential, P):
    if potential is None or P.shape[0] == 0:
        return 0.0
    return float(np.sum(potential(P)))


def pair_energy(positions, dim):
    """Sum over unordered pairs of g(x_i - x_j)."""
    P = np.asarray(positions, dtype=float)
    if P.shape[0] < 2:
        return 0.0
    r = pdist(P)
    if np.any(r == 0.0):
        raise Singular("coincident particles in configuration")
    return float(np.sum(kernel_radial(r, dim)))


def total_energy(config, potential=None):
    """H = 1/2 sum_{i != j} g(x_i - x_j) + sum_i V_N(x_i).

    ``potential`` is any callable mapping an (n, d) array to n values
    (e.g. a ScaledPotential) or None for V = 0.
    """
    config = as_configuration(config)
    return pair_energy(config.positions, config.dim) + _potential_sum(potential, config.positions)


def interaction_with(positions, x, dim, skip=None):
    """sum_j g(x - x_j) over rows of ``positions`` (optionally skipping one index)."""
    P = np.asarray(positions, dtype=float)
    if skip is not None:
        P = np.delete(P, skip, axis=0)
    if P.shape[0] == 0:
        return 0.0
    r = np.sqrt(np.sum((P - x) ** 2, axis=1))
    if np.any(r == 0.0):
        raise Singular("move onto an occupied position")
    return float(np.sum(kernel_radial(r, dim)))


def energy_delta(config, i, new_pos, potential=None):
    """H(config with x_i -> new_pos) - H(config) in O(N) work."""
    config = as_configuration(config)
    dim = config.dim
    P = config.positions
    i = int(i)
    if not 0 <= i < config.N:
        raise IndexError(f"particle index {i} out of range for N={config.N}")
    new = check_point(new_pos, dim)
    old = P[i]
    if np.array_equal(new, old):
        return 0.0
    d_int = interaction_with(P, new, dim, skip=i) - interaction_with(P, old, dim, skip=i)
    if potential is None:
        return d_int
    v = potential(np.vstack([new, old]))
    return d_int + float(v[0] - v[1])
