"""Exact-formula substrate: kernel, energies, potentials, ball Green functions."""

from .core import (
    Configuration,
    as_configuration,
    coulomb_kernel,
    energy_delta,
    fundamental_constant,
    kernel_radial,
    pair_energy,
    total_energy,
)
from .green import (
    dirichlet_potential_charges,
    dirichlet_potential_constant,
    dirichlet_potential_measure,
    green_function_ball,
    harmonic_measure_nodes,
    poisson_weights,
    sphere_rule,
)
from .measures import (
    CartesianMeasure,
    DiscreteMeasure,
    RadialMeasure,
    ScaledMeasure,
    ZeroMeasure,
    electric_potential,
    jellium_energy,
)

__all__ = [
    "CartesianMeasure",
    "Configuration",
    "DiscreteMeasure",
    "RadialMeasure",
    "ScaledMeasure",
    "ZeroMeasure",
    "as_configuration",
    "coulomb_kernel",
    "dirichlet_potential_charges",
    "dirichlet_potential_constant",
    "dirichlet_potential_measure",
    "electric_potential",
    "energy_delta",
    "fundamental_constant",
    "green_function_ball",
    "harmonic_measure_nodes",
    "jellium_energy",
    "kernel_radial",
    "pair_energy",
    "poisson_weights",
    "sphere_rule",
    "total_energy",
]
