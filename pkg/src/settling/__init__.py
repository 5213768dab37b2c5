"""Mean sedimentation velocity of well-separated sphere suspensions in Stokes flow."""

from .configs import (EmpiricalMeasures, ParticleConfiguration, assign_cubes,
                      generate_cubic_lattice, generate_hardcore_poisson,
                      generate_shifted_example, min_separation, winf_upper_bound)
from .freespace import (EnergyBreakdown, assemble_energy, diagonal_energy,
                        evaluate_vN1, pair_interaction, sed_velocity_estimate,
                        stokes_velocity)
from .geometry import ConfigurationError, DensityField, Domain
from .kernels import CubeField, KernelField, SphereField, cube_field, \
    elementary_field, oseen, sphere_field
from .periodic import a_per_estimate, lattice_energy, torus_vs_freespace

__version__ = "0.1.0"

__all__ = [
    "EmpiricalMeasures", "ParticleConfiguration", "assign_cubes",
    "generate_cubic_lattice", "generate_hardcore_poisson",
    "generate_shifted_example", "min_separation", "winf_upper_bound",
    "EnergyBreakdown", "assemble_energy", "diagonal_energy", "evaluate_vN1",
    "pair_interaction", "sed_velocity_estimate", "stokes_velocity",
    "ConfigurationError", "DensityField", "Domain",
    "CubeField", "KernelField", "SphereField", "cube_field",
    "elementary_field", "oseen", "sphere_field",
    "a_per_estimate", "lattice_energy", "torus_vs_freespace",
]
