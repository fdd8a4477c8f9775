"""Ground, KMS and Gibbs states of a free scalar field on a lattice Cauchy surface."""

from .background import Background, CauchyData, ConfigError, InvariantError, RunParams, SurfaceLattice, load_config, load_preset
from .classical import Evolution, commutator_kernel, evolve, frequency_split
from .spectral import WeightedOperator, assemble_C, assemble_phase_space
from .thermal import ground_state, kms_state, kms_verify, weyl_expectation

__version__ = "0.1.0"

__all__ = [
    "Background",
    "CauchyData",
    "ConfigError",
    "Evolution",
    "InvariantError",
    "RunParams",
    "SurfaceLattice",
    "WeightedOperator",
    "assemble_C",
    "assemble_phase_space",
    "commutator_kernel",
    "evolve",
    "frequency_split",
    "ground_state",
    "kms_state",
    "kms_verify",
    "load_config",
    "load_preset",
    "weyl_expectation",
]
