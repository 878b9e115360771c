"""Intensive temperature of blocks of Gaussian harmonic lattices."""

__version__ = "0.1.0"

from .analysis import (
    block_size_sweep,
    correlation_length,
    intensive_fidelity,
    phase_diagram,
    slope_fit,
)
from .blocks import (
    BlockSelection,
    core_shell_split,
    effective_potential,
    padded_reference,
    reference_thermal,
)
from .gaussian import (
    CovarianceMatrix,
    Partition,
    entropy,
    fidelity,
    log_negativity,
    mutual_information,
    reduce,
    symplectic_spectrum,
    thermal_covariance,
)
from .lattice import LatticeSpec, build_potential, matrix_function, potential_spectrum
