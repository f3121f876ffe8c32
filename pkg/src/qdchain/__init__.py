"""Coherent single-electron transfer in chains of tunnel-coupled quantum dots."""
from .chain import (
    ChainSpec,
    CouplingVector,
    DegenerateInputError,
    StateVector,
    TridiagonalHamiltonian,
    build_hamiltonian,
    cpt_state,
    cpt_state_two_family,
    spin_couplings,
    three_level_eigensystem,
    uniform_couplings,
)
from .spectra import (
    EigensolverError,
    SpectralDecomposition,
    eigh_tridiagonal,
    spin_spectrum,
    uniform_spectrum,
)
from .propagation import (
    TimeGrid,
    Trajectory,
    binomial_amplitudes,
    evolve_schedule,
    evolve_static,
    uniform_amplitudes,
)
from .protocols import (
    Pulse,
    Schedule,
    collective_pi_protocol,
    ctap_protocol,
    sample_couplings,
    sequential_pi_protocol,
    static_protocol,
)
from .analysis import (
    AdiabaticityTrace,
    RobustnessReport,
    adiabaticity_trace,
    revival_max,
    robustness_sweep,
    transfer_fidelity,
)

__version__ = "0.1.0"
