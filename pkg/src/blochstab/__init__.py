"""Simulator and analytic toolkit for autonomous qubit state stabilization.

A qubit is stabilized to an arbitrary point of its Bloch sphere by parametric
sideband couplings to a lossy resonator. The package provides the Lindblad
machinery, the drive-planning layer mapping Bloch targets to sideband
amplitudes and phases, a reduced three-level analytic model, the circuit-level
derivation of the coupled-mode parameters, and a sweep/report command line.
"""

from .core import (
    DensityMatrix,
    EvolveError,
    HilbertSpace,
    LindbladModel,
    Liouvillian,
    Operator,
    SolverError,
    SteadyStateError,
    basis_index,
    basis_state,
    bloch_ket,
    bloch_ket_orthogonal,
    build_lindblad_generator,
    evolve,
    evolve_time_dependent,
    fidelity_and_expectations,
    make_ladder,
    partial_trace_qubit,
    steady_state,
    trace_distance,
)
from .models import (
    DrivePlan,
    RwaValidation,
    StabilizationTarget,
    SystemParams,
    build_lab_frame_generator,
    build_rotating_hamiltonian,
    build_stabilization_model,
    lab_frame_hamiltonian_fn,
    plan_drives,
    sigma_n_ladder,
    synthesize_tones,
    thermal_channels,
    validate_rwa,
)
from .threelevel import (
    DampingReport,
    ThreeLevelParams,
    ThreeLevelState,
    approx_fidelity,
    damping_report,
    effective_rates,
    exact_steady_fidelity,
    fastest_stabilization,
    thermal_fidelity,
    three_level_dynamics,
)

__version__ = "0.1.0"
