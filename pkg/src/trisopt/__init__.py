"""trisopt: sum-rate optimization for a transmissive-RIS NOMA downlink that
shares spectrum with a primary network under an interference-temperature cap.

The pipeline alternates a closed-form-plus-oracle NOMA power split with a
semidefinite-relaxation phase design solved by an embedded barrier method.
"""

from .channel import ChannelVector, GeometryParams, effective_gain, rician_vector, steering_vector
from .conic import ConicProblem, LogTerm, SolveReport, TraceInequality, dump_problem, find_interior, solve
from .config import DEFAULTS, ConfigError, build_scenario, load_config, parse_config_text
from .harness import (
    AlternatingResult,
    InfeasibilityReport,
    IterationTrace,
    Scenario,
    SweepResult,
    alternating_optimize,
    draw_channel_scenario,
    resolve_channels,
    sweep,
)
from .phase import (
    BeamformingVector,
    ExtractionError,
    LiftedMatrix,
    PhaseInfeasibleError,
    PhaseSolution,
    PhaseSubproblem,
    build_taylor_objective,
    extract_beam,
    lift_channel,
    lifted_sinrs,
    optimize_phase,
    solve_phase_subproblem,
)
from .power import (
    DegenerateDualsError,
    DualState,
    PowerConstraints,
    PowerSolution,
    closed_form_pk,
    optimal_total_power,
    oracle_power_split,
    solve_power,
)
from .rate import (
    NoisePower,
    PowerSplit,
    ScaCoefficients,
    exact_rate,
    sca_coefficients,
    sinr_strong,
    sinr_weak,
    surrogate_rate,
)

__version__ = "0.1.0"
