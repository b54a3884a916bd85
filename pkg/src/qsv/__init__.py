"""
qsv: measurement planning and verification of quantum states

Decides whether a prepared state lies within a Bures radius ε of a pure target
ρ0 using as few measurements of an information-complete observable set as
possible. Each step brackets the distance by two semidefinite programs over the
states compatible with the data; planners choose the measurement order off line
(exhaustive, SDP-greedy or analytic-bound greedy) or on line (adaptive).

Basic Usage:
    >>> from qsv import DensityMatrix, MeasurementOracle, pauli_projector_set
    >>> from qsv import epsilon_from_fidelity, plan_ias, run_vm
    >>>
    >>> observables = pauli_projector_set(2)
    >>> rho0 = DensityMatrix.pure([1, 0, 0, 0])
    >>> plan = plan_ias(rho0, observables, seed=1)
    >>> outcome = run_vm(
    ...     plan,
    ...     MeasurementOracle.perfect(rho0),
    ...     rho0,
    ...     epsilon_from_fidelity(0.95),
    ...     observables,
    ... )
    >>> outcome.verdict.value
    'Accurate'
"""

from .__version__ import __version__
from .adaptive import AdaptiveTrace, CandidateScore, candidate_scores, run_av
from .constants import ALGORITHMS, BURES_DIAMETER, DEFAULT_EPSILON_FIDELITY
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    EstimateInconsistencyError,
    InfeasibleConstraintsError,
    LinearDependenceError,
    NotPureStateError,
    QsvError,
    SolverFailureError,
    UnphysicalStateError,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    cross_evaluate_beta,
    run_experiment,
)
from .hermitian import (
    DensityMatrix,
    HermitianOperator,
    ObservableSet,
    PerturbationSpec,
    bures_pure,
    epsilon_from_fidelity,
    hs_distance,
    hs_inner,
    load_observable_set,
    pauli_projector_set,
    perturb_state,
    random_pure_target,
    sample_preparation,
    span_rank,
)
from .planner import (
    PlanMethod,
    ProjectionState,
    SequencePlan,
    bures_bound_pure,
    complete_sequence,
    hs_bound,
    plan_ias,
    plan_ios,
    plan_os,
    plan_random,
    project_update,
)
from .sdp import (
    CompatibleSetSpec,
    Sense,
    SdpSolution,
    SdpStatus,
    distance_extrema,
    estimate_state,
    extremize_linear,
)
from .validation import ValidationResult
from .verifier import MeasurementOracle, Verdict, VerificationOutcome, reconstruct_state, run_vm

__all__ = [
    # Version
    "__version__",
    # Constants
    "ALGORITHMS",
    "BURES_DIAMETER",
    "DEFAULT_EPSILON_FIDELITY",
    # Operators and states
    "HermitianOperator",
    "DensityMatrix",
    "ObservableSet",
    "PerturbationSpec",
    "hs_inner",
    "hs_distance",
    "bures_pure",
    "epsilon_from_fidelity",
    "pauli_projector_set",
    "load_observable_set",
    "random_pure_target",
    "perturb_state",
    "sample_preparation",
    "span_rank",
    # Compatible-set SDPs
    "CompatibleSetSpec",
    "Sense",
    "SdpSolution",
    "SdpStatus",
    "extremize_linear",
    "distance_extrema",
    "estimate_state",
    # Planning
    "PlanMethod",
    "SequencePlan",
    "ProjectionState",
    "project_update",
    "hs_bound",
    "bures_bound_pure",
    "plan_os",
    "plan_ios",
    "plan_ias",
    "plan_random",
    "complete_sequence",
    # Verification
    "MeasurementOracle",
    "Verdict",
    "VerificationOutcome",
    "run_vm",
    "reconstruct_state",
    "AdaptiveTrace",
    "CandidateScore",
    "candidate_scores",
    "run_av",
    # Experiment
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "cross_evaluate_beta",
    # Errors and validation
    "QsvError",
    "DimensionMismatchError",
    "NotPureStateError",
    "LinearDependenceError",
    "UnphysicalStateError",
    "InfeasibleConstraintsError",
    "SolverFailureError",
    "EstimateInconsistencyError",
    "ConfigError",
    "ValidationResult",
]
