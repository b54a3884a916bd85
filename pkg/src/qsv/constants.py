"""
Constants and configuration for qsv package.

Includes numerical tolerances, the two-qubit study defaults, and reporting ranges.
"""

import math

# ==============================================================================
# NUMERICAL TOLERANCES
# ==============================================================================

# Maximum absolute deviation of a matrix from its conjugate transpose
HERMITIAN_TOL: float = 1e-12

# Smallest eigenvalue accepted for a density matrix
EIGENVALUE_FLOOR: float = -1e-9

# Trace and purity checks (|Tr(rho) - 1|, |Tr(rho^2) - 1|)
TRACE_TOL: float = 1e-9
PURITY_TOL: float = 1e-9

# Singular values of the HS-Gram matrix above this count towards the span rank
GRAM_RANK_TOL: float = 1e-9

# Orthogonal residual norm below which an operator is linearly dependent
DEPENDENCE_TOL: float = 1e-9

# Constraint residual allowed on SDP optimizers; also the inconsistency threshold
# used when deduplicating constraint rows
SDP_FEASIBILITY_TOL: float = 1e-7

# Duality-gap termination of the interior-point solver
SDP_GAP_TOL: float = 1e-8

# Iteration cap for the interior-point solver
SDP_MAX_ITER: int = 200

# Alternating clip and affine-projection rounds applied to a boundary optimizer
POLISH_ROUNDS: int = 50

# Scores closer than this are tied
TIE_TOL: float = 1e-7

# delta below this counts as zero in the adaptive selection rule
DELTA_ZERO_TOL: float = 1e-7

# SDP fidelities within this distance of 1 are treated as exactly 1
FIDELITY_SNAP_TOL: float = 1e-7

# Max-distance at or below this means the target is reconstructed
RECONSTRUCTION_TOL: float = 1e-6

# Eigenvalues of a reconstruction below -UNPHYSICAL_TOL are reported
UNPHYSICAL_TOL: float = 1e-6

# Max entry of A² − A for an observable to count as a projector
PROJECTOR_TOL: float = 1e-9

# ==============================================================================
# TWO-QUBIT STUDY DEFAULTS
# ==============================================================================

DEFAULT_SEED: int = 2024
DEFAULT_N_TARGETS: int = 100
DEFAULT_EPSILON_FIDELITY: float = 0.95
DEFAULT_LAMBDA_ACCURATE: float = 1e-4
DEFAULT_LAMBDA_NONACCURATE: float = 0.1
DEFAULT_ETA: float = 0.1
DEFAULT_N_CONTROL_SEQUENCES: int = 5
DEFAULT_OS_CAP: int = 3
DEFAULT_MAX_EXCLUSION_FRACTION: float = 0.01

# Resampling attempts before a preparation of the requested class is given up
MAX_PREPARATION_ATTEMPTS: int = 1000

# Number of SU(d) perturbation coefficients for d = 4 (identity included)
N_PERTURBATION_COEFFICIENTS: int = 16

# Bures diameter of the state space
BURES_DIAMETER: float = math.sqrt(2.0)

# ==============================================================================
# ALGORITHM NAMES
# ==============================================================================

ALGORITHMS: tuple[str, ...] = ("OS", "IOS", "IAS", "AV", "Random")
DEFAULT_ALGORITHMS: tuple[str, ...] = ("IOS", "IAS", "AV", "Random")

# Pairs reported in the difference histograms
DIFFERENCE_PAIRS: tuple[tuple[str, str], ...] = (
    ("IOS", "IAS"),
    ("IOS", "AV"),
    ("IAS", "AV"),
)

# Preparation classes: d_B(ρexp, ρ0) <= ε and > ε
CLASSES: tuple[str, ...] = ("accurate", "nonaccurate")

# Built-in observable sets
DEFAULT_OBSERVABLES: str = "pauli2q"

# ==============================================================================
# LOGGING AND OUTPUT
# ==============================================================================

# Default log level for package
DEFAULT_LOG_LEVEL: str = "INFO"

# Float format for CSV output (stable across runs)
CSV_FLOAT_FORMAT: str = "%.10g"

RAW_CSV: str = "raw.csv"
SUMMARY_JSON: str = "summary.json"
HISTOGRAMS_CSV: str = "histograms.csv"
RECONSTRUCTION_CSV: str = "reconstruction.csv"
TRIALS_CSV: str = "trials.csv"
