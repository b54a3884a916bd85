"""
Off-line verification of a prepared state against a planned measurement sequence.

run_vm() measures the plan's observables one at a time and after every step
brackets the distance between the prepared state and the target:

    γ_k = min d_B(ρ, ρ0),  Γ_k = max d_B(ρ, ρ0)  over the compatible set.

The state is rejected as soon as γ_k > ε and accepted as soon as Γ_k <= ε. A
plan exhausted without a verdict ends with a tomographic reconstruction.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy import linalg

from .constants import PROJECTOR_TOL, SDP_FEASIBILITY_TOL, UNPHYSICAL_TOL
from .exceptions import (
    DimensionMismatchError,
    InfeasibleConstraintsError,
    LinearDependenceError,
    SolverFailureError,
    UnphysicalStateError,
)
from .hermitian import (
    DensityMatrix,
    HermitianOperator,
    ObservableSet,
    hs_inner,
    require_pure,
    span_rank,
)
from .planner import SequencePlan
from .sdp import CompatibleSetSpec, distance_extrema

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    ACCURATE = "Accurate"
    NOT_ACCURATE = "NotAccurate"
    EXHAUSTED = "Exhausted"


def decide(min_dist: float, max_dist: float, epsilon: float) -> Verdict | None:
    """Reject when min_dist > epsilon, accept when max_dist <= epsilon, else undecided."""
    if min_dist > epsilon:
        return Verdict.NOT_ACCURATE
    if max_dist <= epsilon:
        return Verdict.ACCURATE
    return None


# ==============================================================================
# MEASUREMENT ORACLE
# ==============================================================================


def is_projector(op: HermitianOperator, tol: float = PROJECTOR_TOL) -> bool:
    """True when op² = op, i.e. the spectrum lies in {0, 1}."""
    m = op.matrix
    return bool(np.max(np.abs(m @ m - m)) <= tol)


class MeasurementOracle:
    """
    Source of measured expectation values for a prepared state.

    Perfect mode returns Tr(ρexp·A) exactly. Finite-shot mode returns the mean of
    `shots` Bernoulli draws with success probability Tr(ρexp·A), which requires
    projector-valued observables.
    """

    def __init__(
        self,
        rho_exp: DensityMatrix,
        shots: int | None = None,
        seed: int | np.random.Generator | None = None,
    ):
        if shots is not None and shots < 1:
            raise ValueError(f"shots must be a positive integer, got {shots}")
        self.rho_exp = rho_exp
        self.shots = shots
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    @classmethod
    def perfect(cls, rho_exp: DensityMatrix) -> "MeasurementOracle":
        return cls(rho_exp)

    @classmethod
    def finite_shots(
        cls, rho_exp: DensityMatrix, shots: int, seed: int | np.random.Generator | None
    ) -> "MeasurementOracle":
        return cls(rho_exp, shots, seed)

    @property
    def mode(self) -> str:
        return "Perfect" if self.shots is None else "FiniteShots"

    @property
    def dim(self) -> int:
        return self.rho_exp.dim

    def measure(self, op: HermitianOperator) -> float:
        """
        One expectation value.

        Raises:
            DimensionMismatchError: if op has another dimension
            ValueError: finite-shot mode with a non-projector observable
        """
        if op.dim != self.dim:
            raise DimensionMismatchError(f"Observable dim {op.dim} != state dim {self.dim}")
        p = hs_inner(self.rho_exp, op)
        if self.shots is None:
            return p
        if not is_projector(op):
            raise ValueError("Finite-shot measurement needs a projector-valued observable")
        p = min(max(p, 0.0), 1.0)
        return float(self._rng.binomial(self.shots, p)) / self.shots

    def __repr__(self) -> str:
        if self.shots is None:
            return f"MeasurementOracle(Perfect, dim={self.dim})"
        return f"MeasurementOracle(FiniteShots, shots={self.shots}, dim={self.dim})"


# ==============================================================================
# OUTCOMES
# ==============================================================================


@dataclass(frozen=True)
class StepRecord:
    """One measurement with the distance bracket it produced."""

    k: int
    index: int
    label: str
    y: float
    min_dist: float
    max_dist: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "index": self.index,
            "label": self.label,
            "y": self.y,
            "gamma": self.min_dist,
            "Gamma": self.max_dist,
        }


def bracket_is_monotone(steps: Sequence[StepRecord], tol: float = 1e-6) -> bool:
    """Lower bracket non-decreasing and upper bracket non-increasing within tol."""
    lower = np.array([s.min_dist for s in steps])
    upper = np.array([s.max_dist for s in steps])
    return bool(np.all(np.diff(lower) >= -tol) and np.all(np.diff(upper) <= tol))


@dataclass
class VerificationOutcome:
    """
    Result of one run_vm call.

    Attributes:
        verdict: Accurate, NotAccurate or Exhausted
        steps_used: Number of measurements performed
        trace: StepRecord per measurement
        epsilon: Accuracy radius used
        method: Planner that produced the plan
        reconstructed: Tomographic estimate when the plan was exhausted
    """

    verdict: Verdict
    steps_used: int
    trace: list[StepRecord] = field(default_factory=list)
    epsilon: float = 0.0
    method: str = ""
    reconstructed: DensityMatrix | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "steps_used": self.steps_used,
            "epsilon": self.epsilon,
            "method": self.method,
            "trace": [s.to_dict() for s in self.trace],
            "reconstructed": None if self.reconstructed is None else self.reconstructed.to_dict(),
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per step: k, index, label, y, gamma, Gamma."""
        return pd.DataFrame(
            [s.to_dict() for s in self.trace],
            columns=["k", "index", "label", "y", "gamma", "Gamma"],
        )


# ==============================================================================
# VERIFICATION
# ==============================================================================


def run_vm(
    plan: SequencePlan,
    oracle: MeasurementOracle,
    rho0: DensityMatrix,
    epsilon: float,
    observables: ObservableSet,
) -> VerificationOutcome:
    """
    Verify a prepared state by measuring a planned sequence.

    Args:
        plan: Measurement order (normally completed to d²)
        oracle: Measurement source for the prepared state
        rho0: Pure target
        epsilon: Bures accuracy radius (> 0)
        observables: Set the plan indexes into

    Returns:
        VerificationOutcome; Exhausted only if the plan ends undecided

    Raises:
        InfeasibleConstraintsError: measured values admit no state (re-measure)
        SolverFailureError: an SDP did not converge; both carry the step index
    """
    require_pure(rho0)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not (oracle.dim == rho0.dim == observables.dim):
        raise DimensionMismatchError(
            f"Oracle dim {oracle.dim}, target dim {rho0.dim}, observable dim {observables.dim}"
        )
    plan.check_against(observables)

    spec = CompatibleSetSpec.empty(rho0.dim)
    trace: list[StepRecord] = []
    values: list[float] = []

    for k, index in enumerate(plan.indices, start=1):
        op = observables[index]
        y = oracle.measure(op)
        values.append(y)
        spec = spec.with_constraint(op, y)
        try:
            lower, upper = distance_extrema(rho0, spec)
        except (InfeasibleConstraintsError, SolverFailureError) as e:
            logger.warning(f"VM aborted at step {k}: {e}")
            raise e.at_step(k) from e

        trace.append(StepRecord(k, index, observables.labels[index], y, lower, upper))
        logger.debug(f"VM step {k}: {observables.labels[index]} y={y:.6f} [{lower:.6f}, {upper:.6f}]")

        verdict = decide(lower, upper, epsilon)
        if verdict is not None:
            logger.info(f"VM ({plan.method.value}): {verdict.value} after {k} steps")
            return VerificationOutcome(verdict, k, trace, epsilon, plan.method.value)

    reconstructed = None
    try:
        reconstructed = reconstruct_state(observables, plan.indices, values)
    except (LinearDependenceError, UnphysicalStateError) as e:
        logger.warning(f"Plan exhausted without a usable reconstruction: {e}")

    logger.info(f"VM ({plan.method.value}): Exhausted after {len(plan)} steps")
    return VerificationOutcome(
        Verdict.EXHAUSTED, len(plan), trace, epsilon, plan.method.value, reconstructed
    )


# ==============================================================================
# RECONSTRUCTION
# ==============================================================================


def gram_coefficients(
    operators: Sequence[HermitianOperator], values: Sequence[float]
) -> np.ndarray:
    """
    Solve [Tr(A_i A_j)] c = y in the least-squares sense.

    Over-complete sets have a singular Gram matrix; the minimum-norm solution
    still reproduces consistent values exactly.
    """
    vectors = np.array([op.vector for op in operators])
    gram = vectors @ vectors.T
    coefficients, *_ = linalg.lstsq(gram, np.asarray(values, dtype=float))
    return coefficients


def reconstruct_state(
    observables: ObservableSet, subset: Sequence[int], values: Sequence[float]
) -> DensityMatrix:
    """
    Tomographic reconstruction Σ c_i A_i from measured expectation values.

    When the subset alone does not span the identity, the trace condition
    Tr(ρ) = 1 is added as one more equation. The result is moved onto the
    unit-trace slice; eigenvalues in [-UNPHYSICAL_TOL, 0) are clipped.

    Raises:
        LinearDependenceError: subset plus identity does not span d² dimensions
        UnphysicalStateError: an eigenvalue lies below -UNPHYSICAL_TOL
    """
    if len(subset) != len(values):
        raise ValueError(f"{len(values)} values for {len(subset)} observables")
    d = observables.dim
    ops = [observables[i] for i in subset]
    if span_rank(ops) < d * d:
        raise LinearDependenceError(
            f"Observables {list(subset)} with the identity do not span {d * d} dimensions"
        )

    y = list(values)
    if span_rank(ops, include_identity=False) < d * d:
        ops.append(HermitianOperator.identity(d))
        y.append(1.0)

    coefficients = gram_coefficients(ops, y)
    matrix = sum(c * op.matrix for c, op in zip(coefficients, ops))
    matrix = (matrix + matrix.conj().T) / 2
    matrix = matrix + (1.0 - float(np.trace(matrix).real)) / d * np.eye(d)

    lowest = float(linalg.eigvalsh(matrix)[0])
    if lowest < -UNPHYSICAL_TOL:
        raise UnphysicalStateError(
            f"Reconstructed operator has eigenvalue {lowest:.3e} below -{UNPHYSICAL_TOL:.0e}"
        )

    state = DensityMatrix.nearest(matrix)
    residual = max(abs(hs_inner(state, observables[i]) - v) for i, v in zip(subset, values))
    if residual > SDP_FEASIBILITY_TOL:
        logger.debug(f"Reconstruction reproduces the data to {residual:.2e}")
    return state
