"""
Linear-objective semidefinite programs over measurement-compatible state sets.

Every quantity the planners and protocols need (α, γ/Γ, ω/Ω, δ/Δ and the state
estimate) is an extremum of Tr(ρ·X) over

    {ρ ⪰ 0, Tr ρ = 1} ∩ {Tr(ρ A_i) = y_i}

for a Hermitian objective X. For a pure target ρ0 the Bures distance is a
decreasing function of Tr(ρ ρ0), so max/min distance are min/max fidelity.

Constraint rows are orthonormalized (Hilbert-Schmidt) against the identity and
each other before solving: dependent rows are dropped after a consistency check,
which keeps the interior-point KKT system well conditioned. Problems are solved
with the Clarabel interior-point solver through cvxpy.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import cvxpy as cp
import numpy as np
from scipy import linalg

from .constants import (
    DEPENDENCE_TOL,
    FIDELITY_SNAP_TOL,
    POLISH_ROUNDS,
    SDP_FEASIBILITY_TOL,
    SDP_GAP_TOL,
    SDP_MAX_ITER,
)
from .exceptions import DimensionMismatchError, InfeasibleConstraintsError, SolverFailureError
from .hermitian import (
    DensityMatrix,
    HermitianOperator,
    bures_from_fidelity,
    from_coordinates,
    hs_inner,
    orthogonal_residual,
    require_pure,
)
from .validation import validate_constraint_residuals

logger = logging.getLogger(__name__)


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class SdpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True, eq=False)
class CompatibleSetSpec:
    """
    Affine constraints Tr(ρ A_i) = y_i defining an intersection of compatible sets.

    Attributes:
        dim: Hilbert-space dimension d
        constraints: (observable, value) pairs
    """

    dim: int
    constraints: tuple[tuple[HermitianOperator, float], ...] = ()

    def __post_init__(self) -> None:
        cleaned = []
        for i, (op, value) in enumerate(self.constraints):
            if op.dim != self.dim:
                raise DimensionMismatchError(
                    f"Constraint {i} has dim {op.dim}, expected {self.dim}"
                )
            value = float(value)
            if not np.isfinite(value):
                raise ValueError(f"Constraint {i} has non-finite value {value}")
            cleaned.append((op, value))
        object.__setattr__(self, "constraints", tuple(cleaned))

    @classmethod
    def empty(cls, dim: int) -> "CompatibleSetSpec":
        return cls(dim)

    @classmethod
    def from_state(
        cls, state: HermitianOperator, observables: Sequence[HermitianOperator]
    ) -> "CompatibleSetSpec":
        """Constraints whose values are the expectations of a given state: ∩ S_i(state)."""
        return cls(state.dim, tuple((op, hs_inner(state, op)) for op in observables))

    def __len__(self) -> int:
        return len(self.constraints)

    @property
    def observables(self) -> list[HermitianOperator]:
        return [op for op, _ in self.constraints]

    @property
    def values(self) -> np.ndarray:
        return np.array([value for _, value in self.constraints], dtype=float)

    def with_constraint(self, op: HermitianOperator, value: float) -> "CompatibleSetSpec":
        """Copy with one more constraint."""
        return CompatibleSetSpec(self.dim, self.constraints + ((op, value),))

    def residuals(self, state: HermitianOperator) -> np.ndarray:
        """|Tr(state A_i) - y_i| for every constraint."""
        return np.array([abs(hs_inner(state, op) - value) for op, value in self.constraints])

    def is_satisfied_by(self, state: HermitianOperator, tol: float = DEPENDENCE_TOL) -> bool:
        return validate_constraint_residuals(self.residuals(state), tol)


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """
    Outcome of one solve.

    Attributes:
        status: Optimal, Infeasible or NumericalFailure
        value: Tr(optimizer·objective) when Optimal
        optimizer: A density matrix attaining the value when Optimal
        residuals: Diagnostics (constraint residual, objective gap, iterations)
    """

    status: SdpStatus
    value: float | None = None
    optimizer: DensityMatrix | None = None
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL


class DistanceExtrema(NamedTuple):
    """Minimum and maximum Bures distance to ρ0 over a compatible set."""

    min_dist: float
    max_dist: float


def _reduce_constraints(spec: CompatibleSetSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Orthonormalize constraint rows, starting from the trace row I/sqrt(d).

    Returns:
        (basis, values, inconsistency): orthonormal coordinate rows, their values,
        and the largest value mismatch found on a dependent row
    """
    d = spec.dim
    identity = HermitianOperator.identity(d).vector
    scale = np.sqrt(d)
    rows = [identity / scale]
    values = [1.0 / scale]
    inconsistency = 0.0

    for op, y in spec.constraints:
        basis = np.array(rows)
        coeffs = basis @ op.vector
        residual = orthogonal_residual(op.vector, basis)
        norm = float(np.linalg.norm(residual))
        value_residual = y - float(coeffs @ np.array(values))
        if norm <= DEPENDENCE_TOL * max(1.0, float(np.linalg.norm(op.vector))):
            inconsistency = max(inconsistency, abs(value_residual))
            continue
        rows.append(residual / norm)
        values.append(value_residual / norm)

    return np.array(rows), np.array(values), inconsistency


def _affine_correct(matrix: np.ndarray, basis: np.ndarray, values: np.ndarray) -> np.ndarray:
    d = matrix.shape[0]
    vec = np.concatenate([matrix.real.ravel(), matrix.imag.ravel()])
    vec = vec + basis.T @ (values - basis @ vec)
    m = from_coordinates(vec, d)
    return (m + m.conj().T) / 2


def _polish(
    raw: np.ndarray, spec: CompatibleSetSpec, basis: np.ndarray, values: np.ndarray
) -> DensityMatrix | None:
    """
    Move a solver iterate onto the affine slice and into the PSD cone.

    Optimizers on the boundary of the cone come back with eigenvalues a few
    times the solver tolerance below zero. Eigenvalue clipping alternates with
    the affine projection for up to POLISH_ROUNDS rounds, then the iterate is
    snapped to the nearest density matrix. The result is kept only when every
    constraint still holds within SDP_FEASIBILITY_TOL.
    """
    m = _affine_correct((raw + raw.conj().T) / 2, basis, values)
    for _ in range(POLISH_ROUNDS):
        w, v = linalg.eigh(m)
        if w[0] >= 0.0:
            break
        m = _affine_correct((v * np.clip(w, 0.0, None)) @ v.conj().T, basis, values)

    try:
        candidate = DensityMatrix.nearest(m)
    except ValueError:
        return None
    residuals = spec.residuals(candidate)
    if not validate_constraint_residuals(residuals):
        logger.debug(f"Polished optimizer misses constraints by {residuals.max():.2e}")
        return None
    return candidate


def extremize_linear(
    objective: HermitianOperator,
    spec: CompatibleSetSpec,
    sense: Sense,
    verbose: bool = False,
) -> SdpSolution:
    """
    Extremal value of Tr(ρ·objective) over the compatible set of spec.

    Args:
        objective: Hermitian objective X
        spec: Constraints Tr(ρ A_i) = y_i
        sense: Sense.MIN or Sense.MAX
        verbose: Print solver iterates

    Returns:
        SdpSolution; Infeasible when the set is empty (inconsistent dependent rows
        beyond SDP_FEASIBILITY_TOL or a solver infeasibility certificate),
        NumericalFailure when the iteration stalls. Never raises for these cases.
    """
    if objective.dim != spec.dim:
        raise DimensionMismatchError(f"Objective dim {objective.dim} != spec dim {spec.dim}")

    sense = Sense(sense)
    basis, values, inconsistency = _reduce_constraints(spec)
    if inconsistency > SDP_FEASIBILITY_TOL:
        logger.debug(f"Inconsistent dependent constraints (mismatch {inconsistency:.3e})")
        return SdpSolution(SdpStatus.INFEASIBLE, residuals={"inconsistency": inconsistency})

    d = spec.dim
    rho = cp.Variable((d, d), hermitian=True)
    constraints = [rho >> 0]
    for row, value in zip(basis, values):
        constraints.append(cp.real(cp.trace(from_coordinates(row, d) @ rho)) == value)

    target = cp.real(cp.trace(objective.matrix @ rho))
    goal = cp.Minimize(target) if sense is Sense.MIN else cp.Maximize(target)
    problem = cp.Problem(goal, constraints)

    try:
        problem.solve(
            solver=cp.CLARABEL,
            verbose=verbose,
            tol_gap_abs=SDP_GAP_TOL,
            tol_gap_rel=SDP_GAP_TOL,
            tol_feas=SDP_GAP_TOL,
            max_iter=SDP_MAX_ITER,
        )
    except cp.error.SolverError as e:
        logger.debug(f"Solver error: {e}")
        return SdpSolution(SdpStatus.NUMERICAL_FAILURE, residuals={"inconsistency": inconsistency})

    status = problem.status
    iterations = float(getattr(problem.solver_stats, "num_iters", None) or 0)
    diagnostics = {"inconsistency": inconsistency, "iterations": iterations}

    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        logger.debug(f"Solver certified infeasibility ({status})")
        return SdpSolution(SdpStatus.INFEASIBLE, residuals=diagnostics)

    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or rho.value is None:
        logger.debug(f"Solver stopped with status {status}")
        return SdpSolution(SdpStatus.NUMERICAL_FAILURE, residuals=diagnostics)

    optimizer = _polish(np.asarray(rho.value, dtype=complex), spec, basis, values)
    if optimizer is None:
        logger.debug("Optimizer could not be polished into the compatible set")
        return SdpSolution(SdpStatus.NUMERICAL_FAILURE, residuals=diagnostics)

    value = hs_inner(optimizer, objective)
    residual = float(spec.residuals(optimizer).max()) if len(spec) else 0.0
    diagnostics["constraint_residual"] = residual
    diagnostics["objective_gap"] = abs(value - float(problem.value))

    if status == cp.OPTIMAL_INACCURATE:
        if diagnostics["objective_gap"] > SDP_FEASIBILITY_TOL:
            logger.debug(f"Inaccurate solve rejected (gap {diagnostics['objective_gap']:.3e})")
            return SdpSolution(SdpStatus.NUMERICAL_FAILURE, residuals=diagnostics)
        logger.warning("Accepted an inaccurate solver result after polishing")

    logger.debug(
        f"{sense.value} Tr(rho X) = {value:.10f} with {len(spec)} constraints "
        f"(residual {residual:.2e}, gap {diagnostics['objective_gap']:.2e}, "
        f"{int(iterations)} iterations)"
    )

    return SdpSolution(SdpStatus.OPTIMAL, value, optimizer, diagnostics)


def raise_for_status(solution: SdpSolution, step: int | None = None) -> None:
    """Translate a non-optimal solution into the matching exception."""
    if solution.status is SdpStatus.INFEASIBLE:
        raise InfeasibleConstraintsError("the compatible set is empty", step=step)
    if solution.status is SdpStatus.NUMERICAL_FAILURE:
        raise SolverFailureError("interior-point solve did not converge", step=step)


def max_distance(rho0: DensityMatrix, spec: CompatibleSetSpec) -> float:
    """
    Largest Bures distance to the pure target ρ0 over the compatible set.

    Raises:
        InfeasibleConstraintsError, SolverFailureError
    """
    require_pure(rho0)
    solution = extremize_linear(rho0, spec, Sense.MIN)
    raise_for_status(solution)
    return bures_from_fidelity(solution.value, FIDELITY_SNAP_TOL)


def distance_extrema(rho0: DensityMatrix, spec: CompatibleSetSpec) -> DistanceExtrema:
    """
    (min, max) Bures distance to the pure target ρ0 over the compatible set.

    The minimum comes from the max-fidelity solve, the maximum from the
    min-fidelity solve. When ρ0 itself satisfies the constraints the minimum is 0
    without a solve.

    Raises:
        NotPureStateError, InfeasibleConstraintsError, SolverFailureError
    """
    require_pure(rho0)
    if spec.is_satisfied_by(rho0):
        max_fidelity = 1.0
    else:
        solution = extremize_linear(rho0, spec, Sense.MAX)
        raise_for_status(solution)
        max_fidelity = solution.value

    solution = extremize_linear(rho0, spec, Sense.MIN)
    raise_for_status(solution)
    min_fidelity = min(solution.value, max_fidelity)

    return DistanceExtrema(
        bures_from_fidelity(max_fidelity, FIDELITY_SNAP_TOL),
        bures_from_fidelity(min_fidelity, FIDELITY_SNAP_TOL),
    )


def estimate_state(rho0: DensityMatrix, spec: CompatibleSetSpec) -> DensityMatrix:
    """
    Compatible state closest to ρ0 in Bures distance (a max-fidelity optimizer).

    Returns ρ0 itself when it is compatible.

    Raises:
        NotPureStateError, InfeasibleConstraintsError, SolverFailureError
    """
    require_pure(rho0)
    if spec.is_satisfied_by(rho0):
        return rho0
    solution = extremize_linear(rho0, spec, Sense.MAX)
    raise_for_status(solution)
    return solution.optimizer
