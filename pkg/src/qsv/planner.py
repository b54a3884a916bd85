"""
Off-line measurement-sequence planning.

Planners choose, for a known pure target ρ0, the order in which observables of an
information-complete set are measured:

- plan_os(): exhaustive search for the smallest sufficient subset (capped)
- plan_ios(): greedy choice minimizing the worst-case distance α (one SDP per candidate)
- plan_ias(): greedy choice maximizing the analytic score ω, no SDP needed
- plan_random(): seeded random tomographically complete order (control groups)
- complete_sequence(): random independent fill of a short plan up to d²

The analytic machinery (ProjectionState, project_update, hs_bound,
bures_bound_pure) tracks the orthogonal projection ϱ_K of ρ0 onto the span of
the chosen observables.
"""

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .constants import (
    BURES_DIAMETER,
    DEFAULT_OS_CAP,
    DEPENDENCE_TOL,
    RECONSTRUCTION_TOL,
    TIE_TOL,
)
from .exceptions import InfeasibleConstraintsError, LinearDependenceError, SolverFailureError
from .hermitian import (
    DensityMatrix,
    HermitianOperator,
    ObservableSet,
    from_coordinates,
    hs_inner,
    is_information_complete,
    orthogonal_residual,
    require_pure,
    span_rank,
)
from .sdp import CompatibleSetSpec, max_distance
from .utils import digest_arrays

logger = logging.getLogger(__name__)


class PlanMethod(str, Enum):
    OS = "OS"
    IOS = "IOS"
    IAS = "IAS"
    RANDOM = "Random"


# Stop reasons recorded on plans
STOP_COMPLETE = "complete"
STOP_SPAN = "span"
STOP_EPSILON = "epsilon"
STOP_CAP = "cap"


@dataclass(frozen=True)
class SequencePlan:
    """
    Ordered observable indices with their per-step scores.

    Attributes:
        method: Planner that produced the plan
        indices: Distinct indices into the observable set
        scores: α^k (IOS), ω^(k) (IAS) or the achieved max distance (OS); empty for Random
        stop_reason: 'complete', 'span', 'epsilon' or 'cap'
        target_digest: Hash of ρ0 and the observable set
        seed: Seed used for tie-breaking and completion
        norm_sq_trajectory: Tr(ϱ_K²) after each step (IAS)
        completed_from: Length before complete_sequence appended random indices
    """

    method: PlanMethod
    indices: tuple[int, ...]
    scores: tuple[float, ...] = ()
    stop_reason: str | None = None
    target_digest: str = ""
    seed: int | None = None
    norm_sq_trajectory: tuple[float, ...] = field(default=(), compare=False)
    completed_from: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", PlanMethod(self.method))
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise ValueError(f"Plan indices must be distinct, got {indices}")
        if any(i < 0 for i in indices):
            raise ValueError(f"Plan indices must be non-negative, got {indices}")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))

    def __len__(self) -> int:
        return len(self.indices)

    def check_against(self, observables: ObservableSet) -> None:
        """Raise IndexError if an index falls outside the observable set."""
        bad = [i for i in self.indices if i >= len(observables)]
        if bad:
            raise IndexError(f"Plan indices {bad} out of range for {len(observables)} observables")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "indices": list(self.indices),
            "scores": list(self.scores),
            "stop_reason": self.stop_reason,
            "target_digest": self.target_digest,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SequencePlan":
        try:
            return cls(
                method=PlanMethod(data["method"]),
                indices=tuple(data["indices"]),
                scores=tuple(data.get("scores") or ()),
                stop_reason=data.get("stop_reason"),
                target_digest=data.get("target_digest", ""),
                seed=data.get("seed"),
            )
        except KeyError as e:
            raise ValueError(f"Plan record missing field: {e}") from e


def target_digest(rho0: DensityMatrix, observables: ObservableSet) -> str:
    """Hash binding a plan to its target and observable set."""
    return digest_arrays(rho0.matrix, observables.vectors, labels=observables.labels)


# ==============================================================================
# PROJECTION MACHINERY
# ==============================================================================


@dataclass(frozen=True, eq=False)
class ProjectionState:
    """
    Projection ϱ_K of ρ0 onto the span of the observables chosen so far.

    Attributes:
        ortho_basis: Orthonormal Γ_1..Γ_K spanning the chosen observables
        projected: ϱ_K = Σ Tr(ρ0 Γ_i) Γ_i
        projected_norm_sq: Tr(ϱ_K²)
    """

    ortho_basis: tuple[HermitianOperator, ...]
    projected: HermitianOperator
    projected_norm_sq: float

    @classmethod
    def empty(cls, dim: int) -> "ProjectionState":
        return cls((), HermitianOperator(np.zeros((dim, dim), dtype=complex)), 0.0)

    @property
    def dim(self) -> int:
        return self.projected.dim

    def __len__(self) -> int:
        return len(self.ortho_basis)

    @property
    def basis_vectors(self) -> np.ndarray:
        if not self.ortho_basis:
            return np.zeros((0, 2 * self.dim * self.dim))
        return np.array([g.vector for g in self.ortho_basis])

    def residual(self, operator: HermitianOperator) -> np.ndarray:
        """Coordinates of A⊥, the part of operator orthogonal to the span."""
        return orthogonal_residual(operator.vector, self.basis_vectors)


def project_update(
    state: ProjectionState, rho0: DensityMatrix, a_next: HermitianOperator
) -> ProjectionState:
    """
    Extend the span by one observable.

    ϱ_{K+1} = ϱ_K + Tr(ρ0 A⊥)/‖A⊥‖² · A⊥ and
    Tr(ϱ_{K+1}²) = Tr(ϱ_K²) + Tr²(ρ0 A⊥)/‖A⊥‖².

    Raises:
        LinearDependenceError: if ‖A⊥‖ <= DEPENDENCE_TOL
    """
    residual = state.residual(a_next)
    norm = float(np.linalg.norm(residual))
    if norm <= DEPENDENCE_TOL:
        raise LinearDependenceError(
            f"Operator is linearly dependent on the current span (residual {norm:.2e})"
        )

    overlap = float(rho0.vector @ residual)
    a_perp = from_coordinates(residual, state.dim)
    projected = state.projected.matrix + (overlap / norm**2) * a_perp

    return ProjectionState(
        state.ortho_basis + (HermitianOperator(a_perp / norm),),
        HermitianOperator(projected),
        state.projected_norm_sq + overlap**2 / norm**2,
    )


def projection_of(rho0: DensityMatrix, operators: Sequence[HermitianOperator]) -> ProjectionState:
    """Fold project_update over operators, skipping dependent ones."""
    state = ProjectionState.empty(rho0.dim)
    for op in operators:
        try:
            state = project_update(state, rho0, op)
        except LinearDependenceError:
            continue
    return state


def hs_bound(rho0: DensityMatrix, state: ProjectionState) -> float:
    """
    Hilbert-Schmidt radius of the compatible set around ρ0:
    sqrt(1 − Tr(ϱ_K²)) + sqrt(Tr(ρ0²) − Tr(ϱ_K²)).

    Equals 2·sqrt(1 − Tr(ϱ_K²)) for pure ρ0.
    """
    purity = hs_inner(rho0, rho0)
    norm_sq = state.projected_norm_sq
    if norm_sq > purity + DEPENDENCE_TOL:
        raise ValueError(f"Projected norm² {norm_sq:.12f} exceeds Tr(rho0²) {purity:.12f}")
    return math.sqrt(max(1.0 - norm_sq, 0.0)) + math.sqrt(max(purity - norm_sq, 0.0))


def bures_bound_pure(projected_norm_sq: float) -> float:
    """
    Bures radius sqrt(2(1 − sqrt(2·Tr(ϱ_K²) − 1))) for a pure target.

    Raises:
        ValueError: if projected_norm_sq < 1/2, where the bound is not defined
    """
    if projected_norm_sq < 0.5 - DEPENDENCE_TOL:
        raise ValueError(f"Bures bound needs Tr(proj²) >= 0.5, got {projected_norm_sq}")
    inner = min(max(2.0 * projected_norm_sq - 1.0, 0.0), 1.0)
    return math.sqrt(max(2.0 * (1.0 - math.sqrt(inner)), 0.0))


# ==============================================================================
# CANDIDATE SCORING AND TIE-BREAKING
# ==============================================================================


def ias_scores(
    state: ProjectionState,
    reference: HermitianOperator,
    candidates: Sequence[int],
    observables: ObservableSet,
) -> tuple[list[int], np.ndarray]:
    """
    ω_j = Tr²(reference·A⊥_j)/‖A⊥_j‖² for every candidate independent of the span.

    Returns:
        (independent candidates, their scores); dependent candidates are dropped
    """
    if not candidates:
        return [], np.zeros(0)
    basis = state.basis_vectors
    vectors = observables.vectors[list(candidates)]
    residuals = vectors
    if basis.size:
        for _ in range(2):
            residuals = residuals - (residuals @ basis.T) @ basis
    norms_sq = np.einsum("ij,ij->i", residuals, residuals)
    keep = norms_sq > DEPENDENCE_TOL**2
    overlaps = residuals[keep] @ reference.vector
    kept = [c for c, k in zip(candidates, keep) if k]
    return kept, overlaps**2 / norms_sq[keep]


def argmax_random(
    candidates: Sequence[int], scores: np.ndarray, rng: np.random.Generator, tol: float = TIE_TOL
) -> int:
    """Index with the largest score; uniform random among scores within tol of the best."""
    best = float(np.max(scores))
    tied = [c for c, s in zip(candidates, scores) if best - s < tol]
    if len(tied) == 1:
        return tied[0]
    return int(rng.choice(tied))


def argmin_with_tiebreak(
    candidates: Sequence[int],
    scores: np.ndarray,
    tiebreak: Callable[[list[int]], tuple[list[int], np.ndarray]],
    rng: np.random.Generator,
    tol: float = TIE_TOL,
) -> int:
    """
    Index with the smallest score; ties go to the largest tiebreak score, then random.
    """
    best = float(np.min(scores))
    tied = [c for c, s in zip(candidates, scores) if s - best < tol]
    if len(tied) == 1:
        return tied[0]
    kept, secondary = tiebreak(tied)
    if not kept:
        return int(rng.choice(tied))
    return argmax_random(kept, secondary, rng, tol)


def require_complete(observables: ObservableSet) -> None:
    if not is_information_complete(observables):
        raise LinearDependenceError(
            f"Observable set of {len(observables)} operators is not information-complete "
            f"for dim {observables.dim}"
        )


# ==============================================================================
# PLANNERS
# ==============================================================================


def plan_os(
    rho0: DensityMatrix,
    observables: ObservableSet,
    epsilon: float,
    max_subset: int = DEFAULT_OS_CAP,
) -> SequencePlan:
    """
    Smallest observable subset whose compatible set lies within epsilon of ρ0.

    Subsets are enumerated by increasing size (unordered, linearly dependent ones
    skipped). At each size every subset is evaluated and the best is kept; the
    first size whose best max distance is <= epsilon wins. If none qualifies up
    to max_subset, the overall best subset is returned with stop reason 'cap'.

    Args:
        rho0: Pure target
        observables: Information-complete set
        epsilon: Bures accuracy radius
        max_subset: Largest subset size to enumerate

    Returns:
        SequencePlan whose single score is the achieved max distance
    """
    require_pure(rho0)
    require_complete(observables)
    if max_subset < 1:
        raise ValueError(f"max_subset must be >= 1, got {max_subset}")

    digest = target_digest(rho0, observables)
    if epsilon >= BURES_DIAMETER:
        logger.info("OS: epsilon covers the whole state space, empty plan")
        return SequencePlan(
            PlanMethod.OS, (), (BURES_DIAMETER,), STOP_EPSILON, digest,
        )

    best_subset: tuple[int, ...] = ()
    best_dist = BURES_DIAMETER
    for size in range(1, max_subset + 1):
        level_subset: tuple[int, ...] | None = None
        level_dist = math.inf
        evaluated = 0
        for subset in itertools.combinations(range(len(observables)), size):
            ops = [observables[i] for i in subset]
            if size > 1 and span_rank(ops, include_identity=False) < size:
                continue
            try:
                dist = max_distance(rho0, CompatibleSetSpec.from_state(rho0, ops))
            except (InfeasibleConstraintsError, SolverFailureError) as e:
                raise e.at_step(size) from e
            evaluated += 1
            if dist < level_dist - TIE_TOL:
                level_subset, level_dist = subset, dist

        logger.debug(f"OS: size {size}, {evaluated} subsets, best max distance {level_dist:.6f}")
        if level_subset is None:
            continue
        if level_dist < best_dist:
            best_subset, best_dist = level_subset, level_dist
        if level_dist <= epsilon:
            logger.info(f"OS: subset {list(level_subset)} reaches {level_dist:.6f} <= {epsilon}")
            return SequencePlan(
                PlanMethod.OS, level_subset, (level_dist,), STOP_EPSILON, digest,
            )

    logger.info(f"OS: no subset of size <= {max_subset} reaches epsilon, best {best_dist:.6f}")
    return SequencePlan(PlanMethod.OS, best_subset, (best_dist,), STOP_CAP, digest)


def plan_ios(
    rho0: DensityMatrix,
    observables: ObservableSet,
    epsilon: float | None = None,
    seed: int = 0,
    zero_tol: float = RECONSTRUCTION_TOL,
) -> SequencePlan:
    """
    Greedy sequence minimizing the worst-case Bures distance α at every step.

    α^k_i is the max distance to ρ0 over the states that reproduce ρ0's values on
    the chosen observables and on candidate i. Ties go to the largest IAS score
    Tr²(ρ0 A⊥)/‖A⊥‖², then to a seeded random pick. When the best α is zero
    (ρ0 pinned) the remaining independent observables are appended in ascending
    index order with score 0 and the stop reason is 'span'.

    Args:
        rho0: Pure target
        observables: Information-complete set
        epsilon: Stop as soon as α <= epsilon (stop reason 'epsilon'); None plans to d²
        seed: Tie-break seed
        zero_tol: Distances at or below this count as zero

    Raises:
        InfeasibleConstraintsError, SolverFailureError: with the failing step
    """
    require_pure(rho0)
    require_complete(observables)

    d2 = observables.dim**2
    rng = np.random.default_rng(seed)
    state = ProjectionState.empty(rho0.dim)
    spec = CompatibleSetSpec.empty(rho0.dim)
    remaining = list(range(len(observables)))
    indices: list[int] = []
    scores: list[float] = []
    stop_reason = STOP_COMPLETE

    def tiebreak(tied: list[int]) -> tuple[list[int], np.ndarray]:
        return ias_scores(state, rho0, tied, observables)

    while len(indices) < d2:
        step = len(indices) + 1
        remaining, _ = ias_scores(state, rho0, remaining, observables)
        if not remaining:
            raise LinearDependenceError(f"IOS ran out of independent observables at step {step}")

        alphas = np.empty(len(remaining))
        for j, i in enumerate(remaining):
            op = observables[i]
            try:
                alphas[j] = max_distance(rho0, spec.with_constraint(op, hs_inner(rho0, op)))
            except (InfeasibleConstraintsError, SolverFailureError) as e:
                raise e.at_step(step) from e

        choice = argmin_with_tiebreak(remaining, alphas, tiebreak, rng)
        alpha = float(alphas[remaining.index(choice)])
        op = observables[choice]
        spec = spec.with_constraint(op, hs_inner(rho0, op))
        state = project_update(state, rho0, op)
        indices.append(choice)
        scores.append(alpha)
        remaining.remove(choice)
        logger.debug(f"IOS step {step}: {observables.labels[choice]} alpha={alpha:.6f}")

        if alpha <= zero_tol:
            stop_reason = STOP_SPAN
            for i in sorted(remaining):
                if len(indices) >= d2:
                    break
                try:
                    state = project_update(state, rho0, observables[i])
                except LinearDependenceError:
                    continue
                indices.append(i)
                scores.append(0.0)
            break

        if epsilon is not None and alpha <= epsilon:
            stop_reason = STOP_EPSILON
            break

    logger.info(f"IOS: {len(indices)} indices, stop reason '{stop_reason}'")
    return SequencePlan(
        PlanMethod.IOS,
        tuple(indices),
        tuple(scores),
        stop_reason,
        target_digest(rho0, observables),
        seed,
    )


def plan_ias(rho0: DensityMatrix, observables: ObservableSet, seed: int = 0) -> SequencePlan:
    """
    Greedy sequence maximizing the projected-norm gain ω = Tr²(ρ0 A⊥)/‖A⊥‖².

    Dependent observables are skipped; ties are broken at random (seeded). When
    every remaining ω is zero (ρ0 already in the span) selection continues as a
    random independent fill and the stop reason is 'span'.
    """
    require_complete(observables)

    d2 = observables.dim**2
    rng = np.random.default_rng(seed)
    state = ProjectionState.empty(rho0.dim)
    remaining = list(range(len(observables)))
    indices: list[int] = []
    scores: list[float] = []
    trajectory: list[float] = []
    stop_reason = STOP_COMPLETE

    while len(indices) < d2:
        remaining, omegas = ias_scores(state, rho0, remaining, observables)
        if not remaining:
            raise LinearDependenceError(
                f"IAS ran out of independent observables after {len(indices)} steps"
            )
        if stop_reason == STOP_COMPLETE and float(np.max(omegas)) < TIE_TOL:
            stop_reason = STOP_SPAN
            logger.debug(f"IAS: target in span after {len(indices)} steps, filling at random")

        choice = argmax_random(remaining, omegas, rng)
        state = project_update(state, rho0, observables[choice])
        indices.append(choice)
        scores.append(float(omegas[remaining.index(choice)]))
        trajectory.append(state.projected_norm_sq)
        remaining.remove(choice)

    logger.info(f"IAS: {len(indices)} indices, final norm² {trajectory[-1]:.9f}")
    return SequencePlan(
        PlanMethod.IAS,
        tuple(indices),
        tuple(scores),
        stop_reason,
        target_digest(rho0, observables),
        seed,
        norm_sq_trajectory=tuple(trajectory),
    )


def complete_sequence(plan: SequencePlan, observables: ObservableSet, seed: int) -> SequencePlan:
    """
    Append seeded random observables, each independent of the accumulated span,
    until the plan holds d² linearly independent observables.

    Raises:
        LinearDependenceError: if the set cannot furnish enough independent observables
    """
    plan.check_against(observables)
    d2 = observables.dim**2
    if len(plan) >= d2:
        return plan

    rng = np.random.default_rng(seed)
    basis = np.zeros((0, 2 * d2))
    for i in plan.indices:
        basis = _extend_basis(basis, observables[i].vector)

    indices = list(plan.indices)
    chosen = set(indices)
    for i in rng.permutation(len(observables)):
        if basis.shape[0] >= d2:
            break
        i = int(i)
        if i in chosen:
            continue
        extended = _extend_basis(basis, observables[i].vector)
        if extended.shape[0] > basis.shape[0]:
            basis = extended
            indices.append(i)
            chosen.add(i)

    if basis.shape[0] < d2:
        raise LinearDependenceError(
            f"Observable set spans only {basis.shape[0]} of {d2} dimensions"
        )

    return replace(
        plan,
        indices=tuple(indices),
        seed=plan.seed if plan.seed is not None else seed,
        completed_from=len(plan),
    )


def _extend_basis(basis: np.ndarray, vector: np.ndarray) -> np.ndarray:
    residual = orthogonal_residual(vector, basis)
    norm = float(np.linalg.norm(residual))
    if norm <= DEPENDENCE_TOL:
        return basis
    return np.vstack([basis, residual / norm])


def plan_random(observables: ObservableSet, seed: int) -> SequencePlan:
    """Seeded random order filtered to a tomographically complete sequence."""
    require_complete(observables)
    empty = SequencePlan(
        PlanMethod.RANDOM,
        (),
        stop_reason=STOP_COMPLETE,
        target_digest=digest_arrays(observables.vectors, labels=observables.labels),
        seed=seed,
    )
    return complete_sequence(empty, observables, seed)
