"""
Adaptive verification: measure, estimate, and choose the next observable on line.

After each measurement the distance bracket [ω_k, Ω_k] is tested exactly as in
run_vm. If undecided, the compatible state closest to ρ0 becomes the estimate
ρ_k and every remaining candidate i is scored by the bracket it would produce if
it returned ρ_k's value:

    δ_i = min d_B,  Δ_i = max d_B  over  S_i(ρ_k) ∩ (measured constraints)

The next observable minimizes Δ_i when every δ_i is zero, otherwise
min(ε − δ_i, Δ_i − ε). Ties go to the largest Tr²(ρ_k A⊥)/‖A⊥‖², then to a
seeded random pick.
"""

import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np
import pandas as pd

from .constants import DELTA_ZERO_TOL
from .exceptions import (
    DimensionMismatchError,
    EstimateInconsistencyError,
    InfeasibleConstraintsError,
    LinearDependenceError,
    SolverFailureError,
    UnphysicalStateError,
)
from .hermitian import DensityMatrix, HermitianOperator, ObservableSet, hs_inner, require_pure
from .planner import (
    ProjectionState,
    argmin_with_tiebreak,
    ias_scores,
    project_update,
    require_complete,
)
from .sdp import CompatibleSetSpec, DistanceExtrema, distance_extrema, estimate_state, max_distance
from .utils import digest_arrays
from .verifier import MeasurementOracle, StepRecord, Verdict, decide, reconstruct_state

logger = logging.getLogger(__name__)

RULE_DELTA_ZERO = "delta-zero"
RULE_MIXED = "mixed"


@dataclass(frozen=True)
class CandidateScore:
    """Predicted bracket (δ, Δ) for one candidate observable."""

    index: int
    min_dist: float
    max_dist: float

    def to_dict(self) -> dict:
        return {"index": self.index, "delta": self.min_dist, "Delta": self.max_dist}


@dataclass(frozen=True)
class AdaptiveStep(StepRecord):
    """
    StepRecord plus the look-ahead that chose the next observable.

    Attributes:
        estimate_digest: Hash of ρ_k (empty when the step ended the run)
        selection_rule: 'delta-zero' or 'mixed' for the following choice
        candidates: δ/Δ table over the remaining independent observables
    """

    estimate_digest: str = ""
    selection_rule: str | None = None
    candidates: tuple[CandidateScore, ...] = ()

    def to_dict(self) -> dict:
        record = super().to_dict()
        record["omega"] = record.pop("gamma")
        record["Omega"] = record.pop("Gamma")
        record["estimate_digest"] = self.estimate_digest
        record["selection_rule"] = self.selection_rule
        record["candidates"] = [c.to_dict() for c in self.candidates]
        return record


@dataclass
class AdaptiveTrace:
    """Outcome of one run_av call."""

    verdict: Verdict
    steps_used: int
    steps: list[AdaptiveStep] = field(default_factory=list)
    epsilon: float = 0.0
    seed: int | None = None
    initial_alpha: float | None = None
    reconstructed: DensityMatrix | None = None

    @property
    def indices(self) -> list[int]:
        return [s.index for s in self.steps]

    @property
    def rules_used(self) -> set[str]:
        return {s.selection_rule for s in self.steps if s.selection_rule is not None}

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "steps_used": self.steps_used,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "initial_alpha": self.initial_alpha,
            "steps": [s.to_dict() for s in self.steps],
            "reconstructed": None if self.reconstructed is None else self.reconstructed.to_dict(),
        }

    def to_frame(self) -> pd.DataFrame:
        """Per-step summary without the candidate tables."""
        rows = []
        for s in self.steps:
            record = s.to_dict()
            record["n_candidates"] = len(record.pop("candidates"))
            rows.append(record)
        return pd.DataFrame(
            rows,
            columns=[
                "k", "index", "label", "y", "omega", "Omega",
                "estimate_digest", "selection_rule", "n_candidates",
            ],
        )


def candidate_scores(
    estimate: DensityMatrix,
    accumulated: CompatibleSetSpec,
    candidate: HermitianOperator,
    rho0: DensityMatrix,
) -> DistanceExtrema:
    """
    (δ, Δ): distance bracket after adding candidate with the estimate's value.

    Raises:
        EstimateInconsistencyError: the augmented set is empty, which means the
            estimate does not satisfy the accumulated constraints
    """
    augmented = accumulated.with_constraint(candidate, hs_inner(estimate, candidate))
    try:
        return distance_extrema(rho0, augmented)
    except InfeasibleConstraintsError as e:
        raise EstimateInconsistencyError(
            f"Estimate is inconsistent with {len(accumulated)} accumulated constraints: {e.reason}"
        ) from e


def _initial_choice(
    observables: ObservableSet, rho0: DensityMatrix, rng: np.random.Generator
) -> tuple[int, float]:
    """m₁ = argmin_i α¹_i with the IAS tie-break against ρ0."""
    empty = ProjectionState.empty(rho0.dim)
    candidates, _ = ias_scores(empty, rho0, list(range(len(observables))), observables)
    alphas = np.empty(len(candidates))
    for j, i in enumerate(candidates):
        op = observables[i]
        spec = CompatibleSetSpec.from_state(rho0, [op])
        try:
            alphas[j] = max_distance(rho0, spec)
        except (InfeasibleConstraintsError, SolverFailureError) as e:
            raise e.at_step(1) from e

    def tiebreak(tied: list[int]) -> tuple[list[int], np.ndarray]:
        return ias_scores(empty, rho0, tied, observables)

    choice = argmin_with_tiebreak(candidates, alphas, tiebreak, rng)
    return choice, float(alphas[candidates.index(choice)])


def run_av(
    observables: ObservableSet,
    oracle: MeasurementOracle,
    rho0: DensityMatrix,
    epsilon: float,
    seed: int = 0,
) -> AdaptiveTrace:
    """
    Adaptive verification of the oracle's state against the pure target ρ0.

    Args:
        observables: Information-complete set
        oracle: Measurement source for the prepared state
        rho0: Pure target
        epsilon: Bures accuracy radius (> 0)
        seed: Tie-break seed

    Returns:
        AdaptiveTrace with at most d² steps

    Raises:
        InfeasibleConstraintsError: measured values admit no state (re-measure)
        SolverFailureError: an SDP did not converge
        EstimateInconsistencyError: a look-ahead set was empty
    """
    require_pure(rho0)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not (oracle.dim == rho0.dim == observables.dim):
        raise DimensionMismatchError(
            f"Oracle dim {oracle.dim}, target dim {rho0.dim}, observable dim {observables.dim}"
        )
    require_complete(observables)

    d2 = observables.dim**2
    rng = np.random.default_rng(seed)
    choice, initial_alpha = _initial_choice(observables, rho0, rng)
    logger.debug(f"AV: first observable {observables.labels[choice]} (alpha={initial_alpha:.6f})")

    spec = CompatibleSetSpec.empty(rho0.dim)
    state = ProjectionState.empty(rho0.dim)
    remaining = [i for i in range(len(observables)) if i != choice]
    steps: list[AdaptiveStep] = []
    values: list[float] = []
    verdict: Verdict | None = None

    while verdict is None:
        k = len(steps) + 1
        op = observables[choice]
        y = oracle.measure(op)
        values.append(y)
        spec = spec.with_constraint(op, y)
        state = project_update(state, rho0, op)
        try:
            lower, upper = distance_extrema(rho0, spec)
        except (InfeasibleConstraintsError, SolverFailureError) as e:
            logger.warning(f"AV aborted at step {k}: {e}")
            raise e.at_step(k) from e

        base = (k, choice, observables.labels[choice], y, lower, upper)
        verdict = decide(lower, upper, epsilon)
        if verdict is not None or k >= d2:
            steps.append(AdaptiveStep(*base))
            break

        try:
            estimate = estimate_state(rho0, spec)
        except (InfeasibleConstraintsError, SolverFailureError) as e:
            raise e.at_step(k) from e

        remaining, _ = ias_scores(state, estimate, remaining, observables)
        if not remaining:
            steps.append(AdaptiveStep(*base))
            break

        table = []
        for i in remaining:
            try:
                delta, big_delta = candidate_scores(estimate, spec, observables[i], rho0)
            except (SolverFailureError, EstimateInconsistencyError) as e:
                logger.warning(f"AV look-ahead failed at step {k}: {e}")
                raise e.at_step(k) from e
            table.append(CandidateScore(i, delta, big_delta))

        deltas = np.array([c.min_dist for c in table])
        upper_deltas = np.array([c.max_dist for c in table])
        if np.all(deltas < DELTA_ZERO_TOL):
            rule, primary = RULE_DELTA_ZERO, upper_deltas
        else:
            rule, primary = RULE_MIXED, np.minimum(epsilon - deltas, upper_deltas - epsilon)

        tiebreak = partial(ias_scores, state, estimate, observables=observables)
        choice = argmin_with_tiebreak(remaining, primary, tiebreak, rng)
        remaining.remove(choice)
        steps.append(
            AdaptiveStep(
                *base,
                estimate_digest=digest_arrays(estimate.matrix),
                selection_rule=rule,
                candidates=tuple(table),
            )
        )
        logger.debug(
            f"AV step {k}: [{lower:.6f}, {upper:.6f}], rule {rule}, "
            f"next {observables.labels[choice]}"
        )

    reconstructed = None
    if verdict is None:
        verdict = Verdict.EXHAUSTED
        measured = [s.index for s in steps]
        try:
            reconstructed = reconstruct_state(observables, measured, values)
        except (LinearDependenceError, UnphysicalStateError) as e:
            logger.warning(f"AV exhausted without a usable reconstruction: {e}")

    logger.info(f"AV: {verdict.value} after {len(steps)} steps")
    return AdaptiveTrace(
        verdict, len(steps), steps, epsilon, seed, initial_alpha, reconstructed
    )
