"""
Tests for sdp module.

Covers the compatible-set container, linear extremization, the Bures bracket
against closed-form qubit values, and infeasibility reporting.
"""

import math

import numpy as np
import pytest

from qsv.exceptions import DimensionMismatchError, InfeasibleConstraintsError, SolverFailureError
from qsv.hermitian import (
    DensityMatrix,
    HermitianOperator,
    bures_from_fidelity,
    hs_inner,
    random_pure_target,
)
from qsv.sdp import (
    CompatibleSetSpec,
    SdpSolution,
    SdpStatus,
    Sense,
    distance_extrema,
    estimate_state,
    extremize_linear,
    max_distance,
    _polish,
    _reduce_constraints,
    raise_for_status,
)

X_PLUS, X_MINUS, Y_PLUS, Y_MINUS, Z_PLUS, Z_MINUS = range(6)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bloch_state(r) -> np.ndarray:
    return (np.eye(2) + sum(c * p for c, p in zip(r, PAULI))) / 2


class TestCompatibleSetSpec:
    """Test the constraint container."""

    def test_from_state(self, ket0, qubit_observables):
        """Values are the target's expectations."""
        spec = CompatibleSetSpec.from_state(ket0, [qubit_observables[Z_PLUS], qubit_observables[X_PLUS]])
        np.testing.assert_allclose(spec.values, [1.0, 0.5])
        assert len(spec) == 2

    def test_with_constraint_is_copy(self, qubit_observables):
        spec = CompatibleSetSpec.empty(2)
        extended = spec.with_constraint(qubit_observables[Z_PLUS], 1.0)
        assert len(spec) == 0
        assert len(extended) == 1

    def test_dimension_mismatch(self, pauli2q):
        with pytest.raises(DimensionMismatchError):
            CompatibleSetSpec(2, ((pauli2q[0], 0.5),))

    def test_non_finite_value(self, qubit_observables):
        with pytest.raises(ValueError, match="non-finite"):
            CompatibleSetSpec(2, ((qubit_observables[0], float("nan")),))

    def test_is_satisfied_by(self, ket0, qubit_observables):
        spec = CompatibleSetSpec(2, ((qubit_observables[Z_PLUS], 1.0),))
        assert spec.is_satisfied_by(ket0)
        assert not spec.is_satisfied_by(DensityMatrix.maximally_mixed(2))


class TestExtremizeLinear:
    """Test the linear-objective SDP."""

    def test_unconstrained_range(self, qubit_observables):
        """Without data Tr(ρ Πz+) ranges over [0, 1]."""
        spec = CompatibleSetSpec.empty(2)
        top = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MAX)
        bottom = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MIN)
        assert top.status is SdpStatus.OPTIMAL
        assert top.value == pytest.approx(1.0, abs=1e-6)
        assert bottom.value == pytest.approx(0.0, abs=1e-6)

    def test_pinned_by_projector(self, ket0, qubit_observables):
        """Tr(ρ Πz+) = 1 pins ρ = |0⟩⟨0|, so the objective is 1 both ways."""
        spec = CompatibleSetSpec(2, ((qubit_observables[Z_PLUS], 1.0),))
        for sense in (Sense.MIN, Sense.MAX):
            solution = extremize_linear(ket0, spec, sense)
            assert solution.is_optimal
            assert solution.value == pytest.approx(1.0, abs=1e-7)
            np.testing.assert_allclose(solution.optimizer.matrix, ket0.matrix, atol=1e-6)

    def test_equator_constraint(self, qubit_observables):
        """Tr(ρ Πx+) = ½ leaves Tr(ρ Πz+) free in [0, 1]."""
        spec = CompatibleSetSpec(2, ((qubit_observables[X_PLUS], 0.5),))
        top = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MAX)
        bottom = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MIN)
        assert top.value == pytest.approx(1.0, abs=1e-6)
        assert bottom.value == pytest.approx(0.0, abs=1e-6)

    def test_optimizer_satisfies_constraints(self, random_target, pauli2q):
        """Optimizers are density matrices reproducing every value."""
        ops = [pauli2q[i] for i in (0, 7, 14, 21, 28)]
        spec = CompatibleSetSpec.from_state(random_target, ops)
        solution = extremize_linear(random_target, spec, Sense.MIN)
        assert solution.is_optimal
        assert spec.residuals(solution.optimizer).max() < 1e-6
        assert solution.value == pytest.approx(hs_inner(solution.optimizer, random_target))

    def test_inconsistent_dependent_rows(self, qubit_observables):
        """Πz+ = 1 and Πz− = 1 contradict Tr ρ = 1 before any solve."""
        spec = CompatibleSetSpec(
            2, ((qubit_observables[Z_PLUS], 1.0), (qubit_observables[Z_MINUS], 1.0))
        )
        solution = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MAX)
        assert solution.status is SdpStatus.INFEASIBLE
        assert solution.residuals["inconsistency"] == pytest.approx(1.0)

    def test_consistent_dependent_rows(self, ket0, qubit_observables):
        """Redundant but consistent rows are dropped silently."""
        spec = CompatibleSetSpec.from_state(
            ket0, [qubit_observables[Z_PLUS], qubit_observables[Z_MINUS]]
        )
        solution = extremize_linear(ket0, spec, Sense.MIN)
        assert solution.is_optimal
        assert solution.value == pytest.approx(1.0, abs=1e-7)

    def test_value_outside_spectrum(self, qubit_observables):
        """No state has Tr(ρ Πx+) = 1.5."""
        spec = CompatibleSetSpec(2, ((qubit_observables[X_PLUS], 1.5),))
        solution = extremize_linear(qubit_observables[Z_PLUS], spec, Sense.MAX)
        assert solution.status is not SdpStatus.OPTIMAL

    def test_objective_dimension(self, ket00, qubit_observables):
        with pytest.raises(DimensionMismatchError):
            extremize_linear(ket00, CompatibleSetSpec.empty(2), Sense.MAX)


class TestDistanceExtrema:
    """Test the Bures bracket."""

    def test_pinned_target(self, ket0, qubit_observables):
        """Measuring Πz+ = 1 on a |0⟩ target decides the distance exactly."""
        spec = CompatibleSetSpec(2, ((qubit_observables[Z_PLUS], 1.0),))
        assert distance_extrema(ket0, spec) == (0.0, 0.0)
        assert max_distance(ket0, spec) == 0.0

    def test_unconstrained_bracket(self, ket0):
        """Without data the bracket is [0, √2]."""
        lower, upper = distance_extrema(ket0, CompatibleSetSpec.empty(2))
        assert lower == 0.0
        assert upper == pytest.approx(math.sqrt(2), abs=1e-3)

    @pytest.mark.parametrize("y", [0.1, 0.3, 0.5, 0.8, 0.95])
    def test_bloch_disc(self, ket0, qubit_observables, y):
        """
        Tr(ρ Πx+) = y fixes the Bloch x-coordinate to 2y − 1; the fidelity with
        |0⟩ then ranges over (1 ± sqrt(1 − x²))/2.
        """
        spec = CompatibleSetSpec(2, ((qubit_observables[X_PLUS], y),))
        x = 2 * y - 1
        z = math.sqrt(1 - x * x)
        lower, upper = distance_extrema(ket0, spec)
        assert lower == pytest.approx(bures_from_fidelity((1 + z) / 2, 1e-7), abs=1e-4)
        assert upper == pytest.approx(bures_from_fidelity((1 - z) / 2), abs=1e-3)

    def test_bracket_nests(self, random_target, pauli2q):
        """More constraints never widen the bracket."""
        rho_exp = DensityMatrix.nearest(0.9 * random_target.matrix + 0.1 * np.eye(4) / 4)
        spec = CompatibleSetSpec.empty(4)
        previous = (0.0, math.sqrt(2))
        for i in (3, 10, 17, 24, 31):
            spec = spec.with_constraint(pauli2q[i], hs_inner(rho_exp, pauli2q[i]))
            lower, upper = distance_extrema(random_target, spec)
            assert lower >= previous[0] - 1e-6
            assert upper <= previous[1] + 1e-6
            assert lower <= upper + 1e-9
            previous = (lower, upper)

    def test_distance_snaps_to_zero(self, ket00, pauli2q):
        """A feasible target gives a lower distance of exactly 0."""
        spec = CompatibleSetSpec.from_state(ket00, [pauli2q[0], pauli2q[7]])
        assert distance_extrema(ket00, spec).min_dist == 0.0

    def test_infeasible_raises(self, ket0, qubit_observables):
        spec = CompatibleSetSpec(
            2, ((qubit_observables[Z_PLUS], 1.0), (qubit_observables[Z_MINUS], 1.0))
        )
        with pytest.raises(InfeasibleConstraintsError, match="re-measure"):
            distance_extrema(ket0, spec)


class TestEstimateState:
    """Test the max-fidelity estimate."""

    def test_compatible_target_returned(self, ket0, qubit_observables):
        spec = CompatibleSetSpec(2, ((qubit_observables[X_PLUS], 0.5),))
        assert estimate_state(ket0, spec) is ket0

    def test_estimate_satisfies_data(self, ket0, qubit_observables):
        """|0⟩ is incompatible with Tr(ρ Πz+) = 0.6; the estimate is on the slice."""
        spec = CompatibleSetSpec(2, ((qubit_observables[Z_PLUS], 0.6),))
        estimate = estimate_state(ket0, spec)
        assert hs_inner(estimate, qubit_observables[Z_PLUS]) == pytest.approx(0.6, abs=1e-6)
        assert hs_inner(estimate, ket0) == pytest.approx(0.6, abs=1e-6)


class TestRaiseForStatus:
    """Test status translation."""

    def test_optimal_passes(self):
        raise_for_status(SdpSolution(SdpStatus.OPTIMAL, 1.0))

    def test_infeasible_with_step(self):
        with pytest.raises(InfeasibleConstraintsError) as info:
            raise_for_status(SdpSolution(SdpStatus.INFEASIBLE), step=4)
        assert info.value.step == 4
        assert str(info.value).startswith("step 4:")

    def test_failure(self):
        with pytest.raises(SolverFailureError):
            raise_for_status(SdpSolution(SdpStatus.NUMERICAL_FAILURE))

    def test_at_step_rewrites_message(self):
        """at_step attributes an existing error to a step without doubling the suffix."""
        error = InfeasibleConstraintsError("the compatible set is empty").at_step(7)
        assert str(error) == (
            "step 7: the compatible set is empty; stop the verification and re-measure"
        )


class TestPolish:
    """Test the boundary clean-up of solver iterates."""

    def test_boundary_iterate_lands_in_cone(self, random_target, pauli2q):
        """A pure optimizer carrying ~1e-8 noise comes back PSD and on the slice."""
        spec = CompatibleSetSpec.from_state(random_target, [pauli2q[i] for i in (0, 7, 14)])
        basis, values, _ = _reduce_constraints(spec)
        rng = np.random.default_rng(3)
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        kernel = np.eye(4) - random_target.matrix
        raw = random_target.matrix + 1e-8 * (g + g.conj().T) - 5e-8 * kernel
        assert np.linalg.eigvalsh(raw)[0] < -1e-9

        polished = _polish(raw, spec, basis, values)
        assert isinstance(polished, DensityMatrix)
        assert np.linalg.eigvalsh(polished.matrix)[0] >= -1e-12
        assert spec.residuals(polished).max() <= 1e-7
        np.testing.assert_allclose(polished.matrix, random_target.matrix, atol=1e-6)

    def test_slice_outside_cone_rejected(self, qubit_observables):
        """Tr(ρ Πx+) = 1.5 has no PSD point, so nothing survives the residual check."""
        spec = CompatibleSetSpec(2, ((qubit_observables[X_PLUS], 1.5),))
        basis, values, _ = _reduce_constraints(spec)
        assert _polish(np.eye(2) / 2, spec, basis, values) is None


class TestRandomInstances:
    """Randomized solves that must all succeed."""

    @pytest.mark.parametrize("seed", range(40))
    def test_min_fidelity_and_max_distance(self, pauli2q, seed):
        """Min-fidelity and max-distance solves on random specs never fail."""
        rng = np.random.default_rng(seed)
        target = random_pure_target(rng, dim=4)
        noisy = DensityMatrix.nearest(
            0.9 * target.matrix + 0.1 * random_pure_target(rng, dim=4).matrix
        )
        indices = rng.choice(len(pauli2q), size=int(rng.integers(1, 9)), replace=False)
        for source in (target, noisy):
            spec = CompatibleSetSpec.from_state(source, [pauli2q[int(i)] for i in indices])
            solution = extremize_linear(target, spec, Sense.MIN)
            assert solution.is_optimal, solution.residuals
            assert spec.residuals(solution.optimizer).max() <= 1e-7
            assert 0.0 <= max_distance(target, spec) <= math.sqrt(2) + 1e-9

    def test_against_bloch_grid(self, qubit_observables):
        """
        One projector constraint pins a Bloch coordinate, leaving a disc whose
        boundary carries the extrema of any linear objective. The boundary is
        sampled at 1e-3 rad and compared with the SDP value.
        """
        rng = np.random.default_rng(2024)
        angles = np.arange(0.0, 2 * np.pi, 1e-3)
        for _ in range(100):
            g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            objective = HermitianOperator(g + g.conj().T)
            offset = np.trace(objective.matrix).real / 2
            weights = np.array([np.trace(objective.matrix @ p).real / 2 for p in PAULI])

            direction = rng.standard_normal(3)
            r = direction / np.linalg.norm(direction) * rng.uniform(0.0, 0.95)
            axis, sign = int(rng.integers(3)), int(rng.choice([1, -1]))
            index = 2 * axis + (0 if sign == 1 else 1)
            y = hs_inner(qubit_observables[index], bloch_state(r))
            spec = CompatibleSetSpec(2, ((qubit_observables[index], y),))

            free = [a for a in range(3) if a != axis]
            radius = math.sqrt(max(1.0 - r[axis] ** 2, 0.0))
            grid = np.zeros((angles.size, 3))
            grid[:, axis] = r[axis]
            grid[:, free[0]] = radius * np.cos(angles)
            grid[:, free[1]] = radius * np.sin(angles)
            sampled = offset + grid @ weights

            top = extremize_linear(objective, spec, Sense.MAX)
            bottom = extremize_linear(objective, spec, Sense.MIN)
            assert top.is_optimal and bottom.is_optimal
            assert top.value == pytest.approx(sampled.max(), abs=1e-5)
            assert bottom.value == pytest.approx(sampled.min(), abs=1e-5)
