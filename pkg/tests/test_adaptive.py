"""
Tests for adaptive module.

Tests look-ahead scoring and adaptive verification on product, orthogonal and
perturbed preparations.
"""

import math

import numpy as np
import pytest

from qsv.adaptive import RULE_DELTA_ZERO, RULE_MIXED, candidate_scores, run_av
from qsv.constants import DELTA_ZERO_TOL, TIE_TOL
from qsv.exceptions import DimensionMismatchError, EstimateInconsistencyError, StepError
from qsv.hermitian import (
    DensityMatrix,
    bures_pure,
    epsilon_from_fidelity,
    random_pure_target,
    sample_preparation,
)
from qsv.sdp import CompatibleSetSpec
from qsv.verifier import MeasurementOracle, Verdict, bracket_is_monotone

EPSILON = epsilon_from_fidelity(0.95)
X_PLUS, Z_PLUS, Z_MINUS = 0, 4, 5
ZZ_PLUS = 28


class TestCandidateScores:
    """Test the δ/Δ look-ahead."""

    def test_estimate_on_target(self, ket0, qubit_observables):
        """A compatible target gives δ = 0."""
        spec = CompatibleSetSpec.empty(2)
        delta, big_delta = candidate_scores(ket0, spec, qubit_observables[X_PLUS], ket0)
        assert delta == 0.0
        assert big_delta > 0.5

    def test_pinning_candidate(self, ket0, qubit_observables):
        """Πz+ with the target's value closes the bracket."""
        scores = candidate_scores(ket0, CompatibleSetSpec.empty(2), qubit_observables[Z_PLUS], ket0)
        assert scores == (0.0, 0.0)

    def test_inconsistent_estimate(self, ket0, qubit_observables):
        """An estimate that violates the accumulated data is reported."""
        spec = CompatibleSetSpec(2, ((qubit_observables[Z_PLUS], 1.0),))
        estimate = DensityMatrix.maximally_mixed(2)
        with pytest.raises(EstimateInconsistencyError):
            candidate_scores(estimate, spec, qubit_observables[Z_MINUS], ket0)


class TestRunAV:
    """Test adaptive verification."""

    def test_target_prepared(self, ket00, pauli2q):
        """|00⟩ is accepted after the single pinning measurement."""
        trace = run_av(pauli2q, MeasurementOracle.perfect(ket00), ket00, EPSILON, seed=0)
        assert trace.verdict is Verdict.ACCURATE
        assert trace.steps_used == 1
        assert trace.indices == [ZZ_PLUS]
        assert trace.initial_alpha == 0.0

    def test_orthogonal_rejected(self, ket00, ket11, pauli2q):
        trace = run_av(pauli2q, MeasurementOracle.perfect(ket11), ket00, EPSILON, seed=0)
        assert trace.verdict is Verdict.NOT_ACCURATE
        assert trace.steps_used == 1
        assert trace.steps[0].min_dist == pytest.approx(math.sqrt(2), abs=1e-3)

    def test_exact_preparation_uses_delta_zero(self, random_target, pauli2q):
        """While ρ0 stays compatible every δ is zero and Δ alone decides."""
        trace = run_av(
            pauli2q, MeasurementOracle.perfect(random_target), random_target, EPSILON, seed=1
        )
        assert trace.verdict is Verdict.ACCURATE
        assert trace.rules_used <= {RULE_DELTA_ZERO}
        for step in trace.steps:
            assert step.min_dist == 0.0
            assert all(c.min_dist < DELTA_ZERO_TOL for c in step.candidates)

    def test_nonaccurate_uses_mixed_rule(self, random_target, pauli2q):
        """
        Once ρ0 is excluded δ turns positive, and the next observable minimizes
        min(ε − δ, Δ − ε) over the logged candidate table.
        """
        mixed_steps = 0
        for seed in range(2, 8):
            prep = sample_preparation(random_target, EPSILON, 0.1, 0.1, False, seed=seed)
            trace = run_av(
                pauli2q, MeasurementOracle.perfect(prep.state), random_target, EPSILON, seed=seed
            )
            assert trace.verdict is Verdict.NOT_ACCURATE
            for step, following in zip(trace.steps, trace.steps[1:]):
                if step.min_dist > DELTA_ZERO_TOL:
                    assert step.selection_rule == RULE_MIXED
                if step.selection_rule != RULE_MIXED:
                    continue
                mixed_steps += 1
                deltas = np.array([c.min_dist for c in step.candidates])
                uppers = np.array([c.max_dist for c in step.candidates])
                score = np.minimum(EPSILON - deltas, uppers - EPSILON)
                chosen = [c.index for c in step.candidates].index(following.index)
                assert score[chosen] <= score.min() + TIE_TOL
        assert mixed_steps > 0

    @pytest.mark.parametrize("accurate,lam", [(True, 1e-4), (False, 0.1)])
    def test_bracket_sandwich(self, random_target, pauli2q, accurate, lam):
        """Brackets nest, contain the true distance and end in the right verdict."""
        prep = sample_preparation(random_target, EPSILON, lam, 0.1, accurate, seed=9)
        trace = run_av(pauli2q, MeasurementOracle.perfect(prep.state), random_target, EPSILON, seed=9)
        truth = bures_pure(prep.state, random_target)
        for step in trace.steps:
            assert step.min_dist <= truth + 1e-4
            assert step.max_dist >= truth - 1e-4
        assert bracket_is_monotone(trace.steps)
        assert len(set(trace.indices)) == trace.steps_used <= 16
        assert trace.verdict is (Verdict.ACCURATE if accurate else Verdict.NOT_ACCURATE)

    def test_seeded(self, random_target, pauli2q):
        prep = sample_preparation(random_target, EPSILON, 1e-4, 0.1, True, seed=4)
        oracle = MeasurementOracle.perfect(prep.state)
        a = run_av(pauli2q, oracle, random_target, EPSILON, seed=6)
        b = run_av(pauli2q, oracle, random_target, EPSILON, seed=6)
        assert a.indices == b.indices
        assert a.verdict is b.verdict

    def test_trace_tables(self, ket00, ket11, pauli2q):
        trace = run_av(pauli2q, MeasurementOracle.perfect(ket11), ket00, EPSILON, seed=0)
        frame = trace.to_frame()
        assert list(frame.columns) == [
            "k", "index", "label", "y", "omega", "Omega",
            "estimate_digest", "selection_rule", "n_candidates",
        ]
        record = trace.to_dict()
        assert record["verdict"] == "NotAccurate"
        assert "omega" in record["steps"][0]

    def test_invalid_inputs(self, ket0, ket00, pauli2q):
        with pytest.raises(ValueError):
            run_av(pauli2q, MeasurementOracle.perfect(ket00), ket00, -0.1)
        with pytest.raises(DimensionMismatchError):
            run_av(pauli2q, MeasurementOracle.perfect(ket0), ket00, EPSILON)

    def test_lookahead_inconsistency_carries_step(self, random_target, pauli2q, monkeypatch):
        """An empty look-ahead set aborts the run and names the step it happened at."""

        def empty_lookahead(*args, **kwargs):
            raise EstimateInconsistencyError("look-ahead set is empty")

        monkeypatch.setattr("qsv.adaptive.candidate_scores", empty_lookahead)
        with pytest.raises(EstimateInconsistencyError) as info:
            run_av(pauli2q, MeasurementOracle.perfect(random_target), random_target, EPSILON)
        assert isinstance(info.value, StepError)
        assert info.value.step == 1
        assert str(info.value) == "step 1: look-ahead set is empty"


class TestRunAVFiniteShots:
    """Adaptive verification on sampled frequencies."""

    def test_seed_reproduces_trace(self, random_target, pauli2q):
        """Equal oracle and tie-break seeds give the same sampled trace."""
        prep = sample_preparation(random_target, EPSILON, 0.1, 0.1, False, seed=12)
        traces = [
            run_av(
                pauli2q,
                MeasurementOracle.finite_shots(prep.state, 100_000, seed=5),
                random_target,
                EPSILON,
                seed=3,
            )
            for _ in range(2)
        ]
        assert traces[0].indices == traces[1].indices
        assert [s.y for s in traces[0].steps] == [s.y for s in traces[1].steps]
        assert traces[0].verdict is traces[1].verdict
        assert all(abs(s.y * 100_000 - round(s.y * 100_000)) < 1e-6 for s in traces[0].steps)

    @pytest.mark.slow
    def test_agrees_with_perfect_oracle(self, pauli2q):
        """With 10⁶ shots at least 95% of verdicts match the exact-value verdict."""
        rng = np.random.default_rng(17)
        agree = total = 0
        while total < 20:
            rho0 = random_pure_target(rng)
            accurate = bool(total % 2)
            lam = 0.02 if accurate else 0.1
            prep = sample_preparation(rho0, EPSILON, lam, 0.1, accurate, seed=rng)
            if abs(prep.distance - EPSILON) <= 0.02:
                continue
            exact = run_av(
                pauli2q, MeasurementOracle.perfect(prep.state), rho0, EPSILON, seed=total
            )
            sampled_oracle = MeasurementOracle.finite_shots(prep.state, 1_000_000, seed=total)
            try:
                sampled = run_av(pauli2q, sampled_oracle, rho0, EPSILON, seed=total)
            except StepError:
                sampled = None
            agree += sampled is not None and sampled.verdict is exact.verdict
            total += 1
        assert agree >= 0.95 * total
