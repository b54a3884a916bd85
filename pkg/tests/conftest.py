"""
Pytest configuration and fixtures for qsv tests.

Provides the Pauli observable sets, a few named two-qubit states and seeded
random targets shared by the planner, verifier and adaptive tests.
"""

import json

import numpy as np
import pytest

from qsv.experiment import ExperimentConfig
from qsv.hermitian import DensityMatrix, pauli_projector_set, random_pure_target


@pytest.fixture(scope="session")
def qubit_observables():
    """Πx±, Πy±, Πz± for one qubit."""
    return pauli_projector_set(1)


@pytest.fixture(scope="session")
def pauli2q():
    """The 36 two-qubit products of Pauli eigenprojectors."""
    return pauli_projector_set(2)


@pytest.fixture
def ket0() -> DensityMatrix:
    return DensityMatrix.pure([1, 0])


@pytest.fixture
def ket00() -> DensityMatrix:
    """|00⟩⟨00|, an eigenstate of z+⊗z+."""
    return DensityMatrix.pure([1, 0, 0, 0])


@pytest.fixture
def ket11() -> DensityMatrix:
    """|11⟩⟨11|, orthogonal to |00⟩ (Bures distance √2)."""
    return DensityMatrix.pure([0, 0, 0, 1])


@pytest.fixture
def bell() -> DensityMatrix:
    """(|00⟩ + |11⟩)/√2."""
    return DensityMatrix.pure(np.array([1, 0, 0, 1]) / np.sqrt(2))


@pytest.fixture
def random_target() -> DensityMatrix:
    """Generic pure two-qubit target, seeded."""
    return random_pure_target(7, dim=4)


@pytest.fixture
def tiny_config() -> ExperimentConfig:
    """Two targets, the SDP-free planner plus two control orders, run in-process."""
    return ExperimentConfig(
        seed=11,
        n_targets=2,
        algorithms=("IAS", "Random"),
        n_control_sequences=2,
        n_workers=1,
        reconstruction_study=False,
    )


@pytest.fixture
def state_file(tmp_path):
    """Write a density matrix as {dim, re, im} JSON and return the path."""

    def _write(name: str, state: DensityMatrix):
        path = tmp_path / name
        path.write_text(json.dumps(state.to_dict()), encoding="utf-8")
        return path

    return _write
