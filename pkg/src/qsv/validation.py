"""
Validation utilities for operators, observable sets and experiment settings.

Provides validation functions for checking Hermiticity, density-matrix
constraints and configuration ranges before any optimization is run.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import linalg

from .constants import (
    ALGORITHMS,
    CLASSES,
    EIGENVALUE_FLOOR,
    HERMITIAN_TOL,
    SDP_FEASIBILITY_TOL,
    TRACE_TOL,
)

logger = logging.getLogger(__name__)


@dataclass
class ValidationResult:
    """Result of an operator or configuration validation."""

    is_valid: bool
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    dim: int = 0
    count: int = 0

    def __bool__(self) -> bool:
        """Return True if validation passed."""
        return self.is_valid

    def __str__(self) -> str:
        """String representation of validation result."""
        status = "✓ Valid" if self.is_valid else "✗ Invalid"
        msg = f"{status} (dim {self.dim}, {self.count} items)"

        if self.warnings:
            msg += f"\nWarnings: {'; '.join(self.warnings)}"

        if self.errors:
            msg += f"\nErrors: {'; '.join(self.errors)}"

        return msg


def validate_hermitian(matrix: Any, tol: float = HERMITIAN_TOL) -> ValidationResult:
    """
    Validate that a matrix is a finite square Hermitian matrix.

    Args:
        matrix: Array-like d×d complex matrix
        tol: Maximum absolute entry deviation from the conjugate transpose

    Returns:
        ValidationResult with is_valid flag and detailed error messages
    """
    result = ValidationResult(is_valid=True, count=1)

    try:
        m = np.asarray(matrix, dtype=complex)
    except (TypeError, ValueError) as e:
        result.is_valid = False
        result.errors.append(f"Not a numeric matrix: {e}")
        return result

    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        result.is_valid = False
        result.errors.append(f"Matrix must be square and non-empty, got shape {m.shape}")
        return result

    result.dim = m.shape[0]

    if not np.all(np.isfinite(m)):
        result.is_valid = False
        result.errors.append("Matrix has non-finite entries")
        return result

    deviation = float(np.max(np.abs(m - m.conj().T)))
    if deviation > tol:
        result.is_valid = False
        result.errors.append(f"Matrix is not Hermitian: max deviation {deviation:.3e} > {tol:.0e}")

    return result


def validate_density_matrix(
    matrix: Any,
    eigenvalue_floor: float = EIGENVALUE_FLOOR,
    trace_tol: float = TRACE_TOL,
) -> ValidationResult:
    """
    Validate the density-matrix constraints: Hermitian, PSD, unit trace.

    Checks:
    - Hermiticity (see validate_hermitian)
    - Smallest eigenvalue >= eigenvalue_floor
    - |Tr(rho) - 1| <= trace_tol

    Returns:
        ValidationResult; slightly negative eigenvalues inside the floor are warnings
    """
    result = validate_hermitian(matrix)
    if not result.is_valid:
        return result

    m = np.asarray(matrix, dtype=complex)
    h = (m + m.conj().T) / 2
    eigenvalues = linalg.eigvalsh(h)
    lowest = float(eigenvalues[0])

    if lowest < eigenvalue_floor:
        result.is_valid = False
        result.errors.append(f"Negative eigenvalue {lowest:.3e} below floor {eigenvalue_floor:.0e}")
    elif lowest < 0:
        result.warnings.append(f"Eigenvalue {lowest:.3e} slightly below zero")

    trace = float(np.trace(h).real)
    if abs(trace - 1.0) > trace_tol:
        result.is_valid = False
        result.errors.append(f"Trace {trace:.12f} differs from 1 by more than {trace_tol:.0e}")

    return result


def validate_observable_set(
    matrices: Sequence[Any],
    labels: Sequence[str],
) -> ValidationResult:
    """
    Validate an observable set: non-empty, one dimension, unique labels, Hermitian members.

    Args:
        matrices: Observable matrices
        labels: One display label per observable

    Returns:
        ValidationResult with count = number of observables
    """
    result = ValidationResult(is_valid=True, count=len(matrices))

    if len(matrices) == 0:
        result.is_valid = False
        result.errors.append("No observables provided")
        return result

    if len(labels) != len(matrices):
        result.is_valid = False
        result.errors.append(f"{len(labels)} labels for {len(matrices)} observables")
        return result

    dims = set()
    for i, (matrix, label) in enumerate(zip(matrices, labels)):
        check = validate_hermitian(matrix)
        if not check.is_valid:
            result.is_valid = False
            result.errors.append(f"Observable '{label}' (index {i}): {'; '.join(check.errors)}")
            continue
        dims.add(check.dim)

    if len(dims) > 1:
        result.is_valid = False
        result.errors.append(f"Observables have mixed dimensions: {sorted(dims)}")
    elif dims:
        result.dim = dims.pop()

    seen: set[str] = set()
    duplicates = sorted({label for label in labels if label in seen or seen.add(label)})
    if duplicates:
        result.is_valid = False
        result.errors.append(f"Duplicate labels: {', '.join(duplicates)}")

    return result


def validate_experiment_config(config: Any) -> ValidationResult:
    """
    Validate experiment settings.

    Args:
        config: Object with the ExperimentConfig attributes

    Returns:
        ValidationResult with detailed error messages
    """
    result = ValidationResult(is_valid=True, dim=4)

    if config.n_targets < 1:
        result.errors.append(f"n_targets must be >= 1, got {config.n_targets}")

    if not 0.0 < config.epsilon_fidelity < 1.0:
        result.errors.append(f"epsilon_fidelity must be in (0, 1), got {config.epsilon_fidelity}")

    for name in ("lambda_accurate", "lambda_nonaccurate"):
        value = getattr(config, name)
        if not 0.0 <= value <= 1.0:
            result.errors.append(f"{name} must be in [0, 1], got {value}")

    if config.eta < 0:
        result.errors.append(f"eta must be >= 0, got {config.eta}")

    if config.n_control_sequences < 0:
        result.errors.append(
            f"n_control_sequences must be >= 0, got {config.n_control_sequences}"
        )

    if config.shots is not None and config.shots < 1:
        result.errors.append(f"shots must be a positive integer, got {config.shots}")

    unknown = [a for a in config.algorithms if a not in ALGORITHMS]
    if unknown:
        result.errors.append(f"Unknown algorithms: {', '.join(unknown)}")
    if not config.algorithms:
        result.errors.append("No algorithms selected")

    if config.os_cap < 1:
        result.errors.append(f"os_cap must be >= 1, got {config.os_cap}")

    if config.n_workers is not None and config.n_workers < 1:
        result.errors.append(f"n_workers must be >= 1, got {config.n_workers}")

    if not 0.0 <= config.max_exclusion_fraction < 1.0:
        result.errors.append(
            f"max_exclusion_fraction must be in [0, 1), got {config.max_exclusion_fraction}"
        )

    unknown_classes = [c for c in config.classes if c not in CLASSES]
    if unknown_classes:
        result.errors.append(f"Unknown preparation classes: {', '.join(unknown_classes)}")
    if not config.classes:
        result.errors.append("No preparation classes selected")

    if config.reconstruction_tol <= 0:
        result.errors.append(f"reconstruction_tol must be > 0, got {config.reconstruction_tol}")

    if "OS" in config.algorithms and config.os_cap > 3:
        result.warnings.append(
            f"os_cap={config.os_cap} enumerates C(36, {config.os_cap}) subsets per target"
        )

    result.count = config.n_targets
    result.is_valid = not result.errors
    return result


def validate_constraint_residuals(
    residuals: Sequence[float] | np.ndarray,
    tolerance: float = SDP_FEASIBILITY_TOL,
) -> bool:
    """
    Check that an optimizer reproduces every constraint value within tolerance.

    Args:
        residuals: Absolute deviations |Tr(rho A_i) - y_i|
        tolerance: Maximum allowed deviation

    Returns:
        True if all residuals are within tolerance (vacuously True when empty)
    """
    arr = np.asarray(residuals, dtype=float)
    if arr.size == 0:
        return True
    return bool(np.all(np.abs(arr) <= tolerance))
