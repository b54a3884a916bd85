"""
Hermitian-operator algebra, state and observable construction.

This module provides the value types and the ensemble generators used by the
planners and protocols:
- HermitianOperator / DensityMatrix: immutable d×d Hermitian matrices
- ObservableSet: a labelled list of observables of one dimension
- hs_inner(), hs_distance(), bures_pure(): distances between operators
- pauli_projector_set(): tensor products of Pauli eigenprojectors
- random_pure_target(), perturb_state(), sample_preparation(): seeded ensembles

Operators are stored symmetrized and read-only, so they are safe to share
between worker processes.
"""

import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property, lru_cache, reduce
from pathlib import Path
from typing import Any

import numpy as np
from scipy import linalg

from .constants import (
    GRAM_RANK_TOL,
    MAX_PREPARATION_ATTEMPTS,
    N_PERTURBATION_COEFFICIENTS,
    PURITY_TOL,
)
from .exceptions import ConfigError, DimensionMismatchError, NotPureStateError
from .utils import format_pauli_label, parse_pauli_label, read_json
from .validation import validate_density_matrix, validate_hermitian, validate_observable_set

logger = logging.getLogger(__name__)

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """
    Dense d×d complex Hermitian matrix.

    Attributes:
        matrix: Read-only complex array, exactly Hermitian after construction
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        self._check(self.matrix)
        m = np.array(self.matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def _check(cls, matrix: Any) -> None:
        result = validate_hermitian(matrix)
        if not result.is_valid:
            raise ValueError(f"Invalid Hermitian operator: {', '.join(result.errors)}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def vector(self) -> np.ndarray:
        """Real coordinates whose dot product is the Hilbert-Schmidt inner product."""
        return np.concatenate([self.matrix.real.ravel(), self.matrix.imag.ravel()])

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    def to_dict(self) -> dict:
        """Serialize to {"dim", "re", "im"}."""
        return {
            "dim": self.dim,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HermitianOperator":
        """Inverse of to_dict."""
        try:
            m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        except KeyError as e:
            raise ValueError(f"Operator record missing field: {e}") from e
        if "dim" in data and m.shape != (data["dim"], data["dim"]):
            raise DimensionMismatchError(
                f"Operator record declares dim {data['dim']} but has shape {m.shape}"
            )
        return cls(m)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class DensityMatrix(HermitianOperator):
    """Positive semidefinite, unit-trace Hermitian matrix."""

    @classmethod
    def _check(cls, matrix: Any) -> None:
        result = validate_density_matrix(matrix)
        if not result.is_valid:
            raise ValueError(f"Invalid density matrix: {', '.join(result.errors)}")

    @classmethod
    def nearest(cls, matrix: Any) -> "DensityMatrix":
        """Closest density matrix: symmetrize, clip negative eigenvalues, renormalize."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        w, v = linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0:
            raise ValueError("Matrix has no positive spectrum to renormalize")
        w = w / w.sum()
        return cls((v * w) @ v.conj().T)

    @classmethod
    def pure(cls, psi: Sequence[complex] | np.ndarray) -> "DensityMatrix":
        """|psi><psi| / <psi|psi>."""
        vec = np.asarray(psi, dtype=complex).ravel()
        norm_sq = float(np.vdot(vec, vec).real)
        if norm_sq == 0:
            raise ValueError("Zero vector has no associated state")
        return cls(np.outer(vec, vec.conj()) / norm_sq)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def purity(self) -> float:
        return hs_inner(self, self)

    @property
    def is_pure(self) -> bool:
        return abs(self.purity - 1.0) <= PURITY_TOL


def _as_matrix(op: HermitianOperator | np.ndarray) -> np.ndarray:
    if isinstance(op, HermitianOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Dimension mismatch: {a.shape} vs {b.shape}")


def hs_inner(a: HermitianOperator | np.ndarray, b: HermitianOperator | np.ndarray) -> float:
    """
    Hilbert-Schmidt inner product Tr(a·b) of two Hermitian operators.

    The imaginary residue (zero for Hermitian inputs) is discarded.

    Raises:
        DimensionMismatchError: if the operators differ in dimension
    """
    ma, mb = _as_matrix(a), _as_matrix(b)
    _check_dims(ma, mb)
    return float(np.einsum("ij,ji->", ma, mb).real)


def hs_distance(a: HermitianOperator | np.ndarray, b: HermitianOperator | np.ndarray) -> float:
    """Hilbert-Schmidt distance sqrt(Tr((a-b)^2))."""
    ma, mb = _as_matrix(a), _as_matrix(b)
    _check_dims(ma, mb)
    diff = ma - mb
    return math.sqrt(max(hs_inner(diff, diff), 0.0))


def require_pure(rho0: DensityMatrix, name: str = "rho0") -> None:
    """Raise NotPureStateError unless Tr(rho0^2) = 1 within PURITY_TOL."""
    purity = hs_inner(rho0, rho0)
    if abs(purity - 1.0) > PURITY_TOL:
        raise NotPureStateError(f"{name} must be pure, Tr({name}^2) = {purity:.12f}")


def bures_from_fidelity(fidelity: float, snap_tol: float = 0.0) -> float:
    """
    Bures distance sqrt(2(1 - sqrt(F))) for a pure target with fidelity F = Tr(rho rho0).

    Fidelities are clamped to [0, 1]; values within snap_tol of 1 count as 1.
    """
    f = min(max(fidelity, 0.0), 1.0)
    if f >= 1.0 - snap_tol:
        f = 1.0
    return math.sqrt(max(2.0 * (1.0 - math.sqrt(f)), 0.0))


def epsilon_from_fidelity(epsilon_fidelity: float) -> float:
    """Bures accuracy radius for a fidelity threshold (0.95 -> 0.2250)."""
    return bures_from_fidelity(epsilon_fidelity)


def fidelity_pure(rho: HermitianOperator, rho0: DensityMatrix) -> float:
    """Tr(rho·rho0) clamped to [0, 1]."""
    return min(max(hs_inner(rho, rho0), 0.0), 1.0)


def bures_pure(rho: DensityMatrix, rho0: DensityMatrix) -> float:
    """
    Bures distance to a pure target: sqrt(2(1 - sqrt(Tr(rho·rho0)))).

    Raises:
        NotPureStateError: if rho0 is not pure
    """
    require_pure(rho0)
    return bures_from_fidelity(fidelity_pure(rho, rho0))


# ==============================================================================
# OBSERVABLE SETS
# ==============================================================================


@dataclass(frozen=True, eq=False)
class ObservableSet:
    """
    Labelled list of observables {A_i} of a common dimension.

    Attributes:
        observables: R Hermitian operators
        labels: R unique display strings (e.g. 'x+⊗z−')
    """

    observables: tuple[HermitianOperator, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        ops = tuple(
            op if isinstance(op, HermitianOperator) else HermitianOperator(op)
            for op in self.observables
        )
        labels = tuple(self.labels)
        result = validate_observable_set([op.matrix for op in ops], labels)
        if not result.is_valid:
            raise ValueError(f"Invalid observable set: {', '.join(result.errors)}")
        object.__setattr__(self, "observables", ops)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.observables[0].dim

    def __len__(self) -> int:
        return len(self.observables)

    def __getitem__(self, index: int) -> HermitianOperator:
        return self.observables[index]

    def __iter__(self) -> Iterator[HermitianOperator]:
        return iter(self.observables)

    @cached_property
    def vectors(self) -> np.ndarray:
        """(R, 2d²) real coordinates of all observables."""
        return np.array([op.vector for op in self.observables])

    def index_of(self, label: str) -> int:
        """Index of a label; Pauli labels are matched in canonical form."""
        if label in self.labels:
            return self.labels.index(label)
        factors = parse_pauli_label(label)
        if factors is not None:
            canonical = format_pauli_label(factors)
            if canonical in self.labels:
                return self.labels.index(canonical)
        raise KeyError(f"No observable labelled '{label}'")

    def without(self, indices: Sequence[int]) -> "ObservableSet":
        """Copy with the given indices removed."""
        drop = set(indices)
        keep = [i for i in range(len(self)) if i not in drop]
        return ObservableSet(
            tuple(self.observables[i] for i in keep), tuple(self.labels[i] for i in keep)
        )

    @classmethod
    def from_labels(cls, labels: Sequence[str]) -> "ObservableSet":
        """Build a set of Pauli eigenprojector products from their labels."""
        ops, canonical = [], []
        for label in labels:
            factors = parse_pauli_label(label)
            if factors is None:
                raise ValueError(f"Unparseable Pauli label '{label}'")
            ops.append(HermitianOperator(_pauli_product(factors)))
            canonical.append(format_pauli_label(factors))
        return cls(tuple(ops), tuple(canonical))

    def to_dict(self) -> dict:
        return {
            "observables": [
                {"label": label, **op.to_dict()} for label, op in zip(self.labels, self.observables)
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObservableSet":
        if "labels" in data:
            return cls.from_labels(data["labels"])
        if "observables" not in data:
            raise ValueError("Observable record needs 'labels' or 'observables'")
        records = data["observables"]
        ops = tuple(HermitianOperator.from_dict(r) for r in records)
        labels = tuple(r.get("label", f"A{i + 1}") for i, r in enumerate(records))
        return cls(ops, labels)

    def __repr__(self) -> str:
        return f"ObservableSet(R={len(self)}, dim={self.dim})"


def _qubit_projector(axis: str, sign: int) -> np.ndarray:
    return (np.eye(2, dtype=complex) + sign * _PAULI[axis]) / 2


def _pauli_product(factors: Sequence[tuple[str, int]]) -> np.ndarray:
    return reduce(np.kron, [_qubit_projector(axis, sign) for axis, sign in factors])


def pauli_projector_set(n_qubits: int) -> ObservableSet:
    """
    Rank-1 projectors onto Pauli eigenstates and their tensor products.

    For one qubit: Πx+, Πx−, Πy+, Πy−, Πz+, Πz− (the +1 eigenprojector first on
    each axis). For n qubits the 6^n products are ordered lexicographically, so
    for two qubits A_{6(i-1)+j} = Π_i ⊗ Π_j.

    Raises:
        ValueError: if n_qubits < 1
    """
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")

    single = [(axis, sign) for axis in ("x", "y", "z") for sign in (1, -1)]
    ops, labels = [], []
    for factors in itertools.product(single, repeat=n_qubits):
        ops.append(HermitianOperator(_pauli_product(factors)))
        labels.append(format_pauli_label(list(factors)))

    return ObservableSet(tuple(ops), tuple(labels))


def load_observable_set(source: str | Path) -> ObservableSet:
    """
    Load an observable set.

    Args:
        source: 'pauli1q', 'pauli2q', or a JSON file with either
            {"labels": [...]} or {"observables": [{"label", "dim", "re", "im"}, ...]}
    """
    named = {"pauli1q": 1, "pauli2q": 2}
    if str(source) in named:
        return pauli_projector_set(named[str(source)])
    return ObservableSet.from_dict(read_json(source))


def load_state(path: str | Path) -> DensityMatrix:
    """Read a density matrix from a {"dim", "re", "im"} JSON file."""
    return DensityMatrix.from_dict(read_json(path))


def span_rank(
    operators: Sequence[HermitianOperator],
    include_identity: bool = True,
    tol: float = GRAM_RANK_TOL,
) -> int:
    """
    Dimension of span(operators ∪ {I}) from the singular values of the HS-Gram matrix.
    """
    if not operators:
        return 1 if include_identity else 0
    vectors = [op.vector for op in operators]
    if include_identity:
        vectors.append(HermitianOperator.identity(operators[0].dim).vector)
    v = np.array(vectors)
    gram = v @ v.T
    singular_values = linalg.svdvals(gram)
    return int(np.sum(singular_values > tol))


def is_information_complete(observables: ObservableSet) -> bool:
    """True iff span({A_i} ∪ {I}) covers all d×d Hermitian operators."""
    return span_rank(list(observables.observables)) == observables.dim**2


def from_coordinates(vector: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of HermitianOperator.vector: rebuild the d×d matrix from real coordinates."""
    n = dim * dim
    return vector[:n].reshape(dim, dim) + 1j * vector[n:].reshape(dim, dim)


def orthogonal_residual(vector: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """
    Component of a coordinate vector orthogonal to an orthonormal basis (rows).

    Projects twice to keep the residual orthogonal to working precision.
    """
    r = np.array(vector, dtype=float)
    if basis.size == 0:
        return r
    for _ in range(2):
        r = r - basis.T @ (basis @ r)
    return r


# ==============================================================================
# RANDOM ENSEMBLES
# ==============================================================================


def random_pure_target(seed: int | np.random.Generator, dim: int = 4) -> DensityMatrix:
    """
    Random pure state from a complex Gaussian vector.

    Real and imaginary parts are independent standard normals; normalization makes
    the scale irrelevant.

    Args:
        seed: Integer seed or Generator
        dim: Hilbert-space dimension (>= 2)
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return DensityMatrix.pure(psi)


@lru_cache(maxsize=8)
def su_generators(dim: int = 4) -> tuple[HermitianOperator, ...]:
    """
    Generalized Gell-Mann matrices: d²−1 traceless generators with Tr(Γ_m Γ_j) = 2δ_mj.

    Ordered symmetric, antisymmetric (for each pair j < k), then diagonal.
    """
    gens = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1
            gens.append(sym)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            gens.append(anti)
    for level in range(1, dim):
        diag = np.zeros(dim, dtype=complex)
        diag[:level] = 1
        diag[level] = -level
        gens.append(np.diag(diag) * math.sqrt(2.0 / (level * (level + 1))))
    return tuple(HermitianOperator(g) for g in gens)


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """
    Depolarize-then-rotate perturbation of a target state.

    Attributes:
        lam: Depolarizing weight λ in [0, 1]
        eta: Rotation strength η >= 0
        coefficients: 16 reals h_j in (−1, 1); None means draw from a seed
    """

    lam: float
    eta: float
    coefficients: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.coefficients is not None:
            h = np.array(self.coefficients, dtype=float)
            if h.shape != (N_PERTURBATION_COEFFICIENTS,):
                raise ValueError(
                    f"Expected {N_PERTURBATION_COEFFICIENTS} coefficients, got shape {h.shape}"
                )
            if np.any(np.abs(h) >= 1.0):
                raise ValueError("Perturbation coefficients must lie in (-1, 1)")
            h.setflags(write=False)
            object.__setattr__(self, "coefficients", h)

    @classmethod
    def random(
        cls, lam: float, eta: float, seed: int | np.random.Generator | None
    ) -> "PerturbationSpec":
        """Draw coefficients uniformly from (−1, 1)."""
        rng = np.random.default_rng(seed)
        return cls(lam, eta, rng.uniform(-1.0, 1.0, N_PERTURBATION_COEFFICIENTS))

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "eta": self.eta,
            "coefficients": None if self.coefficients is None else self.coefficients.tolist(),
        }


def perturb_state(
    rho0: DensityMatrix,
    spec: PerturbationSpec,
    seed: int | np.random.Generator | None = None,
) -> DensityMatrix:
    """
    e^{iηH}((1−λ)ρ0 + (λ/4)I)e^{−iηH} with H = h_0 I + Σ_j h_j Γ_j over SU(4) generators.

    The unitary is built from the eigendecomposition of H.

    Args:
        rho0: Two-qubit state to perturb
        spec: Perturbation parameters; missing coefficients are drawn from seed
        seed: Used only when spec has no coefficients

    Raises:
        DimensionMismatchError: if rho0 is not 4×4
    """
    if rho0.dim != 4:
        raise DimensionMismatchError(f"perturb_state needs dim 4, got {rho0.dim}")

    h = spec.coefficients
    if h is None:
        h = PerturbationSpec.random(spec.lam, spec.eta, seed).coefficients

    hamiltonian = h[0] * np.eye(4, dtype=complex)
    for coeff, gen in zip(h[1:], su_generators(4)):
        hamiltonian = hamiltonian + coeff * gen.matrix

    w, v = linalg.eigh(hamiltonian)
    unitary = (v * np.exp(1j * spec.eta * w)) @ v.conj().T

    mixed = (1.0 - spec.lam) * rho0.matrix + (spec.lam / 4.0) * np.eye(4, dtype=complex)
    return DensityMatrix(unitary @ mixed @ unitary.conj().T)


@dataclass(frozen=True, eq=False)
class Preparation:
    """A perturbed preparation with its ground-truth distance to the target."""

    state: DensityMatrix
    spec: PerturbationSpec
    distance: float
    accurate: bool
    attempts: int


def sample_preparation(
    rho0: DensityMatrix,
    epsilon: float,
    lam: float,
    eta: float,
    accurate: bool,
    seed: int | np.random.Generator | None,
    max_attempts: int = MAX_PREPARATION_ATTEMPTS,
) -> Preparation:
    """
    Draw perturbations until the result falls in the requested accuracy class.

    accurate=True requires d_B(ρexp, ρ0) <= epsilon, accurate=False requires > epsilon.

    Raises:
        ConfigError: if no preparation of the class is found within max_attempts
    """
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_attempts + 1):
        spec = PerturbationSpec.random(lam, eta, rng)
        state = perturb_state(rho0, spec)
        distance = bures_pure(state, rho0)
        if (distance <= epsilon) == accurate:
            if attempt > 10:
                logger.warning(f"Preparation class reached after {attempt} draws")
            return Preparation(state, spec, distance, accurate, attempt)

    kind = "accurate" if accurate else "non-accurate"
    raise ConfigError(
        f"No {kind} preparation found in {max_attempts} draws (lam={lam}, eta={eta})"
    )
