"""
Dense state algebra for small qubit registers.

Density matrices, state vectors, partial traces, Hermitian eigendecomposition
and the exact entropy oracles the estimators are checked against. All
entropies are in nats. Qubit 0 is the most significant bit of a basis index.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union
import logging

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

from .exceptions import ArgumentError, CapacityError, StateValidationError

logger = logging.getLogger('quantum')

# Dense complex matrix, row-major, dimension 2**n for qubit operators
ComplexMatrix = np.ndarray

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
POSITIVITY_TOL = 1e-10
TIE_TOL = 1e-10
LOG_FLOOR = 1e-14
MAX_QUBITS = 12


def num_qubits(dim: int) -> int:
    """Return n for a dimension 2**n, or raise."""
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise StateValidationError(f"Dimension {dim} is not a power of two")
    return n


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on n qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.size != 1 << self.n_qubits:
            raise StateValidationError(
                f"State of {self.n_qubits} qubits needs {1 << self.n_qubits} amplitudes, got {amplitudes.size}"
            )
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateValidationError(f"State vector norm {norm:.12f} differs from 1")
        object.__setattr__(self, 'amplitudes', _frozen(amplitudes))

    @classmethod
    def from_amplitudes(cls, amplitudes) -> 'StateVector':
        """Normalize raw amplitudes into a state."""
        amplitudes = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise StateValidationError("Cannot normalize a zero vector")
        return cls(num_qubits(amplitudes.size), amplitudes / norm)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> 'StateVector':
        """Computational basis state |index>."""
        amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
        amplitudes[index] = 1.0
        return cls(n_qubits, amplitudes)

    def projector(self) -> 'DensityMatrix':
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: 'StateVector') -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on n qubits."""

    n_qubits: int
    matrix: ComplexMatrix

    def __post_init__(self):
        if self.n_qubits > MAX_QUBITS:
            raise CapacityError(f"{self.n_qubits} qubits exceed the dense limit of {MAX_QUBITS}")
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        dim = 1 << self.n_qubits
        if matrix.shape != (dim, dim):
            raise StateValidationError(f"Expected a {dim}x{dim} matrix, got shape {matrix.shape}")
        asymmetry = np.max(np.abs(matrix - matrix.conj().T)) if dim else 0.0
        if asymmetry > HERMITIAN_TOL:
            raise StateValidationError(f"Matrix is not Hermitian (max deviation {asymmetry:.3e})")
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > TRACE_TOL:
            raise StateValidationError(f"Trace {trace:.12f} differs from 1")
        matrix = 0.5 * (matrix + matrix.conj().T)
        lowest = scipy.linalg.eigvalsh(matrix)[0]
        if lowest < -POSITIVITY_TOL:
            raise StateValidationError(f"Matrix has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, 'matrix', _frozen(matrix))

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @classmethod
    def from_matrix(cls, matrix) -> 'DensityMatrix':
        matrix = np.asarray(matrix, dtype=np.complex128)
        return cls(num_qubits(matrix.shape[0]), matrix)

    @classmethod
    def from_diagonal(cls, probabilities: Sequence[float]) -> 'DensityMatrix':
        """Classical mixture of computational basis states."""
        probabilities = np.asarray(probabilities, dtype=np.float64)
        return cls(num_qubits(probabilities.size), np.diag(probabilities).astype(np.complex128))

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> 'DensityMatrix':
        dim = 1 << n_qubits
        return cls(n_qubits, np.eye(dim, dtype=np.complex128) / dim)

    def conjugated(self, unitary: ComplexMatrix) -> 'DensityMatrix':
        """U rho U^dagger."""
        return DensityMatrix(self.n_qubits, unitary @ self.matrix @ unitary.conj().T)

    def expectation(self, operator: ComplexMatrix) -> float:
        """tr(rho O) for a Hermitian O."""
        return float(np.real(np.trace(self.matrix @ operator)))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (descending) and eigenvectors (columns) of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: ComplexMatrix

    def vector(self, index: int) -> StateVector:
        column = self.eigenvectors[:, index]
        return StateVector(num_qubits(column.size), column)


def _phase_fix(vector: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component real and positive."""
    nonzero = np.flatnonzero(np.abs(vector) > 1e-12)
    if nonzero.size == 0:
        return vector
    pivot = vector[nonzero[0]]
    return vector * (np.abs(pivot) / pivot)


def _lexicographic_key(vector: np.ndarray) -> Tuple[float, ...]:
    # Descending lexicographic order on (re, im) pairs
    rounded = np.round(np.column_stack([vector.real, vector.imag]).reshape(-1), 10)
    return tuple(-rounded)


def _hermitian_matrix(rho: Union[DensityMatrix, ComplexMatrix]) -> ComplexMatrix:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    matrix = np.asarray(rho, dtype=np.complex128)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise StateValidationError(f"Expected a square matrix, got shape {matrix.shape}")
    asymmetry = np.max(np.abs(matrix - matrix.conj().T))
    if asymmetry > HERMITIAN_TOL:
        raise StateValidationError(f"Matrix is not Hermitian (max deviation {asymmetry:.3e})")
    return 0.5 * (matrix + matrix.conj().T)


def eig_hermitian(rho: Union[DensityMatrix, ComplexMatrix]) -> Spectrum:
    """
    Eigendecomposition with eigenvalues sorted descending.

    Eigenvectors are phase fixed (first non-negligible component real
    positive); inside a degenerate group they are ordered lexicographically
    so repeated calls give identical output.
    """
    matrix = _hermitian_matrix(rho)
    values, vectors = scipy.linalg.eigh(matrix)
    order = np.argsort(-values, kind='stable')
    values = values[order]
    vectors = np.column_stack([_phase_fix(vectors[:, k]) for k in order])

    start = 0
    while start < values.size:
        stop = start + 1
        while stop < values.size and abs(values[stop] - values[start]) <= TIE_TOL:
            stop += 1
        if stop - start > 1:
            block = sorted(range(start, stop), key=lambda k: _lexicographic_key(vectors[:, k]))
            vectors[:, start:stop] = vectors[:, block]
        start = stop

    return Spectrum(_frozen(values), _frozen(vectors))


def partial_trace(state: Union[StateVector, DensityMatrix], keep: Sequence[int]) -> DensityMatrix:
    """
    Reduced density matrix on the qubits in `keep`, in the order listed.
    """
    n = state.n_qubits
    keep = [int(q) for q in keep]
    if not keep:
        raise ArgumentError("At least one qubit must be kept")
    if len(set(keep)) != len(keep):
        raise ArgumentError(f"Duplicate qubit indices in {keep}")
    if any(q < 0 or q >= n for q in keep):
        raise ArgumentError(f"Qubit indices {keep} out of range for {n} qubits")

    rest = [q for q in range(n) if q not in keep]
    kept_dim, rest_dim = 1 << len(keep), 1 << len(rest)

    if isinstance(state, StateVector):
        amplitudes = state.amplitudes.reshape([2] * n).transpose(keep + rest)
        block = amplitudes.reshape(kept_dim, rest_dim)
        reduced = block @ block.conj().T
    else:
        tensor = state.matrix.reshape([2] * (2 * n))
        perm = keep + rest + [n + q for q in keep] + [n + q for q in rest]
        tensor = tensor.transpose(perm).reshape(kept_dim, rest_dim, kept_dim, rest_dim)
        reduced = np.einsum('ajbj->ab', tensor)

    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityMatrix(len(keep), reduced)


def _spectrum_values(rho: Union[DensityMatrix, Spectrum]) -> np.ndarray:
    if isinstance(rho, Spectrum):
        return np.asarray(rho.eigenvalues)
    return scipy.linalg.eigvalsh(rho.matrix)


def shannon_entropy(probabilities) -> float:
    """-sum p ln p with 0 ln 0 = 0."""
    p = np.asarray(probabilities, dtype=np.float64)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def renyi_shannon(probabilities, alpha: float) -> float:
    """Classical Renyi entropy H_alpha of a probability vector."""
    check_alpha(alpha)
    p = np.clip(np.asarray(probabilities, dtype=np.float64), 0.0, None)
    p = p[p > 0]
    return float(np.log(np.sum(p ** alpha)) / (1.0 - alpha))


def check_alpha(alpha: float):
    if not np.isfinite(alpha) or alpha <= 0 or abs(alpha - 1.0) <= 1e-9:
        raise ArgumentError(f"Renyi order must be positive and different from 1, got {alpha}")


def von_neumann_exact(rho: Union[DensityMatrix, Spectrum]) -> float:
    """S(rho) = -tr rho ln rho in nats."""
    return shannon_entropy(_spectrum_values(rho))


def renyi_exact(rho: Union[DensityMatrix, Spectrum], alpha: float) -> float:
    """S_alpha(rho) = ln tr rho^alpha / (1 - alpha) in nats."""
    return renyi_shannon(_spectrum_values(rho), alpha)


def log_matrix(rho: DensityMatrix, floor: float = LOG_FLOOR) -> ComplexMatrix:
    """ln rho with eigenvalues clamped below `floor`."""
    values, vectors = scipy.linalg.eigh(rho.matrix)
    logs = np.log(np.clip(values, floor, None))
    return (vectors * logs) @ vectors.conj().T


def majorizes(x, y, tol: float = 1e-10) -> bool:
    """True when every sorted partial sum of x is at least that of y."""
    x_sums = np.cumsum(np.sort(np.asarray(x, dtype=np.float64))[::-1])
    y_sums = np.cumsum(np.sort(np.asarray(y, dtype=np.float64))[::-1])
    return bool(np.all(y_sums <= x_sums + tol))


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_state_vector(n_qubits: int, seed=None) -> StateVector:
    """Haar-random pure state."""
    rng = _generator(seed)
    dim = 1 << n_qubits
    amplitudes = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector.from_amplitudes(amplitudes)


def random_density_matrix(n_qubits: int, rank: Optional[int] = None, seed=None) -> DensityMatrix:
    """Ginibre-ensemble mixed state of the given rank (full rank by default)."""
    rng = _generator(seed)
    dim = 1 << n_qubits
    rank = dim if rank is None else int(rank)
    if not 1 <= rank <= dim:
        raise ArgumentError(f"Rank must be in [1, {dim}], got {rank}")
    ginibre = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    matrix = ginibre @ ginibre.conj().T
    return DensityMatrix(n_qubits, matrix / np.trace(matrix).real)


def random_unitary(dim: int, seed=None) -> ComplexMatrix:
    """Haar-random unitary matrix."""
    return unitary_group.rvs(dim, random_state=_generator(seed))


def random_hermitian(dim: int, scale: float = 1.0, seed=None) -> ComplexMatrix:
    """Random Hermitian matrix with Gaussian entries."""
    rng = _generator(seed)
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (raw + raw.conj().T)
