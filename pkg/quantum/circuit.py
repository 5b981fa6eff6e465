"""
Layered hardware-efficient ansatz V(theta).

Each two-qubit block applies RY on both qubits, a CZ, then RY on both qubits
again (four angles). Layers alternate a brickwork of blocks: even layers on
pairs (0,1),(2,3),...; odd layers on (1,2),(3,4),... closing the ring with
(n-1, 0). Two consecutive layers touch every periodic bond once, so a circuit
of N_l layers consumes exactly 2 n N_l angles.

RY(theta) = exp(-i theta Y / 2).
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple, Union
import hashlib
import logging

import numpy as np

from .exceptions import ArgumentError
from .states import ComplexMatrix, DensityMatrix, StateVector

logger = logging.getLogger('quantum')

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)


@dataclass(frozen=True)
class BitString:
    """Computational basis label; bits[0] is qubit 0, the most significant bit."""

    bits: Tuple[int, ...]
    index: int

    def __post_init__(self):
        value = 0
        for bit in self.bits:
            if bit not in (0, 1):
                raise ArgumentError(f"Bits must be 0 or 1, got {self.bits}")
            value = (value << 1) | bit
        if value != self.index:
            raise ArgumentError(f"Index {self.index} does not match bits {self.bits}")

    @classmethod
    def from_index(cls, index: int, n_qubits: int) -> 'BitString':
        if not 0 <= index < (1 << n_qubits):
            raise ArgumentError(f"Index {index} out of range for {n_qubits} qubits")
        bits = tuple((index >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits))
        return cls(bits, int(index))

    @classmethod
    def from_label(cls, label: str) -> 'BitString':
        bits = tuple(int(ch) for ch in label)
        return cls(bits, int(label, 2) if label else 0)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def label(self) -> str:
        return ''.join(str(b) for b in self.bits)

    def __str__(self):
        return self.label


def all_bitstrings(n_qubits: int) -> List[BitString]:
    return [BitString.from_index(i, n_qubits) for i in range(1 << n_qubits)]


def blocks_per_circuit(n_qubits: int, n_layers: int) -> int:
    return sum(len(brickwork_pairs(n_qubits, layer)) for layer in range(n_layers))


@dataclass(frozen=True)
class CircuitParams:
    """Angles of the layered ansatz: 2 * n_qubits * n_layers radians."""

    n_qubits: int
    n_layers: int
    angles: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ArgumentError(f"The ansatz needs at least 2 qubits, got {self.n_qubits}")
        if self.n_layers < 1:
            raise ArgumentError(f"The ansatz needs at least 1 layer, got {self.n_layers}")
        if self.n_qubits % 2 == 1 and self.n_layers % 2 == 1:
            raise ArgumentError(
                f"An odd qubit count ({self.n_qubits}) needs an even number of layers, got {self.n_layers}"
            )
        angles = np.array(self.angles, dtype=np.float64).reshape(-1)
        expected = 2 * self.n_qubits * self.n_layers
        if angles.size != expected:
            raise ArgumentError(f"Expected {expected} angles, got {angles.size}")
        angles.setflags(write=False)
        object.__setattr__(self, 'angles', angles)

    @property
    def size(self) -> int:
        return self.angles.size

    def with_angles(self, angles) -> 'CircuitParams':
        return CircuitParams(self.n_qubits, self.n_layers, angles)

    def perturbed(self, index: int, step: float) -> 'CircuitParams':
        """Copy with one angle shifted by `step`."""
        angles = np.array(self.angles)
        angles[index] += step
        return self.with_angles(angles)

    def key(self) -> str:
        """Short stable identifier of the angle vector."""
        digest = hashlib.sha1(np.round(self.angles, 12).tobytes()).hexdigest()[:10]
        return f"{self.n_qubits}x{self.n_layers}:{digest}"


def identity_parameters(n_qubits: int, n_layers: int) -> CircuitParams:
    """
    All-zero angles: the circuit reduces to a product of CZ gates.

    It is diagonal, so it leaves computational-basis populations unchanged,
    and it is the exact identity when every bond is hit an even number of
    times (n = 2 with even N_l, or N_l a multiple of 4).
    """
    return CircuitParams(n_qubits, n_layers, np.zeros(2 * n_qubits * n_layers))


def random_parameters(n_qubits: int, n_layers: int, seed=None) -> CircuitParams:
    """Angles drawn uniformly from [0, 2 pi)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return CircuitParams(n_qubits, n_layers, rng.uniform(0.0, 2.0 * np.pi, 2 * n_qubits * n_layers))


@lru_cache(maxsize=None)
def brickwork_pairs(n_qubits: int, layer: int) -> Tuple[Tuple[int, int], ...]:
    """Qubit pairs acted on by the blocks of one layer."""
    if layer % 2 == 0:
        return tuple((q, q + 1) for q in range(0, n_qubits - 1, 2))
    pairs = [(q, q + 1) for q in range(1, n_qubits - 1, 2)]
    pairs.append((n_qubits - 1, 0))
    return tuple(pairs)


def ry(theta: float) -> ComplexMatrix:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def block_unitary(angles: Sequence[float]) -> ComplexMatrix:
    """(RY(c) x RY(d)) CZ (RY(a) x RY(b)) for angles (a, b, c, d)."""
    a, b, c, d = angles
    return np.kron(ry(c), ry(d)) @ CZ @ np.kron(ry(a), ry(b))


def _apply_two_qubit(gate: ComplexMatrix, i: int, j: int, operator: ComplexMatrix, n: int) -> ComplexMatrix:
    """Left-multiply `operator` (2^n x m) by `gate` acting on qubits (i, j)."""
    columns = operator.shape[1]
    tensor = operator.reshape([2] * n + [columns])
    tensor = np.moveaxis(tensor, (i, j), (0, 1))
    shape = tensor.shape
    tensor = (gate @ tensor.reshape(4, -1)).reshape(shape)
    tensor = np.moveaxis(tensor, (0, 1), (i, j))
    return tensor.reshape(1 << n, columns)


def circuit_unitary(params: CircuitParams) -> ComplexMatrix:
    """Full 2^n x 2^n matrix of V(theta)."""
    n = params.n_qubits
    unitary = np.eye(1 << n, dtype=np.complex128)
    cursor = 0
    for layer in range(params.n_layers):
        for i, j in brickwork_pairs(n, layer):
            gate = block_unitary(params.angles[cursor:cursor + 4])
            unitary = _apply_two_qubit(gate, i, j, unitary, n)
            cursor += 4
    return unitary


def _check_register(rho: DensityMatrix, params: CircuitParams):
    if rho.n_qubits != params.n_qubits:
        raise ArgumentError(
            f"Density matrix has {rho.n_qubits} qubits but the circuit acts on {params.n_qubits}"
        )


def apply_circuit(rho: DensityMatrix, params: CircuitParams) -> DensityMatrix:
    """V rho V^dagger."""
    _check_register(rho, params)
    return rho.conjugated(circuit_unitary(params))


def outcome_distribution(rho: DensityMatrix, params: Union[CircuitParams, ComplexMatrix]) -> np.ndarray:
    """P(s) = <s| V rho V^dagger |s> for every basis string s."""
    if isinstance(params, CircuitParams):
        _check_register(rho, params)
        unitary = circuit_unitary(params)
    else:
        unitary = np.asarray(params)
    # diag(U rho U^dagger) without forming the product
    probabilities = np.einsum('ij,jk,ik->i', unitary, rho.matrix, unitary.conj()).real
    return np.clip(probabilities, 0.0, None)


def conjugate_column(params: CircuitParams, s: BitString) -> StateVector:
    """Candidate eigenvector V^dagger |s>."""
    if s.n != params.n_qubits:
        raise ArgumentError(f"Bit string {s} has {s.n} bits, circuit has {params.n_qubits} qubits")
    unitary = circuit_unitary(params)
    return StateVector(params.n_qubits, unitary[s.index].conj())
