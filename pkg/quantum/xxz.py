"""
Periodic XXZ chain in a longitudinal field.

    H = sum_l (X_l X_{l+1} + Y_l Y_{l+1} + delta Z_l Z_{l+1} - lam Z_l),  site L == site 0

Dense construction and exact diagonalization up to 12 sites, ground-state
reduced density matrices and the entanglement scaling fit used to look at
the critical phase.
"""
from dataclasses import dataclass, field
from functools import reduce
from typing import List, Sequence
import logging

import numpy as np
import scipy.linalg
from scipy.stats import linregress

from .exceptions import ArgumentError, CapacityError
from .states import (
    ComplexMatrix,
    DensityMatrix,
    StateVector,
    partial_trace,
    von_neumann_exact,
)

logger = logging.getLogger('quantum')

MAX_SITES = 12
DEGENERACY_TOL = 1e-9

PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


@dataclass(frozen=True)
class XXZParams:
    """Chain length, anisotropy and field; the boundary is always periodic."""

    L: int
    delta: float
    lam: float
    boundary: str = field(default='periodic', init=False)

    def __post_init__(self):
        if self.L < 2:
            raise ArgumentError(f"Chain length must be at least 2, got {self.L}")


@dataclass(frozen=True)
class GroundState:
    """Lowest eigenpair of the chain plus the degeneracy of that level."""

    params: XXZParams
    energy: float
    state: StateVector
    degeneracy: int

    def block(self, size: int, start: int = 0) -> DensityMatrix:
        """Reduced state of `size` contiguous sites starting at `start` (wrapping)."""
        return reduced_block(self.state, size, start)


def site_operator(op: ComplexMatrix, site: int, L: int) -> ComplexMatrix:
    """Embed a single-site operator at `site` of an L-site chain."""
    return reduce(np.kron, [op if k == site else PAULI_I for k in range(L)])


def build_hamiltonian(p: XXZParams) -> ComplexMatrix:
    """Dense 2^L x 2^L Hamiltonian, terms in the order XX, YY, delta ZZ, -lam Z."""
    if p.L > MAX_SITES:
        raise CapacityError(f"L={p.L} exceeds the dense limit of {MAX_SITES} sites")

    dim = 1 << p.L
    hamiltonian = np.zeros((dim, dim), dtype=np.complex128)
    for l in range(p.L):
        nxt = (l + 1) % p.L
        hamiltonian += _bond(PAULI_X, PAULI_X, l, nxt, p.L)
        hamiltonian += _bond(PAULI_Y, PAULI_Y, l, nxt, p.L)
        hamiltonian += p.delta * _bond(PAULI_Z, PAULI_Z, l, nxt, p.L)
        hamiltonian -= p.lam * site_operator(PAULI_Z, l, p.L)
    return hamiltonian


def _bond(a: ComplexMatrix, b: ComplexMatrix, i: int, j: int, L: int) -> ComplexMatrix:
    factors = []
    for k in range(L):
        if k == i:
            factors.append(a)
        elif k == j:
            factors.append(b)
        else:
            factors.append(PAULI_I)
    return reduce(np.kron, factors)


def total_magnetization(L: int) -> ComplexMatrix:
    """sum_l Z_l."""
    return sum(site_operator(PAULI_Z, l, L) for l in range(L))


def ground_state(p: XXZParams) -> GroundState:
    """
    Lowest eigenvector of the chain.

    A degenerate ground level is resolved deterministically: the state is
    the normalized projection of the lowest-index basis vector with a
    non-negligible component in the ground eigenspace, phase fixed.
    """
    hamiltonian = build_hamiltonian(p)
    values, vectors = scipy.linalg.eigh(hamiltonian)
    energy = float(values[0])
    degeneracy = int(np.sum(values - energy <= DEGENERACY_TOL * max(1.0, abs(energy))))
    subspace = vectors[:, :degeneracy]

    if degeneracy == 1:
        amplitudes = subspace[:, 0]
    else:
        logger.info(f"Ground level of L={p.L} delta={p.delta} lam={p.lam} is {degeneracy}-fold degenerate")
        amplitudes = None
        for index in range(subspace.shape[0]):
            projected = subspace @ subspace[index].conj()
            if np.linalg.norm(projected) > 1e-8:
                amplitudes = projected
                break

    nonzero = np.flatnonzero(np.abs(amplitudes) > 1e-12)
    amplitudes = amplitudes * (np.abs(amplitudes[nonzero[0]]) / amplitudes[nonzero[0]])
    state = StateVector.from_amplitudes(amplitudes)
    logger.debug(f"Ground state L={p.L} delta={p.delta} lam={p.lam}: E0={energy:.10f}")
    return GroundState(params=p, energy=energy, state=state, degeneracy=degeneracy)


def critical_field(delta: float) -> float:
    """Field of the commensurate-incommensurate transition, 2(1 - delta)."""
    return 2.0 * (1.0 - delta)


def reduced_block(state: StateVector, size: int, start: int = 0) -> DensityMatrix:
    """Reduced density matrix of a contiguous block on a periodic chain."""
    L = state.n_qubits
    if not 1 <= size < L:
        raise ArgumentError(f"Block size must be in [1, {L - 1}], got {size}")
    keep = [(start + k) % L for k in range(size)]
    return partial_trace(state, keep)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit S = slope * ln((L/pi) sin(pi n / L)) + intercept."""

    slope: float
    intercept: float
    r_value: float
    residual: float

    @property
    def central_charge(self) -> float:
        return 3.0 * self.slope


def chord_length(L: int, n: int) -> float:
    return float(np.log(L / np.pi * np.sin(np.pi * n / L)))


def fit_log_scaling(L: int, sizes: Sequence[int], entropies: Sequence[float]) -> ScalingFit:
    """Fit block entropies against the finite-size logarithmic scaling law."""
    if len(sizes) != len(entropies) or len(sizes) < 2:
        raise ArgumentError("Need at least two (size, entropy) pairs of equal length")
    x = np.array([chord_length(L, n) for n in sizes])
    y = np.asarray(entropies, dtype=np.float64)
    fit = linregress(x, y)
    residual = float(np.sqrt(np.mean((y - (fit.slope * x + fit.intercept)) ** 2)))
    return ScalingFit(float(fit.slope), float(fit.intercept), float(fit.rvalue), residual)


def block_entropies(gs: GroundState, sizes: Sequence[int]) -> List[float]:
    """Exact entanglement entropy of contiguous blocks starting at site 0."""
    return [von_neumann_exact(gs.block(n)) for n in sizes]
