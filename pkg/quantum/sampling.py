"""
Shot sampling of measurement outcomes.

A ShotSet stores multinomial counts over all 2^n basis strings rather than
a list of outcomes; every cost in the estimator only needs the counts.
"""
from dataclasses import dataclass
from typing import Dict
import logging

import numpy as np

from .circuit import BitString
from .exceptions import ArgumentError, StateValidationError
from .states import num_qubits

logger = logging.getLogger('quantum')

NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class ShotSet:
    """Counts of sampled bit strings; counts[i] belongs to basis index i."""

    n_qubits: int
    counts: np.ndarray
    total: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if counts.size != 1 << self.n_qubits:
            raise StateValidationError(
                f"Expected {1 << self.n_qubits} counts for {self.n_qubits} qubits, got {counts.size}"
            )
        if np.any(counts < 0):
            raise StateValidationError("Shot counts must be nonnegative")
        if int(counts.sum()) != self.total:
            raise StateValidationError(f"Counts sum to {int(counts.sum())}, expected {self.total}")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_counts(cls, counts) -> 'ShotSet':
        counts = np.asarray(counts, dtype=np.int64).reshape(-1)
        return cls(num_qubits(counts.size), counts, int(counts.sum()))

    def as_dict(self) -> Dict[BitString, int]:
        """Observed strings only."""
        return {
            BitString.from_index(int(i), self.n_qubits): int(self.counts[i])
            for i in np.flatnonzero(self.counts)
        }

    def frequencies(self) -> np.ndarray:
        """Empirical distribution N_i / N_s over all strings."""
        return self.counts / float(self.total)

    def expand(self) -> np.ndarray:
        """Outcome indices, one entry per shot, in ascending index order."""
        return np.repeat(np.arange(self.counts.size), self.counts)


def validate_distribution(dist) -> np.ndarray:
    """Check a probability vector over 2^n outcomes and renormalize round-off."""
    p = np.asarray(dist, dtype=np.float64).reshape(-1)
    num_qubits(p.size)
    if not np.all(np.isfinite(p)):
        raise StateValidationError("Distribution contains non-finite entries")
    if np.any(p < -NORMALIZATION_TOL):
        raise StateValidationError(f"Distribution has negative entry {p.min():.3e}")
    total = p.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise StateValidationError(f"Distribution sums to {total:.12f}, expected 1")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_shots(dist, n_shots: int, seed=None) -> ShotSet:
    """Draw n_shots outcomes from `dist`; the same seed gives the same ShotSet."""
    if n_shots < 1:
        raise ArgumentError(f"Number of shots must be at least 1, got {n_shots}")
    p = validate_distribution(dist)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(int(n_shots), p)
    logger.debug(f"Sampled {n_shots} shots over {p.size} outcomes")
    return ShotSet(num_qubits(p.size), counts, int(n_shots))
