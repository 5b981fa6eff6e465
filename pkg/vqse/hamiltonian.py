"""
Scheduled cost Hamiltonian of the variational state eigensolver.

    H(t) = (1 - t) H_L + t H_G

H_L = I - 1/2 sum_j r_j Z_j with r_j = r1 + (j - 1) delta_r is diagonal in the
computational basis, so its energy on a string is a closed form. H_G is also
diagonal: the m strings of the current top set S get the m lowest H_L levels
(most frequent string first, lowest level first), every other string gets 1.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence
import logging

import numpy as np

from quantum.circuit import BitString
from quantum.exceptions import ArgumentError

logger = logging.getLogger('vqse')

SCHEDULE_REACH = 0.75


@dataclass(frozen=True)
class VqseConfig:
    ell: int
    n_layers: int = 2
    r1: float = 0.2
    delta_r: float = 0.01
    m: Optional[int] = None
    t_update_period: int = 25
    learning_rate: float = 0.05
    fd_step: float = 0.01
    n_iter: int = 200
    n_shots: int = 30000
    n_trials: int = 5
    seed: int = 1234
    noise_free: bool = False
    init: str = 'random'

    def __post_init__(self):
        if self.ell < 1:
            raise ArgumentError(f"ell must be at least 1, got {self.ell}")
        if self.m is None:
            object.__setattr__(self, 'm', self.ell + 1)
        if not 1 <= self.m < (1 << self.ell):
            raise ArgumentError(f"m must be in [1, {(1 << self.ell) - 1}], got {self.m}")
        if not self.r1 > 0:
            raise ArgumentError(f"r1 must be positive, got {self.r1}")
        if self.delta_r < 0:
            raise ArgumentError(f"delta_r must be nonnegative, got {self.delta_r}")
        if self.t_update_period < 1 or self.n_iter < 0 or self.n_shots < 1 or self.n_trials < 1:
            raise ArgumentError("t_update_period, n_shots and n_trials must be positive, n_iter nonnegative")
        if not (self.learning_rate > 0 and self.fd_step > 0):
            raise ArgumentError("learning_rate and fd_step must be positive")
        if self.init not in ('random', 'identity'):
            raise ArgumentError(f"init must be 'random' or 'identity', got {self.init!r}")

    @property
    def rates(self) -> np.ndarray:
        return self.r1 + self.delta_r * np.arange(self.ell)


def local_energy(s: BitString, cfg: VqseConfig) -> float:
    """E_L(s) = 1 - 1/2 sum_j r_j z_j, z = +1 for bit 0 and -1 for bit 1."""
    if s.n != cfg.ell:
        raise ArgumentError(f"Bit string {s} has {s.n} bits, expected {cfg.ell}")
    z = 1.0 - 2.0 * np.asarray(s.bits, dtype=np.float64)
    return float(1.0 - 0.5 * np.dot(cfg.rates, z))


def local_energies(cfg: VqseConfig) -> np.ndarray:
    """E_L over all 2^ell strings, ordered by basis index."""
    dim = 1 << cfg.ell
    bits = (np.arange(dim)[:, None] >> np.arange(cfg.ell - 1, -1, -1)[None, :]) & 1
    return 1.0 - 0.5 * (1.0 - 2.0 * bits) @ cfg.rates


def lowest_levels(cfg: VqseConfig, count: Optional[int] = None) -> np.ndarray:
    count = cfg.m if count is None else count
    return np.sort(local_energies(cfg))[:count]


def global_energies(top_set: Sequence, cfg: VqseConfig) -> np.ndarray:
    """E_G over all strings for a top set ordered by descending frequency."""
    indices = [s.index if isinstance(s, BitString) else int(s) for s in top_set]
    if len(indices) > cfg.m:
        raise ArgumentError(f"Top set has {len(indices)} strings, at most {cfg.m} allowed")
    if len(set(indices)) != len(indices):
        raise ArgumentError("Top set contains duplicate strings")
    energies = np.ones(1 << cfg.ell)
    energies[indices] = lowest_levels(cfg, len(indices))
    return energies


def scheduled_energies(t: float, top_set: Sequence, cfg: VqseConfig) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ArgumentError(f"t must be in [0, 1], got {t}")
    return (1.0 - t) * local_energies(cfg) + t * global_energies(top_set, cfg)


def vqse_cost(dist, t: float, top_set: Sequence, cfg: VqseConfig) -> float:
    """<H(t)> for the outcome distribution `dist`."""
    p = np.asarray(dist, dtype=np.float64).reshape(-1)
    if p.size != 1 << cfg.ell:
        raise ArgumentError(f"Distribution has {p.size} entries, expected {1 << cfg.ell}")
    return float(np.dot(p, scheduled_energies(t, top_set, cfg)))


def t_schedule(iteration: int, cfg: VqseConfig) -> float:
    """Piecewise-constant t, stepped every t_update_period iterations, 1 by 75% of n_iter."""
    updates = max(1, int(np.floor(SCHEDULE_REACH * cfg.n_iter / cfg.t_update_period)))
    return min(1.0, (iteration // cfg.t_update_period) / updates)


def is_nondegenerate(levels: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(np.sort(levels)) > tol))


def level_report(cfg: VqseConfig) -> List[float]:
    """The ell + 1 lowest local levels, for logs and checks."""
    return [float(x) for x in lowest_levels(cfg, cfg.ell + 1)]
