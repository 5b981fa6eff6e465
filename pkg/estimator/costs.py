"""
Variational entropy costs.

For a table h over all 2^n basis strings and an (empirical or exact)
distribution P over the same strings:

    von Neumann   C    = -sum_i P_i h_i + sum_i e^{h_i} - 1
    Renyi         C_a  = sum_i P_i (e^{(a-1) h_i} - 1)/(1-a) + (sum_i e^{a h_i} - 1)/a
    log form      C_dv = -sum_i P_i h_i + ln sum_i e^{h_i}

All three are upper bounds of the Shannon (Renyi) entropy of P and saturate
at h = ln P. C_a at saturation equals (e^{(1-a) S_a} - 1) / (a (1-a)), which
invert_cost_renyi solves for S_a. The log form is for evaluation only.

The numpy functions take either a ShotSet or a weight vector; the torch
functions are the differentiable training objectives.
"""
import logging
from typing import Optional, Union

import numpy as np
import torch

from quantum.exceptions import ArgumentError, EstimateRangeError
from quantum.sampling import ShotSet
from quantum.states import check_alpha, renyi_shannon, shannon_entropy

logger = logging.getLogger('estimator')

Weights = Union[ShotSet, np.ndarray]


def distribution_weights(shots: Weights, size: Optional[int] = None) -> np.ndarray:
    """Frequencies of a ShotSet, or a weight vector passed through."""
    if isinstance(shots, ShotSet):
        weights = shots.frequencies()
    else:
        weights = np.asarray(shots, dtype=np.float64).reshape(-1)
    if size is not None and weights.size != size:
        raise ArgumentError(f"Weights cover {weights.size} strings, h table has {size}")
    return weights


def _table(h_table) -> np.ndarray:
    h = np.asarray(h_table, dtype=np.float64).reshape(-1)
    if h.size == 0 or (h.size & (h.size - 1)):
        raise ArgumentError(f"h table length {h.size} is not a power of two")
    return h


def cost_vn(h_table, shots: Weights) -> float:
    h = _table(h_table)
    p = distribution_weights(shots, h.size)
    return float(-np.dot(p, h) + np.sum(np.exp(h)) - 1.0)


def cost_renyi(h_table, shots: Weights, alpha: float) -> float:
    check_alpha(alpha)
    h = _table(h_table)
    p = distribution_weights(shots, h.size)
    first = np.dot(p, np.expm1((alpha - 1.0) * h)) / (1.0 - alpha)
    second = (np.sum(np.exp(alpha * h)) - 1.0) / alpha
    return float(first + second)


def cost_dv(h_table, shots: Weights) -> float:
    """Logarithmic (Donsker-Varadhan) form of the von Neumann bound."""
    h = _table(h_table)
    p = distribution_weights(shots, h.size)
    top = np.max(h)
    return float(-np.dot(p, h) + top + np.log(np.sum(np.exp(h - top))))


def saturated_renyi_cost(entropy: float, alpha: float) -> float:
    """Value of C_a at its minimum for a distribution of Renyi entropy `entropy`."""
    check_alpha(alpha)
    return float(np.expm1((1.0 - alpha) * entropy) / (alpha * (1.0 - alpha)))


def invert_cost_renyi(c_alpha: float, alpha: float) -> float:
    """S_a = ln(1 + a (1-a) C_a) / (1 - a)."""
    check_alpha(alpha)
    argument = 1.0 + alpha * (1.0 - alpha) * c_alpha
    if not np.isfinite(argument) or argument <= 0.0:
        raise EstimateRangeError(
            f"Cost {c_alpha} at alpha={alpha} gives ln argument {argument}; the estimate is invalid"
        )
    return float(np.log(argument) / (1.0 - alpha))


def cost_to_entropy(cost: float, alpha: Optional[float]) -> float:
    """Entropy estimate carried by a cost value (identity for von Neumann)."""
    if alpha is None:
        return float(cost)
    return invert_cost_renyi(cost, alpha)


def analytic_cost(p, alpha: Optional[float] = None) -> float:
    """Minimum of the cost over h (h = ln P), i.e. the noise-free inner optimum."""
    if alpha is None:
        return shannon_entropy(p)
    return saturated_renyi_cost(renyi_shannon(p, alpha), alpha)


# Differentiable objectives

def _normalizer(h_all: torch.Tensor, alpha: Optional[float]) -> torch.Tensor:
    if alpha is None:
        return torch.exp(h_all).sum() - 1.0
    return (torch.exp(alpha * h_all).sum() - 1.0) / alpha


def _pointwise(h: torch.Tensor, alpha: Optional[float]) -> torch.Tensor:
    if alpha is None:
        return -h
    return torch.expm1((alpha - 1.0) * h) / (1.0 - alpha)


def objective(h_all: torch.Tensor, weights: torch.Tensor, alpha: Optional[float] = None) -> torch.Tensor:
    """Full-batch cost from h over all strings and a weight vector."""
    return torch.dot(weights, _pointwise(h_all, alpha)) + _normalizer(h_all, alpha)


def minibatch_objective(h_all: torch.Tensor, batch: torch.Tensor, alpha: Optional[float] = None) -> torch.Tensor:
    """Cost with the empirical term averaged over the outcome indices in `batch`."""
    return _pointwise(h_all[batch], alpha).mean() + _normalizer(h_all, alpha)
