"""
Adam training of the entropy network on the variational cost.

The training set drives the updates; the test set is evaluated at
iteration 0, every `test_eval_period` iterations and after the last one.
C_NN is the lowest recorded test cost, and the weights at that point are
what the run returns (and what the network holds afterwards).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np
import torch

from quantum.exceptions import ArgumentError, TrainingError
from quantum.sampling import ShotSet

from .costs import Weights, cost_to_entropy, cost_vn, distribution_weights, minibatch_objective, objective
from .network import EntropyNet

logger = logging.getLogger('estimator')

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings for one training run; alpha None means von Neumann."""

    learning_rate: float = 1e-5
    weight_decay: float = 5e-5
    n_iter: int = 10000
    batch_size: Optional[int] = None
    test_eval_period: int = 10
    seed: int = 0
    alpha: Optional[float] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ArgumentError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.n_iter < 1:
            raise ArgumentError(f"n_iter must be at least 1, got {self.n_iter}")
        if self.test_eval_period < 1:
            raise ArgumentError(f"test_eval_period must be at least 1, got {self.test_eval_period}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ArgumentError(f"batch_size must be positive, got {self.batch_size}")

    def with_seed(self, seed: int) -> 'TrainConfig':
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            n_iter=self.n_iter,
            batch_size=self.batch_size,
            test_eval_period=self.test_eval_period,
            seed=int(seed),
            alpha=self.alpha,
        )


@dataclass(frozen=True)
class TrainPoint:
    iteration: int
    c_train: float
    c_test: float


@dataclass
class NnResult:
    """Outcome of one training run."""

    c_nn: float
    best_weights: Dict[str, np.ndarray]
    h_table: np.ndarray
    history: List[TrainPoint] = field(default_factory=list)
    alpha: Optional[float] = None
    vn_companion: Optional[float] = None

    @property
    def entropy(self) -> float:
        """Entropy estimate implied by c_nn."""
        return cost_to_entropy(self.c_nn, self.alpha)


def _as_tensor(weights: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(weights, dtype=np.float64))


def _batches(shots: ShotSet, batch_size: int, generator: torch.Generator):
    """Endless stream of minibatches; each epoch is a fresh permutation of all shots."""
    outcomes = torch.from_numpy(shots.expand())
    while True:
        order = outcomes[torch.randperm(outcomes.numel(), generator=generator)]
        for start in range(0, order.numel(), batch_size):
            yield order[start:start + batch_size]


def _check_inputs(net: EntropyNet, train_shots: Weights, test_shots: Weights, cfg: TrainConfig):
    for label, shots in (('train', train_shots), ('test', test_shots)):
        if isinstance(shots, ShotSet) and shots.n_qubits != net.n_qubits:
            raise ArgumentError(f"{label} shots cover {shots.n_qubits} qubits, network has {net.n_qubits}")
    if cfg.batch_size is not None and not isinstance(train_shots, ShotSet):
        raise ArgumentError("Minibatch training needs sampled shots, not exact weights")


def train(net: EntropyNet, train_shots: Weights, test_shots: Weights, cfg: TrainConfig) -> NnResult:
    """Run cfg.n_iter Adam steps and return the best test-cost snapshot."""
    _check_inputs(net, train_shots, test_shots, cfg)
    train_weights = _as_tensor(distribution_weights(train_shots, net.dim))
    test_weights = _as_tensor(distribution_weights(test_shots, net.dim))

    optimizer = torch.optim.Adam(
        net.parameters(),
        lr=cfg.learning_rate,
        betas=ADAM_BETAS,
        eps=ADAM_EPS,
        weight_decay=cfg.weight_decay,
    )
    batches = None
    if cfg.batch_size is not None:
        generator = torch.Generator()
        generator.manual_seed(int(cfg.seed))
        batches = _batches(train_shots, cfg.batch_size, generator)

    history: List[TrainPoint] = []
    best: Tuple[float, Optional[Dict[str, np.ndarray]]] = (np.inf, None)

    def record(iteration: int):
        nonlocal best
        with torch.no_grad():
            h_all = net.all_outputs()
            c_train = float(objective(h_all, train_weights, cfg.alpha))
            c_test = float(objective(h_all, test_weights, cfg.alpha))
        history.append(TrainPoint(iteration, c_train, c_test))
        if not (np.isfinite(c_train) and np.isfinite(c_test)):
            logger.error(f"Training diverged at iteration {iteration}: C_train={c_train} C_test={c_test}")
            raise TrainingError(f"Non-finite cost at iteration {iteration}", history)
        if c_test < best[0]:
            best = (c_test, net.snapshot())
        logger.debug(f"iter {iteration}: C_train={c_train:.6f} C_test={c_test:.6f}")

    record(0)
    for iteration in range(1, cfg.n_iter + 1):
        optimizer.zero_grad()
        h_all = net.all_outputs()
        if batches is None:
            loss = objective(h_all, train_weights, cfg.alpha)
        else:
            loss = minibatch_objective(h_all, next(batches), cfg.alpha)
        if not torch.isfinite(loss):
            logger.error(f"Training loss became non-finite at iteration {iteration}")
            raise TrainingError(f"Non-finite training loss at iteration {iteration}", history)
        loss.backward()
        optimizer.step()
        if iteration % cfg.test_eval_period == 0 or iteration == cfg.n_iter:
            record(iteration)

    c_nn, best_weights = best
    net.load_snapshot(best_weights)
    h_table = net.h_table()
    vn_companion = None
    if cfg.alpha is not None:
        vn_companion = cost_vn(h_table, test_weights.numpy())
    return NnResult(
        c_nn=float(c_nn),
        best_weights=best_weights,
        h_table=h_table,
        history=history,
        alpha=cfg.alpha,
        vn_companion=vn_companion,
    )


def cost_gradients(net: EntropyNet, weights: Weights, alpha: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Backpropagated gradient of the full-batch cost for every weight array."""
    weights = _as_tensor(distribution_weights(weights, net.dim))
    net.zero_grad()
    objective(net.all_outputs(), weights, alpha).backward()
    gradients = {name: param.grad.detach().numpy().copy() for name, param in net.named_parameters()}
    net.zero_grad()
    return gradients


def minibatch_gradients(net: EntropyNet, batch, alpha: Optional[float] = None) -> Dict[str, np.ndarray]:
    """Backpropagated gradient of the minibatch cost over the outcome indices in `batch`."""
    batch = torch.as_tensor(np.asarray(batch, dtype=np.int64))
    net.zero_grad()
    minibatch_objective(net.all_outputs(), batch, alpha).backward()
    gradients = {name: param.grad.detach().numpy().copy() for name, param in net.named_parameters()}
    net.zero_grad()
    return gradients
