"""
The outer QNEE loop.

For each trial: a long warm-up training of the network at the initial
circuit angles, then `n_outer` finite-difference gradient steps on the
angles with C_NN as the objective, then one evaluation at the final angles.
Every evaluation samples fresh train/test shots and trains a copy of the
current network (warm start). The reported estimate is the lowest C_NN
recorded anywhere; eigenvalues come from e^h of the network at that point
and eigenvectors from V^dagger |s> at the matching angles.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging
import time

import numpy as np

from quantum.circuit import (
    BitString,
    CircuitParams,
    conjugate_column,
    identity_parameters,
    outcome_distribution,
    random_parameters,
)
from quantum.exceptions import ArgumentError, EstimateRangeError, EstimationError, TrainingError
from quantum.sampling import sample_shots
from quantum.states import LOG_FLOOR, DensityMatrix, StateVector, renyi_exact, von_neumann_exact

from . import checkpoint
from .costs import analytic_cost, cost_to_entropy
from .network import EntropyNet, build_network
from .parallel import pool_starmap, worker_pool
from .training import TrainConfig, train

logger = logging.getLogger('estimator')

FD_SCHEMES = ('forward', 'central')
INIT_MODES = ('random', 'identity')
STAGES = ('initial', 'step', 'final')


@dataclass(frozen=True)
class QneeConfig:
    n_layers: int
    eta_q: float = 0.01
    fd_step: float = 0.01
    fd_scheme: str = 'forward'
    n_outer: int = 200
    n_shots: int = 30000
    nn_initial: TrainConfig = field(default_factory=lambda: TrainConfig(n_iter=10000))
    nn_step: TrainConfig = field(default_factory=lambda: TrainConfig(n_iter=100))
    n_trials: int = 5
    seed: int = 1234
    noise_free: bool = False
    exact_weights: bool = False
    init: str = 'random'
    embed_dim: int = 64
    hidden_width: int = 256
    workers: int = 1
    warm_start: Optional[str] = None

    def __post_init__(self):
        if not self.eta_q > 0:
            raise ArgumentError(f"eta_q must be positive, got {self.eta_q}")
        if not self.fd_step > 0:
            raise ArgumentError(f"fd_step must be positive, got {self.fd_step}")
        if self.n_trials < 1:
            raise ArgumentError(f"n_trials must be at least 1, got {self.n_trials}")
        if self.n_outer < 0:
            raise ArgumentError(f"n_outer must be nonnegative, got {self.n_outer}")
        if self.n_shots < 1:
            raise ArgumentError(f"n_shots must be at least 1, got {self.n_shots}")
        if self.fd_scheme not in FD_SCHEMES:
            raise ArgumentError(f"fd_scheme must be one of {FD_SCHEMES}, got {self.fd_scheme!r}")
        if self.init not in INIT_MODES:
            raise ArgumentError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.nn_initial.alpha != self.nn_step.alpha:
            raise ArgumentError("Initial and per-step training must use the same entropy order")

    @property
    def alpha(self) -> Optional[float]:
        return self.nn_initial.alpha


@dataclass(frozen=True)
class IterationRecord:
    trial: int
    outer_iter: int
    stage: str
    c_nn: float
    ideal_cost: float
    wall_time: float
    params_key: str = ''


@dataclass
class TrialRecord:
    trial: int
    history: List[IterationRecord] = field(default_factory=list)
    best_cost: float = np.inf
    best_params: Optional[CircuitParams] = None
    best_h_table: Optional[np.ndarray] = None
    best_vn_companion: Optional[float] = None
    best_weights: Optional[Dict[str, np.ndarray]] = None
    final_params: Optional[CircuitParams] = None
    estimate: Optional[float] = None
    error: Optional[str] = None
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def entropy(self) -> float:
        return self.best_cost if self.estimate is None else self.estimate


@dataclass
class EstimationRecord:
    """Result of one estimation run over all trials."""

    method: str
    n_qubits: int
    estimate: float
    best_cost: float
    best_trial: int
    best_params: CircuitParams
    eigenvalues: np.ndarray
    eigen_order: List[int]
    trials: List[TrialRecord]
    alpha: Optional[float] = None
    exact_entropy: Optional[float] = None
    vn_companion: Optional[float] = None
    wall_time: float = 0.0

    @property
    def histories(self) -> Dict[int, List[IterationRecord]]:
        return {trial.trial: trial.history for trial in self.trials}

    @property
    def absolute_error(self) -> Optional[float]:
        if self.exact_entropy is None:
            return None
        return abs(self.estimate - self.exact_entropy)


@dataclass
class Evaluation:
    c_nn: float
    ideal_cost: float
    net: Optional[EntropyNet]
    h_table: np.ndarray
    vn_companion: Optional[float] = None


def derive_seed(base: int, *keys: int) -> int:
    """Independent 32-bit seed for a (trial, step, coordinate) address."""
    return int(np.random.SeedSequence([int(base), *[int(k) for k in keys]]).generate_state(1)[0])


def _evaluate(rho: DensityMatrix, params: CircuitParams, net_warm: Optional[EntropyNet],
              cfg: QneeConfig, seed: int, nn_cfg: TrainConfig) -> Evaluation:
    p = outcome_distribution(rho, params)
    ideal = analytic_cost(p, cfg.alpha)
    if cfg.noise_free:
        return Evaluation(ideal, ideal, net_warm, np.log(np.clip(p, LOG_FLOOR, None)))

    net = net_warm.clone()
    if cfg.exact_weights:
        train_set, test_set = p, p
    else:
        rng = np.random.default_rng(seed)
        train_set = sample_shots(p, cfg.n_shots, rng)
        test_set = sample_shots(p, cfg.n_shots, rng)
    result = train(net, train_set, test_set, nn_cfg.with_seed(seed))
    return Evaluation(result.c_nn, ideal, net, result.h_table, result.vn_companion)


def evaluate_cnn(rho: DensityMatrix, params: CircuitParams, net_warm: Optional[EntropyNet],
                 cfg: QneeConfig, seed: Optional[int] = None,
                 nn_cfg: Optional[TrainConfig] = None) -> Tuple[float, Optional[EntropyNet]]:
    """C_NN at `params` from fresh shots and a warm-started copy of `net_warm`."""
    seed = cfg.seed if seed is None else seed
    evaluation = _evaluate(rho, params, net_warm, cfg, seed, nn_cfg or cfg.nn_step)
    return evaluation.c_nn, evaluation.net


def _cost_only(rho, params, net_warm, cfg, seed, nn_cfg) -> float:
    return _evaluate(rho, params, net_warm, cfg, seed, nn_cfg).c_nn


def _gradient_step(rho: DensityMatrix, params: CircuitParams, net_warm: Optional[EntropyNet],
                   cfg: QneeConfig, seed: int, pool=None) -> Tuple[np.ndarray, Evaluation]:
    """Baseline evaluation plus one (forward) or two (central) perturbed evaluations per angle."""
    baseline = _evaluate(rho, params, net_warm, cfg, derive_seed(seed, 0), cfg.nn_step)
    delta = cfg.fd_step
    plus = [
        (rho, params.perturbed(i, delta), net_warm, cfg, derive_seed(seed, 1, i), cfg.nn_step)
        for i in range(params.size)
    ]
    if cfg.fd_scheme == 'forward':
        costs = np.array(pool_starmap(pool, _cost_only, plus))
        gradient = (costs - baseline.c_nn) / delta
    else:
        minus = [
            (rho, params.perturbed(i, -delta), net_warm, cfg, derive_seed(seed, 2, i), cfg.nn_step)
            for i in range(params.size)
        ]
        costs = np.array(pool_starmap(pool, _cost_only, plus + minus))
        gradient = (costs[:params.size] - costs[params.size:]) / (2.0 * delta)
    return gradient, baseline


def fd_gradient(rho: DensityMatrix, params: CircuitParams, net_warm: Optional[EntropyNet],
                cfg: QneeConfig, seed: Optional[int] = None, pool=None) -> np.ndarray:
    """Finite-difference gradient of C_NN with respect to the circuit angles."""
    gradient, _ = _gradient_step(rho, params, net_warm, cfg, cfg.seed if seed is None else seed, pool)
    return gradient


def _initial_params(n_qubits: int, cfg: QneeConfig, trial: int) -> CircuitParams:
    if cfg.init == 'identity':
        return identity_parameters(n_qubits, cfg.n_layers)
    return random_parameters(n_qubits, cfg.n_layers, seed=derive_seed(cfg.seed, trial, 0xA17))


def initial_network(n_qubits: int, cfg: QneeConfig, trial: int) -> EntropyNet:
    """Fresh network for a trial, or one restored from the cfg.warm_start snapshot."""
    net = build_network(n_qubits, cfg.embed_dim, cfg.hidden_width, seed=derive_seed(cfg.seed, trial, 0xB0))
    if cfg.warm_start:
        weights = checkpoint.load(cfg.warm_start)
        try:
            net.load_snapshot(weights)
        except (RuntimeError, KeyError) as exc:
            raise ArgumentError(
                f"Snapshot {cfg.warm_start} does not fit a {n_qubits}-qubit network "
                f"(embed={cfg.embed_dim}, width={cfg.hidden_width}): {exc}"
            )
        logger.info(f"Trial {trial} warm-started from {cfg.warm_start}")
    return net


def _run_trial(rho: DensityMatrix, cfg: QneeConfig, trial: int, pool=None) -> TrialRecord:
    started = time.perf_counter()
    record = TrialRecord(trial=trial)
    params = _initial_params(rho.n_qubits, cfg, trial)
    net = None
    if not cfg.noise_free:
        net = initial_network(rho.n_qubits, cfg, trial)

    def keep(stage: str, outer_iter: int, evaluation: Evaluation, at: CircuitParams, tick: float):
        record.history.append(IterationRecord(
            trial=trial,
            outer_iter=outer_iter,
            stage=stage,
            c_nn=float(evaluation.c_nn),
            ideal_cost=float(evaluation.ideal_cost),
            wall_time=time.perf_counter() - tick,
            params_key=at.key(),
        ))
        if evaluation.c_nn < record.best_cost:
            record.best_cost = float(evaluation.c_nn)
            record.best_params = at
            record.best_h_table = evaluation.h_table
            record.best_vn_companion = evaluation.vn_companion
            if evaluation.net is not None:
                record.best_weights = evaluation.net.snapshot()
            logger.debug(f"Trial {trial}: new best C_NN={evaluation.c_nn:.6f} ({stage} {outer_iter})")

    try:
        tick = time.perf_counter()
        initial = _evaluate(rho, params, net, cfg, derive_seed(cfg.seed, trial, 0), cfg.nn_initial)
        keep('initial', 0, initial, params, tick)
        net = initial.net

        for k in range(cfg.n_outer):
            tick = time.perf_counter()
            gradient, baseline = _gradient_step(rho, params, net, cfg, derive_seed(cfg.seed, trial, k + 1), pool)
            keep('step', k, baseline, params, tick)
            net = baseline.net
            params = params.with_angles(params.angles - cfg.eta_q * gradient)
            logger.debug(f"Trial {trial} step {k}: C_NN={baseline.c_nn:.6f} |grad|={np.linalg.norm(gradient):.4e}")

        tick = time.perf_counter()
        final = _evaluate(rho, params, net, cfg, derive_seed(cfg.seed, trial, cfg.n_outer + 1), cfg.nn_step)
        keep('final', cfg.n_outer, final, params, tick)
    except TrainingError as exc:
        record.error = str(exc)
        logger.warning(f"Trial {trial} diverged: {exc}")
    else:
        try:
            record.estimate = cost_to_entropy(record.best_cost, cfg.alpha)
        except EstimateRangeError as exc:
            record.error = str(exc)
            logger.warning(f"Trial {trial} produced no valid estimate: {exc}")
    record.final_params = params
    record.wall_time = time.perf_counter() - started
    return record


def exact_reference(rho: DensityMatrix, alpha: Optional[float] = None) -> float:
    """Oracle entropy of the matching order."""
    if alpha is None:
        return von_neumann_exact(rho)
    return renyi_exact(rho, alpha)


def run_qnee(rho: DensityMatrix, cfg: QneeConfig, exact_entropy: Optional[float] = None, pool=None,
             trial_ids: Optional[Sequence[int]] = None) -> EstimationRecord:
    """
    Estimate the entropy, eigenvalues and eigenvectors of rho.

    `trial_ids` runs a subset of the trials (by index) with exactly the seeds
    they get in a full run, so trials can be spread over sweep cells.
    """
    if rho.n_qubits < 2:
        raise ArgumentError(f"The estimator needs at least 2 qubits, got {rho.n_qubits}")
    # validates n_layers against the register before any training starts
    identity_parameters(rho.n_qubits, cfg.n_layers)

    started = time.perf_counter()
    owned_pool = pool is None and cfg.workers > 1
    if owned_pool:
        pool = worker_pool(cfg.workers)
    try:
        trials = []
        for trial in (range(cfg.n_trials) if trial_ids is None else trial_ids):
            logger.info(f"QNEE trial {trial + 1}/{cfg.n_trials} on {rho.n_qubits} qubits, N_l={cfg.n_layers}")
            trials.append(_run_trial(rho, cfg, trial, pool))
    finally:
        if owned_pool:
            pool.close()
            pool.join()

    completed = [trial for trial in trials if not trial.failed and trial.best_params is not None]
    if not completed:
        logger.error(f"All {len(trials)} QNEE trials diverged")
        raise EstimationError(
            f"All {len(trials)} trials diverged",
            {trial.trial: trial.history for trial in trials},
        )

    best = min(completed, key=lambda trial: trial.best_cost)
    eigenvalues = np.exp(best.best_h_table)
    order = [int(i) for i in np.argsort(-eigenvalues, kind='stable')]
    if exact_entropy is None:
        exact_entropy = exact_reference(rho, cfg.alpha)
    record = EstimationRecord(
        method='qnee',
        n_qubits=rho.n_qubits,
        estimate=best.estimate,
        best_cost=best.best_cost,
        best_trial=best.trial,
        best_params=best.best_params,
        eigenvalues=eigenvalues[order],
        eigen_order=order,
        trials=trials,
        alpha=cfg.alpha,
        exact_entropy=exact_entropy,
        vn_companion=best.best_vn_companion,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        f"QNEE done: estimate={record.estimate:.6f} exact={exact_entropy:.6f} "
        f"best trial={best.trial} time={record.wall_time:.1f}s"
    )
    return record


def extract_eigen(record: EstimationRecord, k: int) -> List[Tuple[float, StateVector]]:
    """Top-k (eigenvalue, eigenvector) pairs, eigenvalues descending."""
    available = len(record.eigenvalues)
    if not 1 <= k <= available:
        raise ArgumentError(f"k must be in [1, {available}], got {k}")
    pairs = []
    for value, index in zip(record.eigenvalues[:k], record.eigen_order[:k]):
        s = BitString.from_index(index, record.n_qubits)
        pairs.append((float(value), conjugate_column(record.best_params, s)))
    return pairs
