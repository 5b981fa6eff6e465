"""
Variational state eigensolver baseline.

Gradient descent on the circuit angles with forward finite differences of
the sampled scheduled cost. Every `t_update_period` iterations t moves one
step along the schedule and the top set S is refreshed to the m most
numerous strings of a fresh sample. At the end the m largest eigenvalues
are read off as string frequencies N_i / N_s.
"""
from typing import List, Optional, Sequence, Tuple
import logging
import time

import numpy as np

from estimator.hybrid import EstimationRecord, IterationRecord, TrialRecord, derive_seed, exact_reference
from quantum.circuit import CircuitParams, identity_parameters, outcome_distribution, random_parameters
from quantum.exceptions import ArgumentError
from quantum.sampling import sample_shots
from quantum.states import DensityMatrix, shannon_entropy

from .hamiltonian import VqseConfig, level_report, t_schedule, vqse_cost

logger = logging.getLogger('vqse')


def _frequencies(rho: DensityMatrix, params: CircuitParams, cfg: VqseConfig, seed: int) -> np.ndarray:
    p = outcome_distribution(rho, params)
    if cfg.noise_free:
        return p
    return sample_shots(p, cfg.n_shots, seed).frequencies()


def _top_strings(frequencies: np.ndarray, m: int) -> List[int]:
    """Indices of the m largest frequencies; ties go to the lower index."""
    order = np.lexsort((np.arange(frequencies.size), -frequencies))
    return [int(i) for i in order[:m]]


def frequency_estimates(rho: DensityMatrix, params: CircuitParams, cfg: VqseConfig,
                        seed: int) -> Tuple[List[int], np.ndarray]:
    """Top-m strings at `params` and their frequencies, descending."""
    frequencies = _frequencies(rho, params, cfg, seed)
    top = _top_strings(frequencies, cfg.m)
    return top, frequencies[top]


def _run_trial(rho: DensityMatrix, cfg: VqseConfig, trial: int):
    started = time.perf_counter()
    n = rho.n_qubits
    record = TrialRecord(trial=trial)
    if cfg.init == 'identity':
        params = identity_parameters(n, cfg.n_layers)
    else:
        params = random_parameters(n, cfg.n_layers, seed=derive_seed(cfg.seed, trial, 0xA17))

    t, top = 0.0, []
    for k in range(cfg.n_iter):
        tick = time.perf_counter()
        if k % cfg.t_update_period == 0:
            t = t_schedule(k, cfg)
            top = _top_strings(_frequencies(rho, params, cfg, derive_seed(cfg.seed, trial, k, 0xC0)), cfg.m)
            logger.debug(f"Trial {trial} iter {k}: t={t:.3f} S={top}")

        step_seed = derive_seed(cfg.seed, trial, k + 1)
        baseline = vqse_cost(_frequencies(rho, params, cfg, derive_seed(step_seed, 0)), t, top, cfg)
        gradient = np.empty(params.size)
        for i in range(params.size):
            shifted = _frequencies(rho, params.perturbed(i, cfg.fd_step), cfg, derive_seed(step_seed, 1, i))
            gradient[i] = (vqse_cost(shifted, t, top, cfg) - baseline) / cfg.fd_step

        ideal = vqse_cost(outcome_distribution(rho, params), t, top, cfg)
        record.history.append(IterationRecord(
            trial=trial,
            outer_iter=k,
            stage='step',
            c_nn=baseline,
            ideal_cost=ideal,
            wall_time=time.perf_counter() - tick,
            params_key=params.key(),
        ))
        params = params.with_angles(params.angles - cfg.learning_rate * gradient)

    tick = time.perf_counter()
    final_seed = derive_seed(cfg.seed, trial, cfg.n_iter + 1)
    frequencies = _frequencies(rho, params, cfg, final_seed)
    top = _top_strings(frequencies, cfg.m)
    t_final = t_schedule(cfg.n_iter, cfg) if cfg.n_iter else 0.0
    final_cost = vqse_cost(frequencies, t_final, top, cfg)
    record.history.append(IterationRecord(
        trial=trial,
        outer_iter=cfg.n_iter,
        stage='final',
        c_nn=final_cost,
        ideal_cost=vqse_cost(outcome_distribution(rho, params), t_final, top, cfg),
        wall_time=time.perf_counter() - tick,
        params_key=params.key(),
    ))

    eigenvalues = frequencies[top]
    record.best_cost = final_cost
    record.best_params = params
    record.final_params = params
    record.estimate = shannon_entropy(eigenvalues)
    record.wall_time = time.perf_counter() - started
    return record, top, eigenvalues


def run_vqse(rho: DensityMatrix, cfg: VqseConfig, exact_entropy: Optional[float] = None,
             trial_ids: Optional[Sequence[int]] = None) -> EstimationRecord:
    """Leading eigenvalues from string frequencies and the entropy they imply."""
    if rho.n_qubits < 2:
        raise ArgumentError(f"The eigensolver needs at least 2 qubits, got {rho.n_qubits}")
    if cfg.ell != rho.n_qubits:
        raise ArgumentError(f"ell={cfg.ell} does not match the {rho.n_qubits}-qubit state")
    identity_parameters(rho.n_qubits, cfg.n_layers)
    logger.info(f"VQSE on {rho.n_qubits} qubits, lowest local levels {level_report(cfg)}")

    started = time.perf_counter()
    results = []
    for trial in (range(cfg.n_trials) if trial_ids is None else trial_ids):
        logger.info(f"VQSE trial {trial + 1}/{cfg.n_trials}")
        results.append(_run_trial(rho, cfg, trial))

    # Frequency entropies are not bounded below by the exact value
    best_record, best_top, best_values = min(results, key=lambda item: item[0].best_cost)
    if exact_entropy is None:
        exact_entropy = exact_reference(rho)
    record = EstimationRecord(
        method='vqse',
        n_qubits=rho.n_qubits,
        estimate=best_record.estimate,
        best_cost=best_record.best_cost,
        best_trial=best_record.trial,
        best_params=best_record.best_params,
        eigenvalues=np.asarray(best_values),
        eigen_order=list(best_top),
        trials=[item[0] for item in results],
        exact_entropy=exact_entropy,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        f"VQSE done: estimate={record.estimate:.6f} exact={exact_entropy:.6f} time={record.wall_time:.1f}s"
    )
    return record
