"""
Sweeps over the field lambda.

The exact part (ground state, reduced states, oracle entropies and spectra,
entanglement scaling fit) runs in the parent process. Estimation cells
(lambda x subsystem x method x trial) run in a spawned worker pool; results
come back in submission order and are written by the parent only.
"""
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging
import math

import numpy as np
from scipy.stats import spearmanr

from estimator import checkpoint
from estimator.hybrid import EstimationRecord, run_qnee
from estimator.parallel import pool_starmap, worker_pool
from quantum.exceptions import QneeError
from quantum.states import DensityMatrix, eig_hermitian, renyi_exact, von_neumann_exact
from quantum.xxz import XXZParams, block_entropies, fit_log_scaling, ground_state
from vqse.solver import run_vqse

from .config import SweepConfig
from .monitoring import track_cell
from .serializers import EstimationRecordSerializer
from .storage import RecordStore, join_values

logger = logging.getLogger('experiments')


@dataclass(frozen=True)
class Cell:
    method: str
    lambda_index: int
    lam: float
    subsystem: int
    trial: int

    @property
    def label(self) -> str:
        return f"{self.method} lambda={self.lam:g} n={self.subsystem} trial={self.trial}"


@dataclass
class CellResult:
    cell: Cell
    status: str
    record: Optional[EstimationRecord] = None
    error: Optional[str] = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == 'ok'


@dataclass
class ExactState:
    rho: DensityMatrix
    entropy: float
    spectrum: np.ndarray

    def reference(self, alpha: Optional[float] = None) -> float:
        """Exact entropy of the order an estimator targets; von Neumann when alpha is None."""
        return self.entropy if alpha is None else renyi_exact(self.rho, alpha)


@dataclass
class SweepResult:
    cells: List[CellResult] = field(default_factory=list)
    aggregates: List[Dict] = field(default_factory=list)
    correlations: Dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def failed(self) -> List[CellResult]:
        return [result for result in self.cells if not result.ok]


def exact_tables(cfg: SweepConfig, store: Optional[RecordStore] = None):
    """Ground-state rows, scaling-fit rows and the reduced states keyed by (lambda index, n)."""
    states: Dict[Tuple[int, int], ExactState] = {}
    gs_rows, scaling_rows = [], []
    sizes = list(range(1, cfg.L // 2 + 1))
    for li, lam in enumerate(cfg.lambda_grid):
        gs = ground_state(XXZParams(cfg.L, cfg.delta, lam))
        for n in cfg.subsystems:
            rho = gs.block(n)
            spectrum = eig_hermitian(rho).eigenvalues
            entropy = von_neumann_exact(rho)
            states[(li, n)] = ExactState(rho, entropy, np.asarray(spectrum))
            rho_file = f"rho/lam{li:02d}_n{n}.npy"
            if store is not None:
                store.write_array(rho_file, rho.matrix)
            gs_rows.append({
                'lambda': lam,
                'L': cfg.L,
                'delta': cfg.delta,
                'subsystem': n,
                'energy': gs.energy,
                'degeneracy': gs.degeneracy,
                'exact_entropy': entropy,
                'spectrum': join_values(spectrum),
                'rho_file': rho_file,
            })
        if len(sizes) >= 2:
            fit = fit_log_scaling(cfg.L, sizes, block_entropies(gs, sizes))
            scaling_rows.append({
                'lambda': lam,
                'slope': fit.slope,
                'intercept': fit.intercept,
                'r_value': fit.r_value,
                'residual': fit.residual,
                'central_charge': fit.central_charge,
            })
        logger.info(f"Ground state lambda={lam:g}: E0={gs.energy:.8f} degeneracy={gs.degeneracy}")
    return gs_rows, scaling_rows, states


def write_exact(cfg: SweepConfig, store: RecordStore):
    gs_rows, scaling_rows, states = exact_tables(cfg, store)
    store.write_csv('ground_state', gs_rows)
    store.write_csv('scaling', scaling_rows)
    return states


def trial_count(cfg: SweepConfig, method: str) -> int:
    return (cfg.qnee if method == 'qnee' else cfg.vqse)['n_trials']


def build_cells(cfg: SweepConfig) -> List[Cell]:
    return [
        Cell(method, li, lam, n, trial)
        for li, lam in enumerate(cfg.lambda_grid)
        for n in cfg.subsystems
        for method in cfg.methods
        for trial in range(trial_count(cfg, method))
    ]


def target_alpha(cfg: SweepConfig, method: str) -> Optional[float]:
    """Renyi order QNEE cells estimate; VQSE always reads the Shannon entropy."""
    return cfg.nn_initial.alpha if method == 'qnee' else None


def run_cell(cell: Cell, rho_matrix: np.ndarray, cfg: SweepConfig, exact_entropy: float) -> CellResult:
    """One trial of one method on one reduced state; failures are returned, not raised."""
    rho = DensityMatrix.from_matrix(rho_matrix)
    seed = cfg.cell_seed(cell.lambda_index, cell.subsystem, cell.method)
    with track_cell(cell.label) as tracker:
        try:
            if cell.method == 'qnee':
                record = run_qnee(rho, cfg.qnee_config(cell.subsystem, seed), exact_entropy, trial_ids=[cell.trial])
            else:
                record = run_vqse(rho, cfg.vqse_config(cell.subsystem, seed), exact_entropy, trial_ids=[cell.trial])
        except QneeError as exc:
            tracker.fail(str(exc))
            record, error = None, str(exc)
        else:
            error = None
    return CellResult(cell, tracker.status, record, error, tracker.duration)


def _nan_to_none(value) -> Optional[float]:
    value = float(value)
    return None if math.isnan(value) else value


def aggregate(results: List[CellResult], states: Dict[Tuple[int, int], ExactState], cfg: SweepConfig) -> List[Dict]:
    """mean/std/min over trials per (method, lambda, subsystem)."""
    groups = defaultdict(list)
    for result in results:
        key = (result.cell.method, result.cell.lambda_index, result.cell.subsystem)
        groups[key].append(result)
    rows = []
    for (method, li, n), members in groups.items():
        estimates = np.array([m.record.estimate for m in members if m.ok])
        exact = states[(li, n)].reference(target_alpha(cfg, method))
        row = {
            'method': method,
            'lambda': members[0].cell.lam,
            'subsystem': n,
            'n_ok': int(estimates.size),
            'n_failed': len(members) - int(estimates.size),
            'exact_entropy': exact,
        }
        if estimates.size:
            row.update({
                'mean': float(estimates.mean()),
                'std': float(estimates.std()),
                'min': float(estimates.min()),
                'min_abs_error': abs(float(estimates.min()) - exact),
            })
        rows.append(row)
    return rows


def error_correlations(results: List[CellResult]) -> Dict[str, Optional[float]]:
    """Spearman correlation of |estimate - exact| with the exact entropy, per method."""
    correlations = {}
    for method in sorted({result.cell.method for result in results}):
        points = [
            (r.record.exact_entropy, r.record.absolute_error)
            for r in results if r.ok and r.cell.method == method
        ]
        if len(points) < 3:
            correlations[method] = None
            continue
        exact, errors = zip(*points)
        correlations[method] = _nan_to_none(spearmanr(exact, errors)[0])
    return correlations


def _result_rows(results: List[CellResult], states, cfg: SweepConfig):
    records, scatter, history, eigen, timing = [], [], [], [], []
    for result in results:
        cell = result.cell
        base = {'method': cell.method, 'lambda': cell.lam, 'subsystem': cell.subsystem}
        exact = states[(cell.lambda_index, cell.subsystem)]
        timing.append({**base, 'trial': cell.trial, 'status': result.status, 'wall_time': result.wall_time})
        if not result.ok:
            records.append({**base, 'trial': cell.trial, 'status': result.status,
                            'exact_entropy': exact.reference(target_alpha(cfg, cell.method))})
            continue
        record = result.record
        records.append({
            **base,
            'trial': cell.trial,
            'status': result.status,
            'estimate': record.estimate,
            'exact_entropy': record.exact_entropy,
            'abs_error': record.absolute_error,
            'best_cost': record.best_cost,
        })
        scatter.append({**base, 'trial': cell.trial, 'exact_entropy': record.exact_entropy,
                        'abs_error': record.absolute_error})
        for point in record.trials[0].history:
            history.append({
                **base,
                'trial': cell.trial,
                'outer_iter': point.outer_iter,
                'stage': point.stage,
                'c_nn': point.c_nn,
                'ideal_cost': point.ideal_cost,
                'exact_entropy': record.exact_entropy,
            })
        for rank, (value, index) in enumerate(zip(record.eigenvalues, record.eigen_order)):
            eigen.append({
                **base,
                'rank': rank,
                'string': format(index, f'0{cell.subsystem}b'),
                'estimate': float(value),
                'exact': float(exact.spectrum[rank]),
            })
    return records, scatter, history, eigen, timing


def run_sweep(cfg: SweepConfig, store: Optional[RecordStore] = None) -> SweepResult:
    """Run every cell, then write all tables; failed cells are recorded and skipped."""
    store = store or RecordStore(cfg.output_dir)
    states = write_exact(cfg, store)
    cells = build_cells(cfg)
    logger.info(f"Sweep: {len(cells)} cells over {len(cfg.lambda_grid)} fields, methods {cfg.methods}")

    tasks = [
        (cell, states[(cell.lambda_index, cell.subsystem)].rho.matrix, cfg,
         states[(cell.lambda_index, cell.subsystem)].reference(target_alpha(cfg, cell.method)))
        for cell in cells
    ]
    pool = worker_pool(cfg.workers)
    try:
        results = pool_starmap(pool, run_cell, tasks)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    sweep = SweepResult(
        cells=results,
        aggregates=aggregate(results, states, cfg),
        correlations=error_correlations(results),
    )
    records, scatter, history, eigen, timing = _result_rows(results, states, cfg)
    store.write_csv('records', records)
    store.write_csv('aggregate', sweep.aggregates)
    store.write_csv('error_scatter', scatter)
    store.write_csv('history', history)
    store.write_csv('eigenvalues', eigen)
    store.write_csv('timing', timing)
    for result in results:
        if result.ok:
            cell = result.cell
            name = f"records/{cell.method}_lam{cell.lambda_index:02d}_n{cell.subsystem}_t{cell.trial}.json"
            store.write_json(name, EstimationRecordSerializer(result.record).data)
            for trial in result.record.trials:
                if trial.best_weights is not None:
                    checkpoint.save(trial.best_weights, store.path(
                        f"networks/{cell.method}_lam{cell.lambda_index:02d}_n{cell.subsystem}_t{trial.trial}.qnw"))
    store.write_json('summary.json', {
        'cells': len(results),
        'failed': [result.cell.label for result in sweep.failed],
        'spearman_error_vs_entropy': sweep.correlations,
        'methods': list(cfg.methods),
    })
    if sweep.failed:
        logger.warning(f"{len(sweep.failed)} of {len(results)} cells failed")
    return sweep
