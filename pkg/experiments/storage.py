"""
Result files under the output directory.

Tables are CSV with fixed column sets (see COLUMNS), nested records are
JSON, reduced density matrices are .npy. Floats are written with repr so a
parsed value equals the emitted one, and identical runs give identical bytes.
"""
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Union
import csv
import io
import json
import logging

import numpy as np

from quantum.exceptions import OutputError

logger = logging.getLogger('experiments')

COLUMNS = {
    'ground_state': [
        'lambda', 'L', 'delta', 'subsystem', 'energy', 'degeneracy', 'exact_entropy', 'spectrum', 'rho_file',
    ],
    'scaling': ['lambda', 'slope', 'intercept', 'r_value', 'residual', 'central_charge'],
    'records': [
        'method', 'lambda', 'subsystem', 'trial', 'status', 'estimate', 'exact_entropy', 'abs_error', 'best_cost',
    ],
    'aggregate': [
        'method', 'lambda', 'subsystem', 'n_ok', 'n_failed', 'mean', 'std', 'min', 'exact_entropy', 'min_abs_error',
    ],
    'error_scatter': ['method', 'lambda', 'subsystem', 'trial', 'exact_entropy', 'abs_error'],
    'history': [
        'method', 'lambda', 'subsystem', 'trial', 'outer_iter', 'stage', 'c_nn', 'ideal_cost', 'exact_entropy',
    ],
    'eigenvalues': ['method', 'lambda', 'subsystem', 'rank', 'string', 'estimate', 'exact'],
    'timing': ['method', 'lambda', 'subsystem', 'trial', 'status', 'wall_time'],
    'oracle': ['name', 'passed', 'measured', 'tolerance', 'count', 'detail'],
}


def format_value(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


class RecordStore:
    """Writes and reads the result files of one run directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def _ensure_dir(self, path: Path):
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"Could not create directory: {exc}", path.parent)

    def write_csv(self, table: str, rows: Iterable[Mapping]) -> Path:
        """Write one of the COLUMNS tables; missing values are left empty."""
        if table not in COLUMNS:
            raise OutputError(f"Unknown table {table!r}")
        columns = COLUMNS[table]
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
            count += 1
        path = self.path(f"{table}.csv")
        self._write_text(path, buffer.getvalue())
        logger.info(f"Wrote {count} rows to {path}")
        return path

    def read_csv(self, table: str) -> List[Dict[str, str]]:
        path = self.path(f"{table}.csv")
        try:
            with path.open(newline='') as handle:
                return list(csv.DictReader(handle))
        except OSError as exc:
            raise OutputError(f"Could not read table: {exc}", path)

    def write_json(self, name: str, payload) -> Path:
        path = self.path(name)
        self._write_text(path, json.dumps(payload, indent=2, sort_keys=True) + '\n')
        logger.debug(f"Wrote {path}")
        return path

    def read_json(self, name: str):
        path = self.path(name)
        try:
            return json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise OutputError(f"Could not read JSON document: {exc}", path)

    def write_array(self, name: str, array: np.ndarray) -> Path:
        path = self.path(name)
        self._ensure_dir(path)
        try:
            np.save(path, np.asarray(array), allow_pickle=False)
        except OSError as exc:
            raise OutputError(f"Could not write array: {exc}", path)
        return path

    def read_array(self, name: str) -> np.ndarray:
        path = self.path(name)
        try:
            return np.load(path, allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise OutputError(f"Could not read array: {exc}", path)

    def _write_text(self, path: Path, text: str):
        self._ensure_dir(path)
        try:
            path.write_text(text)
        except OSError as exc:
            raise OutputError(f"Could not write file: {exc}", path)


def join_values(values: Sequence[float]) -> str:
    """Semicolon-joined floats for a single CSV cell."""
    return ';'.join(repr(float(v)) for v in values)
