"""
Sweep configuration.

Layers, lowest precedence first: settings.QNEE_DEFAULTS, the JSON config
file, QNEE_* environment variables (only those that are set), command-line
flags. The merged document is validated by SweepConfigSerializer, whose
save() returns the SweepConfig below.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple
import copy
import json
import logging
import os

from django.conf import settings

from estimator.hybrid import QneeConfig, derive_seed
from estimator.training import TrainConfig
from quantum.exceptions import ArgumentError
from vqse.hamiltonian import VqseConfig

logger = logging.getLogger('experiments')

METHODS = ('qnee', 'vqse', 'both', 'exact')
METHOD_CODES = {'qnee': 1, 'vqse': 2}

# Flat override keys and where they land in the nested document
OVERRIDE_PATHS = {
    'seed': [('seed',)],
    'shots': [('qnee', 'n_shots'), ('vqse', 'n_shots')],
    'trials': [('qnee', 'n_trials'), ('vqse', 'n_trials')],
    'workers': [('workers',)],
    'n_outer': [('qnee', 'n_outer')],
    'output_dir': [('output_dir',)],
    'method': [('method',)],
    'lambda_grid': [('lambda_grid',)],
    'subsystems': [('subsystems',)],
}
LIST_KEYS = {'lambda_grid': float, 'subsystems': int}
INT_KEYS = {'seed', 'shots', 'trials', 'workers', 'n_outer'}


@dataclass(frozen=True)
class SweepConfig:
    L: int
    delta: float
    lambda_grid: Tuple[float, ...]
    subsystems: Tuple[int, ...]
    method: str
    seed: int
    workers: int
    output_dir: Path
    layers_by_subsystem: Dict[int, int]
    qnee: Dict[str, Any] = field(default_factory=dict)
    nn_initial: TrainConfig = field(default_factory=TrainConfig)
    nn_step: TrainConfig = field(default_factory=lambda: TrainConfig(n_iter=100))
    vqse: Dict[str, Any] = field(default_factory=dict)

    @property
    def methods(self) -> Tuple[str, ...]:
        if self.method == 'both':
            return ('qnee', 'vqse')
        if self.method == 'exact':
            return ()
        return (self.method,)

    def n_layers(self, n_qubits: int) -> int:
        try:
            return self.layers_by_subsystem[n_qubits]
        except KeyError:
            raise ArgumentError(f"No layer count configured for a {n_qubits}-qubit subsystem")

    def cell_seed(self, lambda_index: int, n_qubits: int, method: str) -> int:
        return derive_seed(self.seed, lambda_index, n_qubits, METHOD_CODES[method])

    def qnee_config(self, n_qubits: int, seed: int) -> QneeConfig:
        from .serializers import QneeConfigSerializer

        # Cells already run in pool workers, so estimation inside a cell is serial
        serializer = QneeConfigSerializer(context={
            'n_layers': self.n_layers(n_qubits),
            'seed': seed,
            'nn_initial': self.nn_initial.with_seed(seed),
            'nn_step': self.nn_step.with_seed(seed),
            'workers': 1,
        })
        return serializer.create(dict(self.qnee))

    def vqse_config(self, n_qubits: int, seed: int) -> VqseConfig:
        from .serializers import VqseConfigSerializer

        serializer = VqseConfigSerializer(context={'ell': n_qubits, 'n_layers': self.n_layers(n_qubits), 'seed': seed})
        return serializer.create(dict(self.vqse))


def deep_merge(base: Dict[str, Any], overlay: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; overlay wins, nested dicts merge key by key."""
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError:
        raise ArgumentError(f"Config file {path} does not exist")
    except (OSError, ValueError) as exc:
        raise ArgumentError(f"Config file {path} is not valid JSON: {exc}")
    if not isinstance(document, dict):
        raise ArgumentError(f"Config file {path} must contain a JSON object")
    logger.debug(f"Loaded config file {path}")
    return document


def parse_override(key: str, raw: Any) -> Any:
    """Convert a string-valued override (env var or CLI) to its typed value."""
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        if key in LIST_KEYS:
            return [LIST_KEYS[key](item) for item in raw.replace(';', ',').split(',') if item.strip()]
        if key in INT_KEYS:
            return int(raw)
    except ValueError:
        raise ArgumentError(f"Cannot parse {key}={raw!r}")
    return raw


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    overrides = {}
    for variable, key in settings.QNEE_ENV_OVERRIDES.items():
        if environ.get(variable):
            overrides[key] = parse_override(key, environ[variable])
    return overrides


def apply_overrides(document: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    document = copy.deepcopy(document)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in OVERRIDE_PATHS:
            raise ArgumentError(f"Unknown override {key!r}")
        for path in OVERRIDE_PATHS[key]:
            target = document
            for part in path[:-1]:
                target = target.setdefault(part, {})
            target[path[-1]] = parse_override(key, value)
    return document


def merged_document(config_path=None, cli: Optional[Mapping[str, Any]] = None,
                    environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    document = copy.deepcopy(settings.QNEE_DEFAULTS)
    if config_path:
        document = deep_merge(document, load_config_file(config_path))
    document = apply_overrides(document, env_overrides(environ))
    return apply_overrides(document, cli or {})


def build_sweep_config(config_path=None, cli: Optional[Mapping[str, Any]] = None,
                       environ: Optional[Mapping[str, str]] = None) -> SweepConfig:
    """Merge all configuration layers and validate the result."""
    from .serializers import SweepConfigSerializer

    serializer = SweepConfigSerializer(data=merged_document(config_path, cli, environ))
    if not serializer.is_valid():
        logger.error(f"Invalid configuration: {serializer.errors}")
        raise ArgumentError(f"Invalid configuration: {json.dumps(serializer.errors, default=str)}")
    return serializer.save()
