"""
Tests for experiments app.
"""
from io import StringIO
import json
import math

import numpy as np
import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from estimator.hybrid import QneeConfig, run_qnee
from estimator.training import TrainConfig
from experiments.config import (
    build_sweep_config,
    deep_merge,
    env_overrides,
    parse_override,
)
from experiments.exceptions import (
    EXIT_ESTIMATION,
    EXIT_INVARIANT,
    EXIT_USAGE,
    command_exception_handler,
)
from experiments.monitoring import track_cell
from experiments.oracle import assert_suite, run_suite
from experiments.serializers import EstimationRecordSerializer, QneeConfigSerializer, TrainConfigSerializer
from experiments.storage import RecordStore, join_values
from experiments.sweep import ExactState, build_cells, exact_tables, run_sweep
from quantum.exceptions import (
    ArgumentError,
    EstimationError,
    InvariantFailure,
    OutputError,
)
from quantum.states import DensityMatrix, renyi_exact, von_neumann_exact

SMALL_SWEEP = {
    'L': 4,
    'lambda_grid': [0.5, 3.0],
    'subsystems': [2],
    'method': 'qnee',
    'workers': 1,
    'qnee': {'noise_free': True, 'n_outer': 2, 'n_trials': 2, 'fd_scheme': 'central'},
    'vqse': {'noise_free': True, 'n_iter': 2, 'n_trials': 2, 't_update_period': 1},
}


@pytest.fixture
def sweep_file(tmp_path, output_dir):
    """Config file for a small noise-free sweep."""
    path = tmp_path / 'sweep.json'
    path.write_text(json.dumps({**SMALL_SWEEP, 'output_dir': str(output_dir)}))
    return path


def small_config(sweep_file, **cli):
    return build_sweep_config(sweep_file, cli, environ={})


class TestSweepConfig:
    """Test configuration layering and validation."""

    def test_defaults(self, output_dir):
        """Settings defaults give the standard L=8 sweep."""
        cfg = build_sweep_config(environ={})
        assert cfg.L == 8
        assert cfg.delta == pytest.approx(0.05)
        assert cfg.subsystems == (3, 4)
        assert cfg.n_layers(3) == 8 and cfg.n_layers(4) == 10
        assert 1.9 in cfg.lambda_grid

    def test_precedence(self, sweep_file):
        """CLI beats environment beats file beats defaults."""
        assert small_config(sweep_file).seed == 1234
        document = json.loads(sweep_file.read_text())
        sweep_file.write_text(json.dumps({**document, 'seed': 5}))
        assert small_config(sweep_file).seed == 5
        assert build_sweep_config(sweep_file, {}, environ={'QNEE_SEED': '6'}).seed == 6
        assert build_sweep_config(sweep_file, {'seed': 7}, environ={'QNEE_SEED': '6'}).seed == 7

    def test_environment_lists(self):
        """List-valued environment variables are comma separated."""
        overrides = env_overrides({'QNEE_LAMBDA_GRID': '1.5,2.5', 'QNEE_SUBSYSTEM': '3', 'QNEE_SHOTS': ''})
        assert overrides == {'lambda_grid': [1.5, 2.5], 'subsystems': [3]}

    def test_shared_overrides(self, sweep_file):
        """--trials and --shots reach both methods."""
        cfg = small_config(sweep_file, trials=4, shots=1000)
        assert cfg.qnee['n_trials'] == 4 and cfg.vqse['n_trials'] == 4
        assert cfg.qnee['n_shots'] == 1000 and cfg.vqse['n_shots'] == 1000

    def test_invalid_subsystem(self, sweep_file):
        """Subsystems must be smaller than the chain."""
        with pytest.raises(ArgumentError):
            small_config(sweep_file, subsystems='4')

    def test_odd_subsystem_needs_even_layers(self, tmp_path):
        """An odd subsystem with an odd layer count is a usage error."""
        path = tmp_path / 'odd.json'
        path.write_text(json.dumps({'subsystems': [3], 'layers_by_subsystem': {'3': 3}}))
        with pytest.raises(ArgumentError):
            build_sweep_config(path, environ={})

    def test_exact_method_allows_single_sites(self, sweep_file):
        """Exact tables need no circuit, so one-site blocks are allowed."""
        cfg = small_config(sweep_file, method='exact', subsystems='1,2')
        assert cfg.methods == ()
        assert cfg.subsystems == (1, 2)

    def test_missing_and_malformed_files(self, tmp_path):
        """Unreadable config files are usage errors."""
        with pytest.raises(ArgumentError):
            build_sweep_config(tmp_path / 'missing.json', environ={})
        bad = tmp_path / 'bad.json'
        bad.write_text('{not json')
        with pytest.raises(ArgumentError):
            build_sweep_config(bad, environ={})

    def test_parse_override(self):
        """String overrides are typed by key."""
        assert parse_override('subsystems', '3;4') == [3, 4]
        assert parse_override('seed', '12') == 12
        with pytest.raises(ArgumentError):
            parse_override('trials', 'many')

    def test_deep_merge(self):
        """Nested dicts merge key by key."""
        merged = deep_merge({'a': {'b': 1, 'c': 2}, 'd': 3}, {'a': {'b': 5}})
        assert merged == {'a': {'b': 5, 'c': 2}, 'd': 3}

    def test_derived_configs(self, sweep_file):
        """Per-cell configurations carry the cell seed and the layer count."""
        cfg = small_config(sweep_file)
        seed = cfg.cell_seed(0, 2, 'qnee')
        assert seed != cfg.cell_seed(0, 2, 'vqse')
        qnee = cfg.qnee_config(2, seed)
        assert isinstance(qnee, QneeConfig)
        assert qnee.n_layers == 2 and qnee.workers == 1 and qnee.noise_free
        assert qnee.nn_initial.seed == seed
        assert cfg.vqse_config(2, seed).ell == 2

    def test_warm_start_reaches_qnee_config(self, tmp_path, output_dir):
        """A snapshot path in the file ends up in every per-cell QneeConfig."""
        path = tmp_path / 'warm.json'
        qnee = {**SMALL_SWEEP['qnee'], 'noise_free': False, 'warm_start': 'runs/networks/a.qnw'}
        path.write_text(json.dumps({**SMALL_SWEEP, 'qnee': qnee, 'output_dir': str(output_dir)}))
        cfg = build_sweep_config(path, {}, environ={})
        assert cfg.qnee_config(2, cfg.cell_seed(0, 2, 'qnee')).warm_start == 'runs/networks/a.qnw'


class TestSerializers:
    """Test serializers."""

    def test_alpha_one_rejected(self):
        """Order 1 must be written as null."""
        data = {'learning_rate': 1e-3, 'weight_decay': 0.0, 'n_iter': 10, 'alpha': 1.0}
        serializer = TrainConfigSerializer(data=data)
        assert not serializer.is_valid()
        assert 'alpha' in serializer.errors

    def test_train_config_created(self):
        """Valid data builds a TrainConfig."""
        serializer = TrainConfigSerializer(data={'learning_rate': 1e-3, 'weight_decay': 0.0, 'n_iter': 10})
        assert serializer.is_valid(), serializer.errors
        assert serializer.save().n_iter == 10

    def test_qnee_config_created(self):
        """Valid outer-loop data plus context builds a QneeConfig."""
        data = {'eta_q': 0.02, 'fd_step': 0.01, 'n_outer': 3, 'n_shots': 100, 'n_trials': 1}
        serializer = QneeConfigSerializer(data=data, context={'n_layers': 2, 'seed': 9, 'workers': 1})
        assert serializer.is_valid(), serializer.errors
        cfg = serializer.save()
        assert isinstance(cfg, QneeConfig)
        assert (cfg.n_layers, cfg.seed, cfg.eta_q, cfg.warm_start) == (2, 9, 0.02, None)

    def test_warm_start_needs_training(self):
        """A snapshot path makes no sense in noise-free mode."""
        data = {'eta_q': 0.01, 'fd_step': 0.01, 'n_outer': 1, 'n_shots': 100, 'n_trials': 1,
                'noise_free': True, 'warm_start': 'net.qnw'}
        serializer = QneeConfigSerializer(data=data, context={'n_layers': 2})
        assert not serializer.is_valid()

    def test_estimation_record(self, random_rho):
        """Records serialize with eigenstrings, angles and trials."""
        cfg = QneeConfig(n_layers=2, n_outer=1, noise_free=True, n_trials=2)
        data = EstimationRecordSerializer(run_qnee(random_rho(2), cfg)).data
        assert data['method'] == 'qnee'
        assert len(data['eigenvalues']) == 4
        assert all(len(s) == 2 for s in data['eigenstrings'])
        assert len(data['best_angles']) == 8
        assert [trial['status'] for trial in data['trials']] == ['ok', 'ok']
        json.dumps(data)


class TestRecordStore:
    """Test result files."""

    def test_csv_round_trip(self, tmp_path):
        """Parsed values equal the emitted ones."""
        store = RecordStore(tmp_path)
        rows = [{'method': 'qnee', 'lambda': 0.1, 'subsystem': 3, 'trial': 0, 'status': 'ok',
                 'estimate': 1 / 3, 'exact_entropy': math.pi, 'abs_error': None, 'best_cost': 2.5e-17}]
        store.write_csv('records', rows)
        parsed = store.read_csv('records')[0]
        assert float(parsed['estimate']) == 1 / 3
        assert float(parsed['exact_entropy']) == math.pi
        assert float(parsed['best_cost']) == 2.5e-17
        assert parsed['abs_error'] == ''

    def test_unknown_table(self, tmp_path):
        """Only documented tables can be written."""
        with pytest.raises(OutputError):
            RecordStore(tmp_path).write_csv('plots', [])

    def test_json_and_arrays(self, tmp_path):
        """JSON documents and arrays read back unchanged."""
        store = RecordStore(tmp_path)
        store.write_json('nested/doc.json', {'b': 1, 'a': [1.5]})
        assert store.read_json('nested/doc.json') == {'a': [1.5], 'b': 1}
        matrix = np.eye(2, dtype=complex) / 2
        store.write_array('rho/x.npy', matrix)
        assert np.array_equal(store.read_array('rho/x.npy'), matrix)

    def test_missing_file(self, tmp_path):
        """Reading a missing table raises OutputError with the path."""
        with pytest.raises(OutputError):
            RecordStore(tmp_path).read_csv('records')

    def test_join_values(self):
        """Spectra are written as semicolon-joined floats."""
        assert join_values([0.5, 0.25]) == '0.5;0.25'


class TestExactTables:
    """Test the exact ground-state tables."""

    def test_polarized_row(self, sweep_file):
        """One field and one subsystem give one row; lambda=3 has zero entropy."""
        cfg = small_config(sweep_file, lambda_grid='3.0', method='exact')
        rows, scaling, states = exact_tables(cfg)
        assert len(rows) == 1
        assert rows[0]['exact_entropy'] == pytest.approx(0.0, abs=1e-6)
        assert len(scaling) == 1
        assert set(states) == {(0, 2)}


class TestSweep:
    """Test estimation sweeps."""

    def test_cells(self, sweep_file):
        """Both methods produce the same number of cells."""
        cells = build_cells(small_config(sweep_file, method='both'))
        methods = [cell.method for cell in cells]
        assert methods.count('qnee') == methods.count('vqse') == 4

    def test_outputs_and_aggregates(self, sweep_file, output_dir):
        """Every table is written; the aggregate min is the minimum trial estimate."""
        sweep = run_sweep(small_config(sweep_file, method='both'))
        assert not sweep.failed
        store = RecordStore(output_dir)
        for table in ('ground_state', 'scaling', 'records', 'aggregate', 'error_scatter',
                      'history', 'eigenvalues', 'timing'):
            assert store.path(f'{table}.csv').exists()
        records = store.read_csv('records')
        for row in store.read_csv('aggregate'):
            estimates = [
                float(r['estimate']) for r in records
                if (r['method'], r['lambda'], r['subsystem']) == (row['method'], row['lambda'], row['subsystem'])
            ]
            assert float(row['min']) == min(estimates)
            assert float(row['min']) <= float(row['mean'])
        assert {r['method'] for r in records} == {'qnee', 'vqse'}
        assert store.read_json('summary.json')['failed'] == []
        assert store.path('records/qnee_lam00_n2_t0.json').exists()
        assert store.path('rho/lam01_n2.npy').exists()
        assert not store.path('networks').exists()

    def test_noise_free_records_bound_entropy(self, sweep_file):
        """Noise-free QNEE estimates never fall below the exact entropy."""
        sweep = run_sweep(small_config(sweep_file))
        for result in sweep.cells:
            assert result.record.estimate >= result.record.exact_entropy - 1e-6

    def test_deterministic(self, sweep_file, tmp_path):
        """Identical seeds give byte-identical tables."""
        cfg = small_config(sweep_file, method='both')
        first, second = RecordStore(tmp_path / 'a'), RecordStore(tmp_path / 'b')
        run_sweep(cfg, first)
        run_sweep(cfg, second)
        for table in ('ground_state', 'scaling', 'records', 'aggregate', 'history', 'eigenvalues'):
            assert first.path(f'{table}.csv').read_bytes() == second.path(f'{table}.csv').read_bytes()

    def test_failed_cells_are_recorded(self, sweep_file, output_dir, monkeypatch):
        """A failing cell is recorded and the sweep continues."""

        def fail(*args, **kwargs):
            raise EstimationError("All 1 trials diverged")

        monkeypatch.setattr('experiments.sweep.run_qnee', fail)
        sweep = run_sweep(small_config(sweep_file, method='both'))
        assert len(sweep.failed) == 4
        statuses = [row['status'] for row in RecordStore(output_dir).read_csv('records')]
        assert statuses.count('failed') == 4 and statuses.count('ok') == 4

    def test_renyi_reference(self):
        """A Renyi estimate is compared against the exact entropy of the same order."""
        rho = DensityMatrix.from_diagonal([0.7, 0.2, 0.1, 0.0])
        state = ExactState(rho, von_neumann_exact(rho), np.array([0.7, 0.2, 0.1, 0.0]))
        assert state.reference() == state.entropy
        assert state.reference(2.0) == pytest.approx(-math.log(0.54), abs=1e-12)
        renyi = TrainConfig(alpha=2.0)
        cfg = QneeConfig(n_layers=2, n_outer=0, noise_free=True, n_trials=1, init='identity',
                         nn_initial=renyi, nn_step=renyi)
        record = run_qnee(rho, cfg, state.reference(2.0))
        assert record.absolute_error == pytest.approx(0.0, abs=1e-9)

    def test_renyi_sweep(self, tmp_path, output_dir):
        """Renyi sweeps report S_alpha for QNEE cells and S for VQSE cells."""
        path = tmp_path / 'renyi.json'
        path.write_text(json.dumps({
            **SMALL_SWEEP,
            'method': 'both',
            'nn_initial': {'alpha': 2.0},
            'nn_step': {'alpha': 2.0},
            'output_dir': str(output_dir),
        }))
        cfg = build_sweep_config(path, {}, environ={})
        _, _, states = exact_tables(cfg)
        sweep = run_sweep(cfg)
        assert not sweep.failed

        def expected(method, li, n):
            state = states[(li, n)]
            return renyi_exact(state.rho, 2.0) if method == 'qnee' else state.entropy

        for result in sweep.cells:
            cell, record = result.cell, result.record
            exact = expected(cell.method, cell.lambda_index, cell.subsystem)
            assert record.exact_entropy == pytest.approx(exact, abs=1e-12)
            if cell.method == 'qnee':
                assert record.estimate >= exact - 1e-9
                assert record.absolute_error == pytest.approx(record.estimate - exact, abs=1e-12)
        for row in sweep.aggregates:
            li = cfg.lambda_grid.index(row['lambda'])
            assert row['exact_entropy'] == pytest.approx(expected(row['method'], li, row['subsystem']), abs=1e-12)


PHASE_SWEEP = {
    'L': 8,
    'lambda_grid': [0.5, 1.0, 1.5, 2.5, 3.0],
    'subsystems': [3],
    'method': 'qnee',
    'workers': 1,
    'qnee': {'noise_free': True, 'n_outer': 0, 'n_trials': 1, 'init': 'identity'},
}


class TestPhaseSeparation:
    """Estimates at the identity circuit on L=8 three-site blocks."""

    @pytest.fixture
    def sweep(self, tmp_path, output_dir):
        path = tmp_path / 'phase.json'
        path.write_text(json.dumps({**PHASE_SWEEP, 'output_dir': str(output_dir)}))
        return run_sweep(build_sweep_config(path, {}, environ={}))

    def test_phases_are_separated(self, sweep):
        """Estimates at lambda=1.5 and 2.5 differ by more than 0.3, in the direction of the exact values."""
        by_field = {result.cell.lam: result.record for result in sweep.cells}
        gap = by_field[1.5].estimate - by_field[2.5].estimate
        exact_gap = by_field[1.5].exact_entropy - by_field[2.5].exact_entropy
        assert abs(gap) > 0.3
        assert np.sign(gap) == np.sign(exact_gap)

    def test_error_grows_with_entropy(self, sweep):
        """The absolute error is positively rank-correlated with the exact entropy."""
        assert not sweep.failed
        assert sweep.correlations['qnee'] is not None
        assert sweep.correlations['qnee'] > 0.0


class TestOracleSuite:
    """Test the invariant suite."""

    def test_all_checks_pass(self):
        """A correct implementation passes every check."""
        results = run_suite(instances=20, seed=3)
        assert len(results) == 9
        assert all(result.passed for result in results), [r.line() for r in results if not r.passed]
        assert all(result.count > 0 for result in results)
        assert_suite(results)

    def test_mutation_is_caught(self):
        """A sign error in the normalization term breaks the bound checks."""
        results = {result.name: result for result in run_suite(instances=20, seed=3, mutate=True)}
        assert not results['gibbs_bound'].passed
        assert not results['linearized_bound'].passed
        assert not results['donsker_varadhan'].passed
        with pytest.raises(InvariantFailure) as excinfo:
            assert_suite(list(results.values()))
        assert 'gibbs_bound' in excinfo.value.failed
        assert 'linearized_bound' in excinfo.value.failed

    def test_gibbs_bound_holds_with_correct_cost(self):
        """The unmutated cost sits above the Gibbs side on Haar-rotated operators."""
        results = run_suite(instances=30, seed=8, names=['gibbs_bound'])
        assert results[0].passed
        assert results[0].measured >= -1e-9

    def test_named_checks(self):
        """Checks can be selected by name."""
        results = run_suite(instances=5, names=['majorization'])
        assert [result.name for result in results] == ['majorization']

    def test_instances_must_be_positive(self):
        """An empty suite is a usage error."""
        with pytest.raises(ArgumentError):
            run_suite(instances=0)


class TestExceptionHandler:
    """Test exit-code mapping."""

    def test_mapping(self):
        """Usage, invariant and estimation errors get their exit codes."""
        context = {'command': 'estimate'}
        assert command_exception_handler(ArgumentError('x'), context).returncode == EXIT_USAGE
        assert command_exception_handler(ValidationError('x'), context).returncode == EXIT_USAGE
        assert command_exception_handler(InvariantFailure('x'), context).returncode == EXIT_INVARIANT
        assert command_exception_handler(EstimationError('x'), context).returncode == EXIT_ESTIMATION
        assert command_exception_handler(RuntimeError('x'), context).returncode == EXIT_ESTIMATION

    def test_command_error_passes_through(self):
        """Existing CommandErrors keep their code."""
        error = CommandError('x', returncode=EXIT_INVARIANT)
        assert command_exception_handler(error, {}) is error


class TestMonitoring:
    """Test per-cell run logging."""

    def test_status(self):
        """Cells end ok, failed or error."""
        with track_cell('ok cell') as tracker:
            pass
        assert tracker.status == 'ok'
        with track_cell('failed cell') as tracker:
            tracker.fail('diverged')
        assert tracker.status == 'failed'
        with pytest.raises(RuntimeError):
            with track_cell('broken cell') as tracker:
                raise RuntimeError('boom')
        assert tracker.status == 'error'
        assert tracker.duration >= 0.0


class TestCommands:
    """Test the management commands."""

    def test_ground_state(self, output_dir):
        """Writes one row per field and subsystem."""
        out = StringIO()
        call_command('ground_state', '--lambda-grid', '3.0', '--subsystem', '3', '--out', str(output_dir), stdout=out)
        rows = RecordStore(output_dir).read_csv('ground_state')
        assert len(rows) == 1
        assert float(rows[0]['exact_entropy']) == pytest.approx(0.0, abs=1e-6)
        assert (output_dir / rows[0]['rho_file']).exists()
        assert 'lambda=3 n=3' in out.getvalue()

    def test_ground_state_rerun_is_identical(self, tmp_path):
        """Reruns produce byte-identical CSV files."""
        for name in ('a', 'b'):
            call_command('ground_state', '--lambda-grid', '1.5,3.0', '--subsystem', '2',
                         '--out', str(tmp_path / name), stdout=StringIO())
        for table in ('ground_state.csv', 'scaling.csv'):
            assert (tmp_path / 'a' / table).read_bytes() == (tmp_path / 'b' / table).read_bytes()

    def test_estimate(self, sweep_file, output_dir):
        """A small sweep succeeds and prints aggregates."""
        out = StringIO()
        call_command('estimate', '--config', str(sweep_file), '--method', 'both', stdout=out)
        assert 'qnee lambda=0.5 n=2' in out.getvalue()
        assert RecordStore(output_dir).path('aggregate.csv').exists()

    def test_estimate_with_failed_cells(self, sweep_file, output_dir, monkeypatch):
        """Failed cells give exit code 3 after the tables are written."""

        def fail(*args, **kwargs):
            raise EstimationError("All 1 trials diverged")

        monkeypatch.setattr('experiments.sweep.run_qnee', fail)
        with pytest.raises(CommandError) as excinfo:
            call_command('estimate', '--config', str(sweep_file), stdout=StringIO())
        assert excinfo.value.returncode == EXIT_ESTIMATION
        assert RecordStore(output_dir).path('records.csv').exists()

    def test_bad_arguments(self, sweep_file):
        """Malformed flags and invalid configurations exit with code 1."""
        with pytest.raises(CommandError) as excinfo:
            call_command('estimate', '--trials', 'many', stdout=StringIO())
        assert excinfo.value.returncode == EXIT_USAGE
        with pytest.raises(CommandError) as excinfo:
            call_command('estimate', '--config', str(sweep_file), '--subsystem', '9', stdout=StringIO())
        assert excinfo.value.returncode == EXIT_USAGE

    def test_oracle_check(self, output_dir):
        """The suite passes and reports its counts."""
        out = StringIO()
        call_command('oracle_check', '--instances', '10', '--out', str(output_dir), stdout=out)
        assert 'PASS gibbs_bound' in out.getvalue()
        assert '9/9 checks passed' in out.getvalue()
        assert len(RecordStore(output_dir).read_csv('oracle')) == 9

    def test_oracle_check_mutation(self, output_dir):
        """Mutation mode fails with the invariant exit code."""
        out = StringIO()
        with pytest.raises(CommandError) as excinfo:
            call_command('oracle_check', '--instances', '10', '--mutate', '--out', str(output_dir), stdout=out)
        assert excinfo.value.returncode == EXIT_INVARIANT
        assert 'FAIL linearized_bound' in out.getvalue()
