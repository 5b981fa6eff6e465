"""
Tests for estimator app.
"""
import math

import numpy as np
import pytest
import torch

from estimator import checkpoint
from estimator.costs import (
    analytic_cost,
    cost_dv,
    cost_renyi,
    cost_to_entropy,
    cost_vn,
    invert_cost_renyi,
    minibatch_objective,
    objective,
    saturated_renyi_cost,
)
from estimator.hybrid import (
    QneeConfig,
    derive_seed,
    evaluate_cnn,
    extract_eigen,
    fd_gradient,
    initial_network,
    run_qnee,
)
from estimator.network import EntropyNet, build_network
from estimator.parallel import pool_starmap, worker_pool
from estimator.training import TrainConfig, cost_gradients, minibatch_gradients, train
from quantum.circuit import identity_parameters, outcome_distribution, random_parameters
from quantum.exceptions import (
    ArgumentError,
    EstimateRangeError,
    EstimationError,
    OutputError,
    TrainingError,
)
from quantum.sampling import ShotSet, sample_shots
from quantum.states import (
    DensityMatrix,
    StateVector,
    eig_hermitian,
    renyi_exact,
    shannon_entropy,
    von_neumann_exact,
)

LN4 = math.log(4.0)


def small_net(n_qubits=2, seed=3):
    return build_network(n_qubits, embed_dim=16, hidden_width=64, seed=seed)


class TestCosts:
    """Test the variational cost functions."""

    def test_von_neumann_saturation(self, random_rho):
        """cost_vn at h = ln(lambda) with exact weights equals S."""
        rho = random_rho(3)
        spectrum = eig_hermitian(rho).eigenvalues
        assert cost_vn(np.log(spectrum), spectrum) == pytest.approx(von_neumann_exact(rho), abs=1e-9)

    def test_zero_table(self):
        """h = 0 gives 2^n - 1 for von Neumann and (2^n - 1)/alpha for Renyi."""
        p = np.full(4, 0.25)
        assert cost_vn(np.zeros(4), p) == pytest.approx(3.0)
        assert cost_renyi(np.zeros(4), p, 2.0) == pytest.approx(1.5)

    def test_renyi_saturation(self):
        """I/4 at alpha=2 saturates at (e^{-ln 4} - 1)/(2 (1 - 2)) = 0.375."""
        p = np.full(4, 0.25)
        assert cost_renyi(np.log(p), p, 2.0) == pytest.approx(0.375, abs=1e-12)
        assert saturated_renyi_cost(LN4, 2.0) == pytest.approx(0.375, abs=1e-12)

    def test_renyi_round_trip(self, random_rho):
        """Inverting the saturated Renyi cost recovers S_alpha."""
        rho = random_rho(2)
        spectrum = eig_hermitian(rho).eigenvalues
        for alpha in (0.5, 2.0, 3.0):
            c_alpha = cost_renyi(np.log(spectrum), spectrum, alpha)
            assert invert_cost_renyi(c_alpha, alpha) == pytest.approx(renyi_exact(rho, alpha), abs=1e-9)

    def test_renyi_approaches_von_neumann(self, rng):
        """alpha = 1 +- 1e-4 agrees with the von Neumann cost near saturation."""
        p = rng.dirichlet(np.ones(4))
        h = np.log(p) + rng.normal(scale=0.05, size=4)
        for alpha in (1.0 - 1e-4, 1.0 + 1e-4):
            assert cost_renyi(h, p, alpha) == pytest.approx(cost_vn(h, p), abs=1e-3)

    def test_invalid_inverse(self):
        """A cost with no valid logarithm raises EstimateRangeError."""
        with pytest.raises(EstimateRangeError):
            invert_cost_renyi(0.6, 2.0)
        with pytest.raises(ArgumentError):
            cost_renyi(np.zeros(4), np.full(4, 0.25), 1.0)

    def test_bounds_chain(self, rng):
        """cost_vn >= cost_dv >= H(P) for arbitrary h."""
        p = rng.dirichlet(np.ones(8))
        for _ in range(20):
            h = rng.normal(scale=2.0, size=8)
            assert cost_vn(h, p) >= cost_dv(h, p) - 1e-12
            assert cost_dv(h, p) >= shannon_entropy(p) - 1e-12

    def test_shot_set_weights(self):
        """A ShotSet is read as its frequencies."""
        shots = ShotSet.from_counts([30, 10, 0, 0])
        h = np.array([0.1, -0.2, -3.0, -3.0])
        assert cost_vn(h, shots) == pytest.approx(cost_vn(h, np.array([0.75, 0.25, 0, 0])))

    def test_length_mismatch(self):
        """Weights and h must cover the same strings."""
        with pytest.raises(ArgumentError):
            cost_vn(np.zeros(4), np.full(8, 0.125))
        with pytest.raises(ArgumentError):
            cost_vn(np.zeros(3), np.full(3, 1 / 3))

    def test_analytic_cost(self):
        """The inner minimum is H(P) (or its saturated Renyi cost)."""
        p = np.full(4, 0.25)
        assert analytic_cost(p) == pytest.approx(LN4)
        assert cost_to_entropy(analytic_cost(p, 2.0), 2.0) == pytest.approx(LN4)

    def test_torch_objective_matches(self, rng):
        """The differentiable objective equals the numpy cost."""
        p = rng.dirichlet(np.ones(4))
        h = rng.normal(size=4)
        h_t, p_t = torch.from_numpy(h), torch.from_numpy(p)
        assert float(objective(h_t, p_t)) == pytest.approx(cost_vn(h, p), abs=1e-12)
        assert float(objective(h_t, p_t, 2.0)) == pytest.approx(cost_renyi(h, p, 2.0), abs=1e-12)

    def test_full_minibatch_matches(self):
        """A minibatch of every shot equals the full-batch objective."""
        shots = ShotSet.from_counts([5, 2, 1, 0])
        h = torch.tensor([0.3, -0.1, -1.0, -2.0], dtype=torch.float64)
        batch = torch.from_numpy(shots.expand())
        weights = torch.from_numpy(shots.frequencies())
        assert float(minibatch_objective(h, batch)) == pytest.approx(float(objective(h, weights)), abs=1e-12)


class TestEntropyNet:
    """Test the entropy network."""

    def test_shapes(self):
        """One output per basis string."""
        net = small_net(3)
        assert net.all_outputs().shape == (8,)
        assert net.h_table().shape == (8,)

    def test_seeded_initialization(self):
        """Same seed, same weights; different seed, different weights."""
        assert np.array_equal(small_net(seed=1).h_table(), small_net(seed=1).h_table())
        assert not np.array_equal(small_net(seed=1).h_table(), small_net(seed=2).h_table())

    def test_float64(self):
        """All parameters are float64."""
        assert all(p.dtype == torch.float64 for p in small_net().parameters())

    def test_snapshot_round_trip(self):
        """Loading a snapshot restores the outputs."""
        net = small_net(seed=1)
        other = small_net(seed=2)
        other.load_snapshot(net.snapshot())
        assert np.array_equal(other.h_table(), net.h_table())

    def test_clone_is_independent(self):
        """Changing a clone leaves the original untouched."""
        net = small_net()
        before = net.h_table()
        clone = net.clone()
        with torch.no_grad():
            clone.head.bias.add_(1.0)
        assert np.array_equal(net.h_table(), before)
        assert np.allclose(clone.h_table(), before + 1.0)

    def test_zero_head_gives_zero_output(self):
        """With a zeroed head and bias, h(s) = 0 for every string."""
        from quantum.circuit import all_bitstrings

        net = small_net(2)
        with torch.no_grad():
            net.head.weight.zero_()
            net.head.bias.zero_()
        assert all(net.h(s) == 0.0 for s in all_bitstrings(2))
        assert np.array_equal(net.h_table(), np.zeros(4))

    def test_h_matches_table(self):
        """h(s) is the table entry at the index of s."""
        from quantum.circuit import all_bitstrings

        net = small_net(3)
        table = net.h_table()
        for s in all_bitstrings(3):
            assert net.h(s) == pytest.approx(table[s.index], abs=1e-12)

    def test_wrong_string_length(self):
        """h(s) checks the string length."""
        from quantum.circuit import BitString

        with pytest.raises(ArgumentError):
            small_net(2).h(BitString.from_label('011'))


class TestCheckpoint:
    """Test weight snapshot files."""

    def test_round_trip(self, tmp_path):
        """Saved snapshots load back bit-exact."""
        weights = small_net().snapshot()
        path = checkpoint.save(weights, tmp_path / 'net.qw')
        loaded = checkpoint.load(path)
        assert loaded.keys() == weights.keys()
        for name in weights:
            assert np.array_equal(loaded[name], weights[name])

    def test_bad_magic(self):
        """Foreign files are rejected."""
        with pytest.raises(OutputError):
            checkpoint.loads(b'NOTQNEE')

    def test_truncated(self):
        """Truncated payloads are rejected."""
        payload = checkpoint.dumps({'w': np.arange(6.0).reshape(2, 3)})
        with pytest.raises(OutputError):
            checkpoint.loads(payload[:-8])

    def test_missing_file(self, tmp_path):
        """Missing files raise OutputError with the path."""
        with pytest.raises(OutputError) as excinfo:
            checkpoint.load(tmp_path / 'missing.qw')
        assert 'missing.qw' in str(excinfo.value)


class TestTraining:
    """Test network training."""

    def test_pure_state(self, fast_train_config):
        """rho_V = diag(1, 0, 0, 0) with exact weights trains to C_NN <= 0.05."""
        p = np.array([1.0, 0.0, 0.0, 0.0])
        result = train(small_net(), p, p, fast_train_config)
        assert result.c_nn <= 0.05
        assert result.c_nn >= -1e-9

    def test_maximally_mixed(self, fast_train_config):
        """I/4 with exact weights trains to within 0.05 of 2 ln 2."""
        p = np.full(4, 0.25)
        result = train(small_net(), p, p, fast_train_config)
        assert result.c_nn == pytest.approx(LN4, abs=0.05)
        assert result.entropy == result.c_nn

    def test_renyi_mode(self, fast_train_config):
        """Renyi training on I/4 recovers S_2 and a von Neumann companion."""
        p = np.full(4, 0.25)
        cfg = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=2000, seed=7, alpha=2.0)
        result = train(small_net(), p, p, cfg)
        assert result.entropy == pytest.approx(LN4, abs=0.05)
        assert result.vn_companion == pytest.approx(LN4, abs=0.05)

    def test_history_and_best_weights(self, fast_train_config):
        """Test cost is recorded at 0, every period and the end; the net keeps the best weights."""
        p = np.array([0.7, 0.2, 0.1, 0.0])
        cfg = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=25, test_eval_period=10, seed=1)
        net = small_net()
        result = train(net, p, p, cfg)
        assert [point.iteration for point in result.history] == [0, 10, 20, 25]
        assert result.c_nn == min(point.c_test for point in result.history)
        assert cost_vn(net.h_table(), p) == pytest.approx(result.c_nn, abs=1e-12)

    def test_minibatch_needs_shots(self):
        """Minibatches are drawn from sampled shots only."""
        p = np.full(4, 0.25)
        cfg = TrainConfig(n_iter=5, batch_size=8)
        with pytest.raises(ArgumentError):
            train(small_net(), p, p, cfg)

    def test_minibatch_training(self):
        """Minibatch training on sampled shots is reproducible."""
        shots = sample_shots([0.6, 0.3, 0.1, 0.0], 500, seed=2)
        cfg = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=50, batch_size=64, seed=4)
        first = train(small_net(), shots, shots, cfg)
        second = train(small_net(), shots, shots, cfg)
        assert first.c_nn == second.c_nn

    def test_invalid_config(self):
        """Non-positive learning rate and iteration counts are rejected."""
        with pytest.raises(ArgumentError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ArgumentError):
            TrainConfig(n_iter=0)

    def test_gradients_match_finite_differences(self, rng):
        """Backpropagation agrees with central differences on a width-8 net."""
        net = EntropyNet(2, embed_dim=4, hidden_width=8, seed=5)
        p = rng.dirichlet(np.ones(4))
        grads = cost_gradients(net, p)
        weight = net.head.weight.data.view(-1)
        step = 1e-6
        for index in range(weight.numel()):
            original = float(weight[index])
            weight[index] = original + step
            up = cost_vn(net.h_table(), p)
            weight[index] = original - step
            down = cost_vn(net.h_table(), p)
            weight[index] = original
            numeric = (up - down) / (2 * step)
            assert grads['head.weight'].reshape(-1)[index] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_minibatch_gradients(self):
        """A full minibatch has the full-batch gradient."""
        net = small_net()
        shots = ShotSet.from_counts([3, 1, 0, 0])
        full = cost_gradients(net, shots)
        batch = minibatch_gradients(net, shots.expand())
        for name in full:
            assert np.allclose(full[name], batch[name], atol=1e-12)

    def test_epoch_of_minibatches_averages_to_full_gradient(self, rng):
        """Equal-size batches covering every shot once average to the full-batch gradient."""
        net = small_net()
        shots = ShotSet.from_counts([5, 2, 1, 0])
        order = rng.permutation(shots.expand())
        batches = np.split(order, 4)
        full = cost_gradients(net, shots)
        per_batch = [minibatch_gradients(net, batch) for batch in batches]
        for name in full:
            average = np.mean([gradients[name] for gradients in per_batch], axis=0)
            assert np.allclose(average, full[name], atol=1e-12)


class TestHybridLoop:
    """Test the outer QNEE loop."""

    def test_noise_free_upper_bound(self, rng):
        """Every noise-free cost is at least the exact entropy."""
        from quantum.states import random_density_matrix

        for index in range(20):
            n = 2 + index % 2
            rho = random_density_matrix(n, seed=rng)
            cfg = QneeConfig(n_layers=2, n_outer=3, noise_free=True, n_trials=1, seed=index)
            record = run_qnee(rho, cfg)
            exact = von_neumann_exact(rho)
            for point in record.trials[0].history:
                assert point.c_nn >= exact - 1e-6
            assert record.estimate >= exact - 1e-6

    def test_noise_free_gradient(self, random_rho):
        """The noise-free gradient equals central differences of H(P_V)."""
        rho = random_rho(2)
        params = random_parameters(2, 2, seed=8)
        cfg = QneeConfig(n_layers=2, fd_step=1e-4, fd_scheme='central', noise_free=True, n_trials=1)
        gradient = fd_gradient(rho, params, None, cfg)
        for i in range(params.size):
            up = shannon_entropy(outcome_distribution(rho, params.perturbed(i, 1e-4)))
            down = shannon_entropy(outcome_distribution(rho, params.perturbed(i, -1e-4)))
            assert gradient[i] == pytest.approx((up - down) / 2e-4, abs=1e-3)

    def test_noise_free_steps_descend(self, random_rho):
        """Small noise-free steps lower H(P_V)."""
        rho = random_rho(2)
        cfg = QneeConfig(n_layers=2, eta_q=0.05, fd_step=1e-5, fd_scheme='central', n_outer=20,
                         noise_free=True, n_trials=1, seed=3)
        history = run_qnee(rho, cfg).trials[0].history
        assert history[-1].c_nn <= history[0].c_nn + 1e-9

    def test_identity_start_on_diagonal_state(self, diag_rho):
        """A diagonal state at the identity circuit gives S and its eigenpairs directly."""
        cfg = QneeConfig(n_layers=2, n_outer=0, noise_free=True, n_trials=1, init='identity')
        record = run_qnee(diag_rho, cfg)
        assert record.estimate == pytest.approx(0.3250829733914482, abs=1e-9)
        pairs = extract_eigen(record, 2)
        assert [value for value, _ in pairs] == pytest.approx([0.9, 0.1], abs=1e-9)
        for (_, vector), index in zip(pairs, (0, 1)):
            assert abs(vector.overlap(StateVector.basis(2, index))) ** 2 > 0.99

    def test_history_stages(self, noise_free_config, random_rho):
        """initial, one step row per outer iteration, final."""
        record = run_qnee(random_rho(2), noise_free_config)
        stages = [point.stage for point in record.trials[0].history]
        assert stages == ['initial'] + ['step'] * noise_free_config.n_outer + ['final']
        assert record.absolute_error >= 0.0

    def test_extract_eigen_bounds(self, noise_free_config, random_rho):
        """k must be between 1 and 2^n."""
        record = run_qnee(random_rho(2), noise_free_config)
        with pytest.raises(ArgumentError):
            extract_eigen(record, 0)
        with pytest.raises(ArgumentError):
            extract_eigen(record, 5)
        values = [value for value, _ in extract_eigen(record, 4)]
        assert values == sorted(values, reverse=True)

    def test_trial_subset_matches_full_run(self, random_rho):
        """Running one trial on its own reproduces it exactly."""
        rho = random_rho(2)
        cfg = QneeConfig(n_layers=2, n_outer=2, noise_free=True, n_trials=2, seed=21)
        full = run_qnee(rho, cfg)
        single = run_qnee(rho, cfg, trial_ids=[1])
        assert single.trials[0].best_cost == full.trials[1].best_cost

    def test_exact_weights_diagonal(self, diag_rho):
        """Exact-weight training at the identity circuit recovers the leading eigenvalues."""
        nn_cfg = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=2000)
        cfg = QneeConfig(n_layers=2, n_outer=0, exact_weights=True, n_trials=1, init='identity',
                         nn_initial=nn_cfg, nn_step=nn_cfg, embed_dim=16, hidden_width=64)
        record = run_qnee(diag_rho, cfg)
        assert record.estimate == pytest.approx(0.3250829733914482, abs=0.05)
        assert [value for value, _ in extract_eigen(record, 2)] == pytest.approx([0.9, 0.1], abs=0.03)
        weights = record.trials[0].best_weights
        assert weights.keys() == build_network(2, 16, 64).snapshot().keys()

    def test_trained_eigenvectors_overlap(self, diag_rho):
        """Training on sampled shots at the diagonalizing circuit recovers the leading eigenpairs."""
        initial = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=2000)
        step = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=300)
        cfg = QneeConfig(n_layers=2, n_outer=0, n_shots=30000, n_trials=1, init='identity', seed=5,
                         nn_initial=initial, nn_step=step, embed_dim=16, hidden_width=64)
        record = run_qnee(diag_rho, cfg)
        pairs = extract_eigen(record, 2)
        assert [value for value, _ in pairs] == pytest.approx([0.9, 0.1], abs=0.03)
        spectrum = eig_hermitian(diag_rho)
        for index, (_, vector) in enumerate(pairs):
            assert abs(vector.overlap(spectrum.vector(index))) ** 2 > 0.99

    def test_warm_start_restores_snapshot(self, tmp_path):
        """A trial network can start from saved weights."""
        source = build_network(2, 16, 64, seed=99)
        path = checkpoint.save(source.snapshot(), tmp_path / 'net.qnw')
        cfg = QneeConfig(n_layers=2, embed_dim=16, hidden_width=64, warm_start=str(path))
        fresh = initial_network(2, QneeConfig(n_layers=2, embed_dim=16, hidden_width=64), trial=0)
        restored = initial_network(2, cfg, trial=0)
        assert np.array_equal(restored.h_table(), source.h_table())
        assert not np.array_equal(fresh.h_table(), source.h_table())

    def test_warm_start_layout_mismatch(self, tmp_path):
        """Weights of a differently shaped network are rejected."""
        path = checkpoint.save(build_network(3, 16, 64, seed=1).snapshot(), tmp_path / 'net.qnw')
        cfg = QneeConfig(n_layers=2, embed_dim=16, hidden_width=64, warm_start=str(path))
        with pytest.raises(ArgumentError):
            initial_network(2, cfg, trial=0)

    def test_warm_started_run(self, tmp_path, diag_rho):
        """run_qnee trains from the snapshot when one is configured."""
        path = checkpoint.save(build_network(2, 16, 64, seed=4).snapshot(), tmp_path / 'net.qnw')
        nn_cfg = TrainConfig(learning_rate=1e-2, weight_decay=0.0, n_iter=20)
        cfg = QneeConfig(n_layers=2, n_outer=0, exact_weights=True, n_trials=1, init='identity',
                         nn_initial=nn_cfg, nn_step=nn_cfg, embed_dim=16, hidden_width=64, warm_start=str(path))
        record = run_qnee(diag_rho, cfg)
        assert not record.trials[0].failed
        assert record.estimate >= von_neumann_exact(diag_rho) - 1e-9

    def test_evaluate_cnn_noise_free(self, diag_rho):
        """Noise-free evaluation returns H(P_V) and leaves the network alone."""
        cfg = QneeConfig(n_layers=2, noise_free=True)
        cost, net = evaluate_cnn(diag_rho, identity_parameters(2, 2), None, cfg)
        assert cost == pytest.approx(0.3250829733914482)
        assert net is None

    def test_one_qubit_rejected(self):
        """The estimator needs a register of at least two qubits."""
        cfg = QneeConfig(n_layers=2, noise_free=True)
        with pytest.raises(ArgumentError):
            run_qnee(DensityMatrix.maximally_mixed(1), cfg)

    def test_invalid_config(self):
        """Bad step sizes and mixed entropy orders are rejected."""
        with pytest.raises(ArgumentError):
            QneeConfig(n_layers=2, eta_q=0.0)
        with pytest.raises(ArgumentError):
            QneeConfig(n_layers=2, fd_scheme='backward')
        with pytest.raises(ArgumentError):
            QneeConfig(n_layers=2, nn_initial=TrainConfig(alpha=2.0), nn_step=TrainConfig())

    def test_all_trials_diverge(self, monkeypatch, diag_rho):
        """When every trial diverges the run raises with all histories."""

        def diverge(*args, **kwargs):
            raise TrainingError("Non-finite cost at iteration 0", [])

        monkeypatch.setattr('estimator.hybrid.train', diverge)
        cfg = QneeConfig(n_layers=2, n_outer=1, n_trials=2, embed_dim=4, hidden_width=8)
        with pytest.raises(EstimationError) as excinfo:
            run_qnee(diag_rho, cfg)
        assert sorted(excinfo.value.histories) == [0, 1]

    def test_derive_seed(self):
        """Seeds are stable and differ per address."""
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)


class TestParallel:
    """Test pool helpers."""

    def test_single_worker_runs_inline(self):
        """One worker means no pool and in-order serial execution."""
        assert worker_pool(1) is None
        assert pool_starmap(None, pow, [(2, 3), (3, 2)]) == [8, 9]


@pytest.mark.slow
class TestFullScale:
    """Long-running checks at reduced full-run scale."""

    def test_polarized_block(self):
        """L=8, lambda=3.0, three-qubit block: estimate <= 0.05 nats."""
        from quantum.xxz import XXZParams, ground_state

        rho = ground_state(XXZParams(8, 0.05, 3.0)).block(3)
        nn_initial = TrainConfig(learning_rate=1e-3, weight_decay=5e-5, n_iter=2000)
        nn_step = TrainConfig(learning_rate=1e-3, weight_decay=5e-5, n_iter=50)
        cfg = QneeConfig(n_layers=8, n_outer=100, n_shots=10000, n_trials=1,
                         nn_initial=nn_initial, nn_step=nn_step, embed_dim=16, hidden_width=64)
        assert run_qnee(rho, cfg).estimate <= 0.05

    def test_reachable_pure_state(self):
        """A pure state the ansatz can rotate onto |00> is estimated near zero."""
        from quantum.circuit import circuit_unitary

        target = circuit_unitary(random_parameters(2, 2, seed=13))
        rho = DensityMatrix.from_diagonal([1.0, 0.0, 0.0, 0.0]).conjugated(target.conj().T)
        cfg = QneeConfig(n_layers=2, eta_q=0.1, fd_step=1e-4, fd_scheme='central', n_outer=300,
                         noise_free=True, n_trials=5, seed=2)
        assert run_qnee(rho, cfg).estimate <= 0.05
