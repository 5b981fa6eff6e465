"""
Tests for vqse app.
"""
import math

import numpy as np
import pytest

from quantum.circuit import BitString
from quantum.exceptions import ArgumentError
from quantum.states import DensityMatrix, StateVector
from vqse.hamiltonian import (
    VqseConfig,
    global_energies,
    is_nondegenerate,
    level_report,
    local_energies,
    local_energy,
    lowest_levels,
    scheduled_energies,
    t_schedule,
    vqse_cost,
)
from vqse.solver import frequency_estimates, run_vqse

H_DIAG = 0.3250829733914482


class TestLocalHamiltonian:
    """Test the local cost Hamiltonian."""

    def test_two_qubit_levels(self):
        """r = (0.2, 0.21): 00 -> 0.795, 01 -> 1.005, 10 -> 0.995, 11 -> 1.205."""
        cfg = VqseConfig(ell=2)
        assert np.allclose(local_energies(cfg), [0.795, 1.005, 0.995, 1.205], atol=1e-12)
        assert local_energy(BitString.from_label('10'), cfg) == pytest.approx(0.995)

    def test_lowest_levels_distinct(self):
        """The ell + 1 lowest levels are distinct for ell <= 4."""
        for ell in range(1, 5):
            cfg = VqseConfig(ell=ell, m=1)
            levels = level_report(cfg)
            assert len(levels) == ell + 1
            assert is_nondegenerate(np.array(levels))

    def test_default_top_set_size(self):
        """m defaults to ell + 1 and must stay below 2^ell."""
        assert VqseConfig(ell=3).m == 4
        with pytest.raises(ArgumentError):
            VqseConfig(ell=2, m=4)
        with pytest.raises(ArgumentError):
            VqseConfig(ell=1)

    def test_wrong_string_length(self):
        """local_energy checks the string length."""
        with pytest.raises(ArgumentError):
            local_energy(BitString.from_label('0'), VqseConfig(ell=2))


class TestScheduledHamiltonian:
    """Test the global Hamiltonian and schedule."""

    def test_global_energies(self):
        """Top strings get the lowest levels in order; the rest get 1."""
        cfg = VqseConfig(ell=2)
        energies = global_energies([2, 0], cfg)
        assert energies[2] == pytest.approx(0.795)
        assert energies[0] == pytest.approx(0.995)
        assert energies[1] == 1.0 and energies[3] == 1.0

    def test_invalid_top_sets(self):
        """Top sets larger than m or with duplicates are rejected."""
        cfg = VqseConfig(ell=2)
        with pytest.raises(ArgumentError):
            global_energies([0, 1, 2, 3], cfg)
        with pytest.raises(ArgumentError):
            global_energies([1, 1], cfg)

    def test_schedule(self):
        """t steps every period and reaches 1 by three quarters of the run."""
        cfg = VqseConfig(ell=2, n_iter=200, t_update_period=25)
        assert t_schedule(0, cfg) == 0.0
        assert t_schedule(24, cfg) == 0.0
        assert t_schedule(25, cfg) == pytest.approx(1 / 6)
        assert t_schedule(150, cfg) == 1.0
        assert t_schedule(199, cfg) == 1.0

    def test_cost_endpoints(self):
        """t=0 is the local energy, t=1 the global one."""
        cfg = VqseConfig(ell=2)
        p = np.array([0.5, 0.2, 0.2, 0.1])
        assert vqse_cost(p, 0.0, [0, 1], cfg) == pytest.approx(float(p @ local_energies(cfg)))
        assert vqse_cost(p, 1.0, [0, 1], cfg) == pytest.approx(float(p @ global_energies([0, 1], cfg)))
        with pytest.raises(ArgumentError):
            scheduled_energies(1.5, [0], cfg)

    def test_lowest_levels_sorted(self):
        """Levels are ascending."""
        levels = lowest_levels(VqseConfig(ell=3))
        assert np.all(np.diff(levels) > 0)


class TestSolver:
    """Test the eigensolver baseline."""

    def test_noise_free_diagonal(self, diag_rho):
        """At the identity circuit the frequencies are the eigenvalues."""
        cfg = VqseConfig(ell=2, n_iter=0, noise_free=True, init='identity', n_trials=1)
        record = run_vqse(diag_rho, cfg)
        assert record.method == 'vqse'
        assert list(record.eigenvalues[:2]) == pytest.approx([0.9, 0.1], abs=1e-12)
        assert record.eigen_order[:2] == [0, 1]
        assert record.estimate == pytest.approx(H_DIAG, abs=1e-12)

    def test_sampled_diagonal(self, diag_rho):
        """30000 shots put the top-2 frequencies within 0.02 of (0.9, 0.1)."""
        cfg = VqseConfig(ell=2, n_iter=0, n_shots=30000, init='identity', n_trials=1, seed=5)
        record = run_vqse(diag_rho, cfg)
        assert list(record.eigenvalues[:2]) == pytest.approx([0.9, 0.1], abs=0.02)

    def test_pure_state(self):
        """A pure basis state gives an estimate of zero."""
        rho = StateVector.basis(2, 0).projector()
        cfg = VqseConfig(ell=2, n_iter=0, noise_free=True, init='identity', n_trials=1)
        assert run_vqse(rho, cfg).estimate <= 0.05

    def test_truncation_underestimates(self):
        """Only m eigenvalues are read, so I/4 with m=3 gives 0.75 ln 4 < ln 4."""
        cfg = VqseConfig(ell=2, n_iter=0, noise_free=True, init='identity', n_trials=1)
        record = run_vqse(DensityMatrix.maximally_mixed(2), cfg)
        assert record.estimate == pytest.approx(0.75 * math.log(4), abs=1e-12)
        assert record.estimate < record.exact_entropy

    def test_history_rows(self, random_rho):
        """One step row per iteration and a final row."""
        cfg = VqseConfig(ell=2, n_iter=6, t_update_period=2, noise_free=True, n_trials=1, seed=3)
        record = run_vqse(random_rho(2), cfg)
        stages = [point.stage for point in record.trials[0].history]
        assert stages == ['step'] * 6 + ['final']
        assert [point.outer_iter for point in record.trials[0].history] == list(range(7))

    def test_best_trial_has_lowest_final_cost(self, random_rho):
        """The record keeps the trial with the lowest final scheduled cost."""
        cfg = VqseConfig(ell=2, n_iter=4, noise_free=False, n_shots=200, n_trials=3, seed=4)
        record = run_vqse(random_rho(2), cfg)
        chosen = min(record.trials, key=lambda trial: trial.best_cost)
        assert record.best_trial == chosen.trial
        assert record.best_cost == chosen.best_cost
        assert record.estimate == chosen.estimate

    def test_frequency_estimates(self, diag_rho):
        """Top strings and frequencies are sorted by frequency."""
        from quantum.circuit import identity_parameters

        cfg = VqseConfig(ell=2, noise_free=True)
        top, values = frequency_estimates(diag_rho, identity_parameters(2, 2), cfg, seed=0)
        assert top == [0, 1, 2]
        assert list(values) == pytest.approx([0.9, 0.1, 0.0])

    def test_register_mismatch(self, diag_rho):
        """ell must match the state."""
        with pytest.raises(ArgumentError):
            run_vqse(diag_rho, VqseConfig(ell=3, n_layers=2))
