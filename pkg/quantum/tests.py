"""
Tests for quantum app.
"""
import math
from functools import reduce

import numpy as np
import pytest

from quantum.circuit import (
    BitString,
    CircuitParams,
    all_bitstrings,
    apply_circuit,
    blocks_per_circuit,
    brickwork_pairs,
    circuit_unitary,
    conjugate_column,
    identity_parameters,
    outcome_distribution,
    random_parameters,
)
from quantum.exceptions import ArgumentError, CapacityError, StateValidationError
from quantum.sampling import ShotSet, sample_shots, validate_distribution
from quantum.states import (
    DensityMatrix,
    StateVector,
    eig_hermitian,
    majorizes,
    partial_trace,
    random_state_vector,
    random_unitary,
    renyi_exact,
    renyi_shannon,
    shannon_entropy,
    von_neumann_exact,
)
from quantum.xxz import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    XXZParams,
    build_hamiltonian,
    critical_field,
    fit_log_scaling,
    chord_length,
    ground_state,
    total_magnetization,
)


class TestDensityMatrix:
    """Test density matrix validation."""

    def test_valid_state(self, random_rho):
        """Random states pass validation and keep unit trace."""
        rho = random_rho(3)
        assert rho.dim == 8
        assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)

    def test_wrong_trace(self):
        """Trace different from one is rejected."""
        with pytest.raises(StateValidationError):
            DensityMatrix(1, np.eye(2))

    def test_not_hermitian(self):
        """Non-Hermitian matrices are rejected."""
        with pytest.raises(StateValidationError):
            DensityMatrix(1, np.array([[0.5, 0.3], [0.0, 0.5]]))

    def test_negative_eigenvalue(self):
        """Matrices with a negative eigenvalue are rejected."""
        with pytest.raises(StateValidationError):
            DensityMatrix.from_diagonal([1.2, -0.2])

    def test_too_many_qubits(self):
        """Dense states beyond the qubit limit raise CapacityError."""
        with pytest.raises(CapacityError):
            DensityMatrix(13, np.zeros((1, 1)))

    def test_matrix_is_read_only(self, random_rho):
        """Stored matrices cannot be modified in place."""
        rho = random_rho(1)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_errors_are_value_errors(self):
        """Argument and validation errors are also ValueErrors."""
        assert issubclass(ArgumentError, ValueError)
        assert issubclass(StateValidationError, ValueError)


class TestPartialTrace:
    """Test partial traces."""

    def test_bell_state(self):
        """Either half of a Bell pair is maximally mixed."""
        bell = StateVector.from_amplitudes([1, 0, 0, 1])
        for keep in ([0], [1]):
            reduced = partial_trace(bell, keep)
            assert np.allclose(reduced.matrix, np.eye(2) / 2, atol=1e-12)

    def test_matches_index_sum(self, rng):
        """Reduced state of a pure 3-qubit state matches an explicit index sum."""
        psi = random_state_vector(3, seed=rng)
        amplitudes = psi.amplitudes.reshape(4, 2)
        expected = np.zeros((4, 4), dtype=complex)
        for a in range(4):
            for b in range(4):
                for r in range(2):
                    expected[a, b] += amplitudes[a, r] * np.conj(amplitudes[b, r])
        assert np.allclose(partial_trace(psi, [0, 1]).matrix, expected, atol=1e-12)

    def test_density_matrix_input(self, rng):
        """Tracing a projector equals tracing the state vector."""
        psi = random_state_vector(3, seed=rng)
        from_vector = partial_trace(psi, [2, 0])
        from_matrix = partial_trace(psi.projector(), [2, 0])
        assert np.allclose(from_vector.matrix, from_matrix.matrix, atol=1e-12)

    def test_kept_order(self):
        """Kept qubits appear in the order listed."""
        state = StateVector.basis(2, 1)  # |01>
        reduced = partial_trace(state, [1, 0])
        assert np.allclose(np.diag(reduced.matrix).real, [0, 0, 1, 0])

    def test_schmidt_symmetry(self, rng):
        """Both sides of a pure state share their nonzero spectrum and entropy."""
        psi = random_state_vector(4, seed=rng)
        left = partial_trace(psi, [0])
        right = partial_trace(psi, [1, 2, 3])
        assert von_neumann_exact(left) == pytest.approx(von_neumann_exact(right), abs=1e-10)
        left_values = eig_hermitian(left).eigenvalues
        right_values = eig_hermitian(right).eigenvalues
        assert np.allclose(right_values[:2], left_values, atol=1e-10)
        assert np.allclose(right_values[2:], 0.0, atol=1e-10)

    def test_invalid_keep(self):
        """Empty, duplicate or out-of-range qubit lists raise."""
        state = StateVector.basis(2, 0)
        for keep in ([], [0, 0], [2]):
            with pytest.raises(ArgumentError):
                partial_trace(state, keep)


class TestEntropies:
    """Test exact entropy oracles."""

    def test_maximally_mixed(self):
        """I/4 has entropy 2 ln 2 for every order."""
        rho = DensityMatrix.maximally_mixed(2)
        assert von_neumann_exact(rho) == pytest.approx(2 * math.log(2), abs=1e-12)
        assert renyi_exact(rho, 2.0) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_pure_state(self, rng):
        """Pure states have zero entropy."""
        rho = random_state_vector(2, seed=rng).projector()
        assert von_neumann_exact(rho) == pytest.approx(0.0, abs=1e-9)

    def test_diagonal_state(self, diag_rho):
        """diag(0.9, 0.1, 0, 0) has S = 0.3251 nats."""
        assert von_neumann_exact(diag_rho) == pytest.approx(0.3250829733914482, abs=1e-12)

    def test_renyi_order_one_rejected(self):
        """alpha = 1 must go through the von Neumann functions."""
        with pytest.raises(ArgumentError):
            renyi_shannon([0.5, 0.5], 1.0)

    def test_renyi_monotone_in_order(self, random_rho):
        """S_0.5 >= S >= S_2."""
        rho = random_rho(2)
        assert renyi_exact(rho, 0.5) >= von_neumann_exact(rho) - 1e-12
        assert von_neumann_exact(rho) >= renyi_exact(rho, 2.0) - 1e-12

    def test_shannon_ignores_zeros(self):
        """0 ln 0 is treated as 0."""
        assert shannon_entropy([1.0, 0.0, 0.0]) == 0.0

    def test_majorization(self, random_rho):
        """Eigenvalues majorize the diagonal."""
        rho = random_rho(3)
        spectrum = eig_hermitian(rho).eigenvalues
        assert majorizes(spectrum, np.diag(rho.matrix).real)
        assert not majorizes([0.5, 0.5], [1.0, 0.0])


class TestEigHermitian:
    """Test the sorted eigendecomposition."""

    def test_descending_and_reconstructs(self, random_rho):
        """Eigenvalues are descending and reproduce the matrix."""
        rho = random_rho(2)
        spectrum = eig_hermitian(rho)
        values, vectors = spectrum.eigenvalues, spectrum.eigenvectors
        assert np.all(np.diff(values) <= 1e-12)
        rebuilt = (vectors * values) @ vectors.conj().T
        assert np.allclose(rebuilt, rho.matrix, atol=1e-10)

    def test_deterministic_with_degeneracy(self):
        """Repeated calls on a degenerate matrix give identical output."""
        rho = DensityMatrix.maximally_mixed(2)
        first, second = eig_hermitian(rho), eig_hermitian(rho)
        assert np.array_equal(first.eigenvectors, second.eigenvectors)

    def test_vector_accessor(self, diag_rho):
        """The leading eigenvector of a diagonal state is |00>."""
        vector = eig_hermitian(diag_rho).vector(0)
        assert abs(vector.overlap(StateVector.basis(2, 0))) == pytest.approx(1.0)


class TestXXZChain:
    """Test the XXZ chain construction and ground states."""

    def test_two_site_spectrum(self):
        """L=2, delta=1, lambda=0 matches an independent 4x4 diagonalization."""
        hamiltonian = build_hamiltonian(XXZParams(2, 1.0, 0.0))
        bond = np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y) + np.kron(PAULI_Z, PAULI_Z)
        # both periodic bonds of a two-site ring join sites 0 and 1
        expected = np.linalg.eigvalsh(2 * bond)
        assert np.allclose(np.linalg.eigvalsh(hamiltonian), expected, atol=1e-12)
        gs = ground_state(XXZParams(2, 1.0, 0.0))
        assert gs.energy == pytest.approx(-6.0)
        assert gs.degeneracy == 1

    def test_four_site_energy(self):
        """L=4 ground energy matches a brute-force construction."""
        L, delta, lam = 4, 0.05, 0.5
        dim = 1 << L

        def op(matrix, site):
            return reduce(np.kron, [matrix if k == site else np.eye(2) for k in range(L)])

        brute = np.zeros((dim, dim), dtype=complex)
        for l in range(L):
            m = (l + 1) % L
            brute += op(PAULI_X, l) @ op(PAULI_X, m) + op(PAULI_Y, l) @ op(PAULI_Y, m)
            brute += delta * op(PAULI_Z, l) @ op(PAULI_Z, m) - lam * op(PAULI_Z, l)
        expected = np.linalg.eigvalsh(brute)[0]
        assert ground_state(XXZParams(L, delta, lam)).energy == pytest.approx(expected, abs=1e-9)

    def test_hermitian(self):
        """The Hamiltonian is Hermitian."""
        hamiltonian = build_hamiltonian(XXZParams(4, 0.05, 1.3))
        assert np.allclose(hamiltonian, hamiltonian.conj().T)

    def test_magnetization_conserved(self):
        """The Hamiltonian commutes with the total magnetization."""
        hamiltonian = build_hamiltonian(XXZParams(6, 0.05, 1.2))
        magnetization = total_magnetization(6)
        assert np.allclose(hamiltonian @ magnetization, magnetization @ hamiltonian, atol=1e-10)

    def test_translation_invariant_blocks(self):
        """Every three-site block of the ring has the same entropy."""
        for lam in (1.5, 3.0):
            gs = ground_state(XXZParams(8, 0.05, lam))
            entropies = [von_neumann_exact(gs.block(3, start)) for start in range(8)]
            assert np.allclose(entropies, entropies[0], atol=1e-8)

    def test_polarized_phase(self):
        """At lambda=3 the chain is fully polarized and blocks are unentangled."""
        gs = ground_state(XXZParams(8, 0.05, 3.0))
        assert gs.energy == pytest.approx(8 * 0.05 - 3.0 * 8, abs=1e-9)
        assert von_neumann_exact(gs.block(3)) == pytest.approx(0.0, abs=1e-6)

    def test_entangled_phase(self):
        """At lambda=1.5 a three-site block is entangled."""
        gs = ground_state(XXZParams(8, 0.05, 1.5))
        assert von_neumann_exact(gs.block(3)) > 0.1

    def test_critical_field(self):
        """2(1 - delta)."""
        assert critical_field(0.05) == pytest.approx(1.9)

    def test_limits(self):
        """Chains too short or too long raise."""
        with pytest.raises(ArgumentError):
            XXZParams(1, 0.0, 0.0)
        with pytest.raises(CapacityError):
            build_hamiltonian(XXZParams(13, 0.0, 0.0))

    def test_block_size_bounds(self):
        """Blocks must be smaller than the chain."""
        gs = ground_state(XXZParams(4, 0.05, 0.5))
        with pytest.raises(ArgumentError):
            gs.block(4)


class TestScalingFit:
    """Test the logarithmic entanglement scaling fit."""

    def test_recovers_central_charge(self):
        """Synthetic c=1 data gives slope 1/3."""
        sizes = [1, 2, 3, 4]
        entropies = [chord_length(8, n) / 3.0 + 0.7 for n in sizes]
        fit = fit_log_scaling(8, sizes, entropies)
        assert fit.central_charge == pytest.approx(1.0, abs=1e-9)
        assert fit.intercept == pytest.approx(0.7, abs=1e-9)
        assert fit.residual == pytest.approx(0.0, abs=1e-9)

    def test_needs_two_points(self):
        """One point cannot be fitted."""
        with pytest.raises(ArgumentError):
            fit_log_scaling(8, [1], [0.5])


class TestBitString:
    """Test bit string labels."""

    def test_big_endian(self):
        """Qubit 0 is the most significant bit."""
        s = BitString.from_index(2, 2)
        assert s.bits == (1, 0)
        assert s.label == '10'
        assert BitString.from_label('011').index == 3

    def test_invalid_bits(self):
        """Bits other than 0/1 and mismatched indices are rejected."""
        with pytest.raises(ArgumentError):
            BitString((0, 2), 2)
        with pytest.raises(ArgumentError):
            BitString((1, 0), 1)

    def test_all_bitstrings(self):
        """Strings are ordered by index."""
        assert [str(s) for s in all_bitstrings(2)] == ['00', '01', '10', '11']


class TestCircuit:
    """Test the layered ansatz."""

    def test_angle_count(self):
        """2 n N_l angles, blocks of four."""
        assert blocks_per_circuit(4, 3) * 4 == 2 * 4 * 3
        assert blocks_per_circuit(3, 2) * 4 == 2 * 3 * 2
        assert random_parameters(3, 2, seed=1).size == 12

    def test_brickwork_closes_ring(self):
        """Odd layers include the wrap-around bond."""
        assert brickwork_pairs(4, 0) == ((0, 1), (2, 3))
        assert brickwork_pairs(4, 1) == ((1, 2), (3, 0))

    def test_invalid_shapes(self):
        """Odd n with odd N_l, wrong angle counts and one qubit are rejected."""
        with pytest.raises(ArgumentError):
            CircuitParams(3, 1, np.zeros(6))
        with pytest.raises(ArgumentError):
            CircuitParams(2, 1, np.zeros(5))
        with pytest.raises(ArgumentError):
            CircuitParams(1, 2, np.zeros(4))

    def test_single_flip(self):
        """(pi, 0, 0, 0) on |00> gives outcome 10 with certainty."""
        rho = StateVector.basis(2, 0).projector()
        params = CircuitParams(2, 1, [np.pi, 0.0, 0.0, 0.0])
        assert np.allclose(outcome_distribution(rho, params), [0, 0, 1, 0], atol=1e-12)

    def test_unitary(self):
        """V is unitary."""
        unitary = circuit_unitary(random_parameters(3, 2, seed=3))
        assert np.allclose(unitary @ unitary.conj().T, np.eye(8), atol=1e-12)

    def test_identity_parameters(self, random_rho):
        """Zero angles are the identity for n=2 with even N_l."""
        assert np.allclose(circuit_unitary(identity_parameters(2, 2)), np.eye(4), atol=1e-12)
        rho = random_rho(2)
        assert np.allclose(apply_circuit(rho, identity_parameters(2, 2)).matrix, rho.matrix, atol=1e-12)

    def test_zero_angles_keep_populations(self):
        """Zero angles are diagonal, so diagonal states keep their populations."""
        p = np.array([0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0])
        rho = DensityMatrix.from_diagonal(p)
        assert np.allclose(outcome_distribution(rho, identity_parameters(3, 2)), p, atol=1e-12)

    def test_distribution_matches_triple_product(self, random_rho):
        """P(s) is the diagonal of V rho V^dagger."""
        rho = random_rho(3)
        params = random_parameters(3, 2, seed=4)
        unitary = circuit_unitary(params)
        expected = np.diag(unitary @ rho.matrix @ unitary.conj().T).real
        p = outcome_distribution(rho, params)
        assert np.allclose(p, expected, atol=1e-12)
        assert p.sum() == pytest.approx(1.0)

    def test_apply_circuit_keeps_spectrum(self, random_rho):
        """V rho V^dagger has the spectrum and entropy of rho."""
        rho = random_rho(3)
        rotated = apply_circuit(rho, random_parameters(3, 2, seed=6))
        assert np.allclose(eig_hermitian(rotated).eigenvalues, eig_hermitian(rho).eigenvalues, atol=1e-10)
        assert von_neumann_exact(rotated) == pytest.approx(von_neumann_exact(rho), abs=1e-10)

    def test_circuits_compose(self, random_rho):
        """Applying two circuits in turn equals conjugating by their product."""
        rho = random_rho(2)
        first, second = random_parameters(2, 2, seed=7), random_parameters(2, 2, seed=8)
        product = circuit_unitary(second) @ circuit_unitary(first)
        expected = product @ rho.matrix @ product.conj().T
        assert np.allclose(apply_circuit(apply_circuit(rho, first), second).matrix, expected, atol=1e-12)

    def test_entropy_invariant_under_haar_unitary(self, random_rho, rng):
        """Conjugating by a Haar-random unitary leaves S unchanged."""
        rho = random_rho(3)
        rotated = rho.conjugated(random_unitary(8, seed=rng))
        assert von_neumann_exact(rotated) == pytest.approx(von_neumann_exact(rho), abs=1e-10)

    def test_register_mismatch(self, random_rho):
        """A circuit on the wrong number of qubits raises."""
        with pytest.raises(ArgumentError):
            outcome_distribution(random_rho(2), random_parameters(3, 2, seed=1))

    def test_conjugate_column(self):
        """V^dagger |s> is the s-th column of V^dagger."""
        params = random_parameters(2, 2, seed=5)
        unitary = circuit_unitary(params)
        vector = conjugate_column(params, BitString.from_label('01'))
        assert np.allclose(vector.amplitudes, unitary.conj().T[:, 1], atol=1e-12)

    def test_params_are_immutable(self):
        """Perturbation returns a copy; the stored angles are read-only."""
        params = identity_parameters(2, 1)
        shifted = params.perturbed(0, 0.1)
        assert params.angles[0] == 0.0
        assert shifted.angles[0] == pytest.approx(0.1)
        assert params.key() != shifted.key()
        with pytest.raises(ValueError):
            params.angles[0] = 1.0


class TestSampling:
    """Test shot sampling."""

    def test_same_seed_same_shots(self):
        """Sampling is reproducible from the seed."""
        p = [0.5, 0.25, 0.125, 0.125]
        first, second = sample_shots(p, 1000, seed=5), sample_shots(p, 1000, seed=5)
        assert np.array_equal(first.counts, second.counts)
        assert first.total == 1000
        assert first.frequencies().sum() == pytest.approx(1.0)

    def test_frequencies_converge(self):
        """30000 shots land within a few standard deviations of P."""
        p = np.array([0.9, 0.1, 0.0, 0.0])
        frequencies = sample_shots(p, 30000, seed=9).frequencies()
        assert np.allclose(frequencies, p, atol=0.01)
        assert frequencies[2] == 0.0

    def test_uniform_counts_within_five_sigma(self):
        """40000 uniform shots stay within 5 binomial standard deviations per string."""
        n_shots = 40000
        counts = sample_shots(np.full(4, 0.25), n_shots, seed=13).counts
        sigma = math.sqrt(n_shots * 0.25 * 0.75)
        assert np.all(np.abs(counts - n_shots / 4) <= 5 * sigma)

    def test_as_dict_and_expand(self):
        """Only observed strings are listed; expand has one entry per shot."""
        shots = ShotSet.from_counts([3, 0, 1, 0])
        assert {str(s): n for s, n in shots.as_dict().items()} == {'00': 3, '10': 1}
        assert list(shots.expand()) == [0, 0, 0, 2]

    def test_invalid_distribution(self):
        """Negative or unnormalized distributions are rejected."""
        with pytest.raises(StateValidationError):
            validate_distribution([1.2, -0.2])
        with pytest.raises(StateValidationError):
            validate_distribution([0.5, 0.4])
        with pytest.raises(ArgumentError):
            sample_shots([0.5, 0.5], 0)

    def test_counts_must_sum(self):
        """ShotSet checks its total."""
        with pytest.raises(StateValidationError):
            ShotSet(1, [1, 1], 3)
