"""
Invariant suite checked against exact oracles.

Every check draws its own seeded random instances and reports the worst
measured slack next to its tolerance. With `mutate=True` the suite runs
against a von Neumann cost whose normalization term has the wrong sign, and
the bound checks are expected to fail.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional
import logging

import numpy as np
import scipy.linalg
import torch

from estimator.costs import (
    analytic_cost,
    cost_dv,
    cost_renyi,
    cost_vn,
    invert_cost_renyi,
    saturated_renyi_cost,
)
from estimator.hybrid import QneeConfig, fd_gradient
from estimator.network import EntropyNet
from estimator.training import cost_gradients
from quantum.circuit import outcome_distribution, random_parameters
from quantum.exceptions import ArgumentError, InvariantFailure
from quantum.states import (
    eig_hermitian,
    log_matrix,
    majorizes,
    random_density_matrix,
    random_hermitian,
    random_unitary,
    renyi_exact,
    renyi_shannon,
    shannon_entropy,
    von_neumann_exact,
)

logger = logging.getLogger('experiments')

BOUND_TOL = 1e-9
SATURATION_TOL = 1e-8
ALPHAS = (0.5, 2.0, 5.0)

VnCost = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    count: int
    detail: str = ''

    def line(self) -> str:
        verdict = 'PASS' if self.passed else 'FAIL'
        text = f"{verdict} {self.name}: measured={self.measured:.3e} tolerance={self.tolerance:.1e} instances={self.count}"
        return f"{text} ({self.detail})" if self.detail else text


def mutated_cost_vn(h_table, weights) -> float:
    """cost_vn with the sign of sum e^h - 1 flipped."""
    h = np.asarray(h_table, dtype=np.float64)
    p = np.asarray(weights, dtype=np.float64)
    return float(-np.dot(p, h) - (np.sum(np.exp(h)) - 1.0))


def _instance(rng: np.random.Generator, max_qubits: int = 3):
    n = int(rng.integers(1, max_qubits + 1))
    return n, random_density_matrix(n, seed=rng)


def check_gibbs_bound(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """
    cost_vn >= -<O> + ln tr e^O >= S, equality at O = ln rho.

    O has a Gaussian spectrum in a Haar-random eigenbasis; the Gibbs side
    uses the matrix exponential, the cost side sees only the spectrum of O
    and the populations of rho in its eigenbasis.
    """
    worst = np.inf
    worst_saturation = 0.0
    for _ in range(instances):
        n, rho = _instance(rng)
        values = rng.normal(scale=0.5, size=rho.dim)
        basis = random_unitary(rho.dim, seed=rng)
        operator = (basis * values) @ basis.conj().T
        populations = np.real(np.einsum('ij,ik,kj->j', basis.conj(), rho.matrix, basis))
        entropy = von_neumann_exact(rho)
        gibbs = -rho.expectation(operator) + np.log(np.trace(scipy.linalg.expm(operator)).real)
        worst = min(worst, gibbs - entropy, vn_cost(values, populations) - gibbs)
        log_rho = log_matrix(rho)
        saturated = -rho.expectation(log_rho) + np.log(np.trace(scipy.linalg.expm(log_rho)).real)
        worst_saturation = max(worst_saturation, abs(saturated - entropy))
    passed = worst >= -BOUND_TOL and worst_saturation <= SATURATION_TOL
    return CheckResult('gibbs_bound', passed, worst, BOUND_TOL, instances, f"saturation gap {worst_saturation:.2e}")


def check_linearized_bound(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """
    -<O> + tr e^O - 1 >= -<O> + ln tr e^O >= S.

    In the eigenbasis of O the linearized right-hand side is the von Neumann
    cost with h = eigenvalues of O and weights = populations of rho.
    """
    worst = np.inf
    for _ in range(instances):
        n, rho = _instance(rng)
        operator = random_hermitian(rho.dim, scale=0.5, seed=rng)
        values, vectors = scipy.linalg.eigh(operator)
        populations = np.real(np.einsum('ij,ik,kj->j', vectors.conj(), rho.matrix, vectors))
        linear = vn_cost(values, populations)
        logarithmic = -rho.expectation(operator) + np.log(np.sum(np.exp(values)))
        worst = min(worst, linear - logarithmic, logarithmic - von_neumann_exact(rho))
    return CheckResult('linearized_bound', worst >= -BOUND_TOL, worst, BOUND_TOL, instances)


def check_donsker_varadhan(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """cost_vn >= cost_dv >= H(P) for arbitrary h and exact weights."""
    worst = np.inf
    for _ in range(instances):
        n, rho = _instance(rng)
        p = np.real(np.diag(rho.matrix))
        h = rng.normal(scale=2.0, size=p.size)
        linear, logarithmic = vn_cost(h, p), cost_dv(h, p)
        worst = min(worst, linear - logarithmic, logarithmic - shannon_entropy(p))
    return CheckResult('donsker_varadhan', worst >= -BOUND_TOL, worst, BOUND_TOL, instances)


def check_renyi_chain(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """C_a(h) >= C_a(ln P) = saturated(H_a(P)) and H_a(P_V) >= S_a(rho)."""
    worst = np.inf
    worst_saturation = 0.0
    for _ in range(instances):
        n = int(rng.integers(2, 4))
        rho = random_density_matrix(n, seed=rng)
        p = outcome_distribution(rho, random_parameters(n, 2, seed=rng))
        alpha = float(rng.choice(ALPHAS))
        h = rng.normal(scale=1.0, size=p.size)
        floor = saturated_renyi_cost(renyi_shannon(p, alpha), alpha)
        saturated = cost_renyi(np.log(p), p, alpha)
        worst_saturation = max(worst_saturation, abs(saturated - floor))
        worst = min(
            worst,
            cost_renyi(h, p, alpha) - floor,
            renyi_shannon(p, alpha) - renyi_exact(rho, alpha),
        )
    passed = worst >= -BOUND_TOL and worst_saturation <= BOUND_TOL
    return CheckResult('renyi_chain', passed, worst, BOUND_TOL, instances, f"saturation gap {worst_saturation:.2e}")


def check_majorization(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """Eigenvalues majorize every outcome distribution; H(P_V) >= S(rho)."""
    violations = 0
    worst = np.inf
    for _ in range(instances):
        n = int(rng.integers(2, 4))
        rho = random_density_matrix(n, seed=rng)
        p = outcome_distribution(rho, random_parameters(n, 2, seed=rng))
        spectrum = eig_hermitian(rho).eigenvalues
        if not majorizes(spectrum, p, tol=1e-10):
            violations += 1
        worst = min(worst, shannon_entropy(p) - von_neumann_exact(rho))
    passed = violations == 0 and worst >= -1e-10
    return CheckResult('majorization', passed, worst, 1e-10, instances, f"{violations} violations")


def check_alpha_limits(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """Renyi entropy and cost approach their von Neumann counterparts as alpha -> 1."""
    worst = 0.0
    for _ in range(instances):
        n, rho = _instance(rng)
        entropy = von_neumann_exact(rho)
        for alpha in (1.0 - 1e-5, 1.0 + 1e-5):
            worst = max(worst, abs(renyi_exact(rho, alpha) - entropy))
        p = np.real(np.diag(rho.matrix))
        h = rng.normal(scale=0.5, size=p.size)
        for alpha in (1.0 - 1e-5, 1.0 + 1e-5):
            worst = max(worst, abs(cost_renyi(h, p, alpha) - vn_cost(h, p)))
    return CheckResult('alpha_limits', worst <= 1e-3, worst, 1e-3, instances)


def check_saturation(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """cost_vn(ln lambda, lambda) = S and the Renyi round trip recovers S_a."""
    worst = 0.0
    for _ in range(instances):
        n, rho = _instance(rng)
        spectrum = np.clip(eig_hermitian(rho).eigenvalues, 1e-300, None)
        worst = max(worst, abs(vn_cost(np.log(spectrum), spectrum) - von_neumann_exact(rho)))
        alpha = float(rng.choice(ALPHAS))
        recovered = invert_cost_renyi(cost_renyi(np.log(spectrum), spectrum, alpha), alpha)
        worst = max(worst, abs(recovered - renyi_exact(rho, alpha)))
    return CheckResult('saturation', worst <= SATURATION_TOL, worst, SATURATION_TOL, instances)


def check_network_gradient(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """Backpropagated gradients match central differences on a width-8 network."""
    step = 1e-5
    worst = 0.0
    count = 0
    for trial in range(max(1, min(instances, 5))):
        net = EntropyNet(2, embed_dim=4, hidden_width=8, seed=int(rng.integers(2**31)))
        p = rng.dirichlet(np.ones(4))
        alpha = None if trial % 2 == 0 else 2.0
        analytic = cost_gradients(net, p, alpha)
        for name, param in net.named_parameters():
            flat = param.data.view(-1)
            for index in rng.choice(flat.numel(), size=min(3, flat.numel()), replace=False):
                original = float(flat[index])
                values = []
                for shift in (step, -step):
                    flat[index] = original + shift
                    with torch.no_grad():
                        h = net.all_outputs().numpy()
                    values.append(vn_cost(h, p) if alpha is None else cost_renyi(h, p, alpha))
                flat[index] = original
                numeric = (values[0] - values[1]) / (2 * step)
                exact = analytic[name].reshape(-1)[index]
                scale = max(abs(exact), abs(numeric), 1e-3)
                worst = max(worst, abs(exact - numeric) / scale)
                count += 1
    return CheckResult('network_gradient', worst <= 1e-4, worst, 1e-4, count)


def check_outer_gradient(instances: int, rng: np.random.Generator, vn_cost: VnCost) -> CheckResult:
    """Noise-free circuit gradient equals central differences of H(P_V)."""
    step = 1e-4
    worst = 0.0
    trials = max(1, min(instances, 3))
    for _ in range(trials):
        rho = random_density_matrix(2, seed=rng)
        params = random_parameters(2, 2, seed=rng)
        cfg = QneeConfig(n_layers=2, fd_step=step, fd_scheme='central', noise_free=True, n_trials=1)
        gradient = fd_gradient(rho, params, None, cfg)
        for i in range(params.size):
            up = analytic_cost(outcome_distribution(rho, params.perturbed(i, step)))
            down = analytic_cost(outcome_distribution(rho, params.perturbed(i, -step)))
            worst = max(worst, abs(gradient[i] - (up - down) / (2 * step)))
    return CheckResult('outer_gradient', worst <= 1e-3, worst, 1e-3, trials)


CHECKS = [
    check_gibbs_bound,
    check_linearized_bound,
    check_donsker_varadhan,
    check_renyi_chain,
    check_majorization,
    check_alpha_limits,
    check_saturation,
    check_network_gradient,
    check_outer_gradient,
]


def run_suite(instances: int = 200, seed: int = 1234, mutate: bool = False,
              names: Optional[List[str]] = None) -> List[CheckResult]:
    """Run every check (or the named ones) and return their results."""
    if instances < 1:
        raise ArgumentError(f"instances must be at least 1, got {instances}")
    vn_cost = mutated_cost_vn if mutate else cost_vn
    if mutate:
        logger.warning("Running the invariant suite against a mutated von Neumann cost")
    results = []
    for index, check in enumerate(CHECKS):
        name = check.__name__[len('check_'):]
        if names and name not in names:
            continue
        rng = np.random.default_rng([seed, index])
        result = check(instances, rng, vn_cost)
        result.passed = bool(result.passed)
        result.measured = float(result.measured)
        log = logger.info if result.passed else logger.error
        log(result.line())
        results.append(result)
    return results


def assert_suite(results: List[CheckResult]):
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise InvariantFailure(f"{len(failed)} of {len(results)} invariant checks failed: {', '.join(failed)}", failed)
