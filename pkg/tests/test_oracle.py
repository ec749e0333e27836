import ast
from pathlib import Path

import numpy as np
import pytest

import teampay as tp
from teampay.oracle import principal_payoff

from helpers import KAPPA_HALF, clique, quadratic_problem, success_contract


def test_zero_contract_converges_immediately():
    problem = quadratic_problem(clique(3, 0.5))
    eq = tp.best_response_iterate(problem, tp.Contract(np.zeros((3, 2))))
    assert np.all(eq.actions == 0.0)


def test_agrees_with_specialized_solver():
    net = clique(2)
    eq_oracle = tp.best_response_iterate(quadratic_problem(net), success_contract([0.25, 0.25]), tol=1e-10)
    eq_exact = tp.solve_equilibrium_quadratic_binary(net, np.array([0.25, 0.25]), KAPPA_HALF)
    assert np.max(np.abs(eq_oracle.actions - eq_exact.actions)) < 1e-8


def test_symmetric_profile_from_asymmetric_init():
    problem = quadratic_problem(clique(2))
    eq = tp.best_response_iterate(
        problem, success_contract([0.25, 0.25]), tol=1e-10, init=np.array([0.9, 0.01])
    )
    assert abs(eq.actions[0] - eq.actions[1]) < 1e-8


def test_brute_force_single_agent_closed_form():
    problem = quadratic_problem(tp.Network([[0.0]]))
    contract, payoff = tp.brute_force_optimal_contract(problem, 0.01, (0.0, 1.0))
    assert contract.payments[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert payoff == pytest.approx(0.0625, abs=1e-6)


def test_brute_force_zero_revenue_pays_nothing():
    problem = tp.Problem(
        n=1,
        production=tp.QuadraticNetworkProduction(tp.Network([[0.0]])),
        outcomes=tp.SoftmaxOutcomeModel([0.0, 1.0], [0.0, 0.0], [0.0, 0.0]),
        utilities=(tp.LinearUtility(),),
        costs=(tp.PowerCost(),),
    )
    contract, payoff = tp.brute_force_optimal_contract(problem, 0.1, (0.0, 0.4))
    assert np.all(contract.payments == 0.0)
    assert payoff == pytest.approx(0.0, abs=1e-12)


def test_brute_force_dimensionality_guard():
    problem = quadratic_problem(clique(4))
    with pytest.raises(tp.OracleError):
        tp.brute_force_optimal_contract(problem, 0.1, (0.0, 0.5), dim_cap=3)


def test_finite_diff_square():
    d = tp.finite_diff(lambda x: x * x, 3.0, 1e-5)
    assert d == pytest.approx(6.0, abs=1e-9)


def test_finite_diff_gradient_and_richardson():
    f = lambda v: float(v[0] ** 2 + 3.0 * v[0] * v[1])
    g = tp.finite_diff(f, np.array([1.0, 2.0]), 1e-5, richardson=True)
    assert g == pytest.approx([8.0, 3.0], abs=1e-9)


def test_finite_diff_matches_single_agent_performance_derivative():
    problem = quadratic_problem(tp.Network([[0.0]]))

    def perf(tau):
        eq = tp.best_response_iterate(problem, success_contract([float(tau)]), tol=1e-12)
        return eq.performance

    # The map is linear in the payment, so a wide step costs no truncation
    # while averaging away the oracle's action-resolution floor.
    d = tp.finite_diff(perf, 0.4, 0.05)
    assert d == pytest.approx(0.5, abs=1e-7)


def test_share_derivative_vanishes_at_optimal_share():
    net = clique(2)
    problem = quadratic_problem(net)
    s_star = tp.total_share_root(1.0, 0.5, 2.0)

    def payoff_of_share(s):
        eq = tp.best_response_iterate(problem, success_contract([s / 2, s / 2]), tol=1e-10)
        return principal_payoff(problem, success_contract([s / 2, s / 2]), eq.performance)

    d = tp.finite_diff(payoff_of_share, s_star, 1e-4)
    assert abs(d) < 1e-5


def test_oracle_imports_only_model():
    """Code-level independence: the oracle may import the domain types but
    none of the analytic solver modules."""
    source = Path(tp.oracle.__file__).read_text()
    tree = ast.parse(source)
    internal = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom) and (node.module or "").startswith("teampay") is False:
            if node.level > 0:  # relative import
                internal.add(node.module)
        elif isinstance(node, ast.ImportFrom) and (node.module or "").startswith("teampay"):
            internal.add(node.module.split(".", 1)[1])
        elif isinstance(node, ast.Import):
            for alias in node.names:
                if alias.name.startswith("teampay"):
                    internal.add(alias.name.split(".", 1)[1])
    assert internal == {"model"}
