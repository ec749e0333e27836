import numpy as np
import pytest

import teampay as tp

from helpers import (
    KAPPA_HALF,
    clique,
    gradient_fd_battery,
    quadratic_problem,
    softmax_instance,
    success_contract,
)


def solve(problem, contract, tol=1e-12):
    return tp.solve_equilibrium_general(problem, contract, tol=tol)


# ---------------------------------------------------------------------------
# balance report
# ---------------------------------------------------------------------------


def test_symmetric_contract_has_zero_residuals():
    problem = quadratic_problem(clique(2))
    contract = success_contract([0.2, 0.2])
    report = tp.compute_balance_report(problem, contract, solve(problem, contract))
    assert report.max_relative_residual() < 1e-10


def test_no_spillovers_makes_centrality_equal_productivity():
    net = tp.Network(np.zeros((3, 3)))
    problem = quadratic_problem(net)
    contract = success_contract([0.2, 0.3, 0.1])
    report = tp.compute_balance_report(problem, contract, solve(problem, contract))
    assert np.allclose(report.centrality, report.alpha, atol=1e-14)


def test_asymmetric_contract_against_hand_assembled_pipeline():
    """Independent scripted assembly of the first-order objects for the
    2-agent clique at a non-optimal contract."""
    problem = quadratic_problem(clique(2))
    tau = np.array([0.3, 0.1])
    contract = success_contract(tau)
    eq = solve(problem, contract)
    report = tp.compute_balance_report(problem, contract, eq)

    g = np.array([[0.0, 1.0], [1.0, 0.0]])
    a = eq.actions
    kappa = 0.5
    curvature = np.ones(2)                      # quadratic cost a^2/2
    alpha = (np.ones(2) + g @ a) / np.sqrt(curvature)
    payment_utility = kappa * tau               # P'(u(tau) - u(0)) per agent
    spill = (payment_utility / np.sqrt(curvature))[:, None] * g / np.sqrt(curvature)[None, :]
    centrality = np.linalg.solve((np.eye(2) - spill).T, alpha)
    products = alpha * centrality
    lam = products * 1.0  # linear utility: u' = 1
    fitted = np.mean(lam)

    assert np.allclose(report.curvature, curvature)
    assert np.allclose(report.alpha, alpha, atol=1e-12)
    assert np.allclose(report.payment_utility, payment_utility, atol=1e-12)
    assert np.allclose(report.centrality, centrality, atol=1e-11)
    assert report.lambda_by_outcome[1] == pytest.approx(fitted, abs=1e-11)
    expected_resid = np.abs(lam - fitted) / abs(fitted)
    assert np.allclose(report.balance_residuals[:, 1], expected_resid, atol=1e-10)
    assert report.max_relative_residual() > 1e-3  # genuinely unbalanced point
    assert report.l_factor == 1.0


def test_refuses_lambda_fit_when_marginal_revenue_vanishes():
    # Net revenue (v_s minus total payments) constant across outcomes makes
    # the principal's marginal revenue term vanish exactly.
    problem = quadratic_problem(clique(2))
    contract = tp.Contract(np.array([[0.1, 0.6], [0.2, 0.7]]))
    eq = solve(problem, contract)
    report = tp.compute_balance_report(problem, contract, eq)
    assert np.any(eq.actions > 0.0)
    assert abs(report.D_term) < 1e-12
    assert np.all(np.isnan(report.lambda_by_outcome))


# ---------------------------------------------------------------------------
# performance gradient
# ---------------------------------------------------------------------------


def test_single_agent_gradient_is_slope():
    problem = quadratic_problem(tp.Network([[0.0]]))
    contract = success_contract([0.4])
    m = tp.marginal_performance(problem, contract, solve(problem, contract))
    assert np.allclose(m, [[-0.5, 0.5]], atol=1e-10)


def test_l_factor_is_one_without_probability_curvature():
    problem = quadratic_problem(clique(3, 0.6))
    contract = success_contract([0.2, 0.15, 0.1])
    report = tp.compute_balance_report(problem, contract, solve(problem, contract))
    assert report.l_factor == 1.0
    assert np.all(report.d_vector == 0.0)


def test_triangle_logistic_sqrt_gradient_matches_fd():
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    w[0, 2] = w[2, 0] = 0.8
    w[1, 2] = w[2, 1] = 0.6
    problem = tp.Problem(
        n=3,
        production=tp.QuadraticNetworkProduction(tp.Network(w)),
        outcomes=tp.BinaryOutcomeModel(tp.LogisticSuccess(0.7, -0.2)),
        utilities=(tp.SqrtUtility(),) * 3,
        costs=(tp.PowerCost(),) * 3,
    )
    payments = np.array([[0.05, 0.2], [0.04, 0.15], [0.03, 0.1]])
    contract = tp.Contract(payments)
    eq = solve(problem, contract)
    analytic = tp.marginal_performance(problem, contract, eq)
    h = 1e-6
    for i in range(3):
        for s in range(2):
            up, dn = payments.copy(), payments.copy()
            up[i, s] += h
            dn[i, s] -= h
            fd = (
                tp.solve_equilibrium_general(problem, tp.Contract(up), init=eq.actions, tol=1e-13).performance
                - tp.solve_equilibrium_general(problem, tp.Contract(dn), init=eq.actions, tol=1e-13).performance
            ) / (2 * h)
            assert abs(analytic[i, s] - fd) / max(abs(fd), 1e-8) < 1e-5


def test_gradient_fd_battery_small():
    worst = gradient_fd_battery(20, seed=21)
    assert worst < 1e-5


def test_inactive_agent_rows_use_extended_centrality():
    # Pendant agent with zero pay: the gradient row must be finite and
    # positive exactly at the positive-slope outcome.
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    w[1, 2] = w[2, 1] = 0.5
    problem = quadratic_problem(tp.Network(w))
    contract = success_contract([0.2, 0.2, 0.0])
    eq = solve(problem, contract)
    assert eq.actions[2] == 0.0
    m = tp.marginal_performance(problem, contract, eq)
    assert m[2, 1] > 0.0
    assert m[2, 0] == 0.0  # failure outcome has negative slope; corner pins


# ---------------------------------------------------------------------------
# ratio checks
# ---------------------------------------------------------------------------


def test_cross_agent_ratios_vanish_at_symmetric_optimum():
    net = clique(2)
    opt = tp.optimize_quadratic_binary(net, KAPPA_HALF)
    problem = quadratic_problem(net)
    report = tp.compute_balance_report(problem, opt.contract, opt.equilibrium)
    check = tp.check_cross_agent_ratios(report, opt.contract, problem)
    assert check.max_gap < 1e-8


def test_cross_outcome_vacuous_for_binary():
    net = clique(2)
    opt = tp.optimize_quadratic_binary(net, KAPPA_HALF)
    problem = quadratic_problem(net)
    report = tp.compute_balance_report(problem, opt.contract, opt.equilibrium)
    check = tp.check_cross_outcome_ratios(report, opt.contract, opt.equilibrium, problem)
    assert check.gaps == ()
    assert check.max_gap == 0.0
    assert check.slopes_positive


def test_lambda_proportional_to_prob_over_slope():
    out_theta = [0.0, 2.0, 2.5]
    out_shift = [1.5, 0.0, -1.0]
    out_rev = [0.0, 2.0, 3.0]
    problem = softmax_instance(out_theta, out_shift, out_rev, clique(2), tp.SqrtUtility())
    opt = tp.optimize_general(problem)
    report = tp.compute_balance_report(problem, opt.contract, opt.equilibrium)
    probs, dprobs, _ = tp.outcome_probs(problem.outcomes, opt.equilibrium.performance)
    ratios = [
        report.lambda_by_outcome[s] * dprobs[s] / probs[s]
        for s in range(3)
        if np.isfinite(report.lambda_by_outcome[s])
    ]
    assert len(ratios) >= 2
    spread = (max(ratios) - min(ratios)) / abs(np.mean(ratios))
    assert spread < 1e-4


def test_extended_centralities_positive_with_inada_utilities():
    out_theta = [0.0, 2.0, 2.5]
    out_shift = [1.5, 0.0, -1.0]
    out_rev = [0.0, 2.0, 3.0]
    problem = softmax_instance(out_theta, out_shift, out_rev, clique(2), tp.SqrtUtility())
    opt = tp.optimize_general(problem)
    report = tp.compute_balance_report(problem, opt.contract, opt.equilibrium)
    assert np.all(report.centrality_all > 0.0)
