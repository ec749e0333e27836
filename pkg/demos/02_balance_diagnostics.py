"""The balance diagnostics: productivity, centrality, and marginal utility.

At an optimal contract the product
    productivity_i * centrality_i * marginal_utility_i
is equal across all agents paid at an outcome.  This demo evaluates the
report at a deliberately unbalanced contract and at the optimizer's output,
and shows the analytic performance-derivative matrix against finite
differences.
"""

import teampay as tp

network = tp.Network([[0.0, 1.0], [1.0, 0.0]])
p = tp.LinearCappedSuccess(0.5)
problem = tp.quadratic_binary_problem(network, p)

# An unbalanced contract: agent 0 is overpaid relative to agent 1.
contract = tp.Contract([[0.0, 0.3], [0.0, 0.1]])
eq = tp.solve_equilibrium_general(problem, contract, tol=1e-12)
report = tp.compute_balance_report(problem, contract, eq)
print("unbalanced contract")
print("  alpha       ", report.alpha)
print("  centrality  ", report.centrality)
print("  products    ", report.alpha * report.centrality)
print("  max residual", report.max_relative_residual())

# The same report at the optimum: products equalize and residuals vanish.
opt = tp.optimize_quadratic_binary(network, p)
report_opt = tp.compute_balance_report(problem, opt.contract, opt.equilibrium)
print("optimal contract")
print("  products    ", report_opt.alpha * report_opt.centrality)
print("  max residual", report_opt.max_relative_residual())

# dY/dtau drives the optimizer's gradient; check one entry by re-solving.
grad = tp.marginal_performance(problem, contract, eq)
h = 1e-6
up = contract.payments.copy()
up[0, 1] += h
dn = contract.payments.copy()
dn[0, 1] -= h
fd = (
    tp.solve_equilibrium_general(problem, tp.Contract(up), init=eq.actions, tol=1e-13).performance
    - tp.solve_equilibrium_general(problem, tp.Contract(dn), init=eq.actions, tol=1e-13).performance
) / (2 * h)
print("dY/dtau analytic vs finite difference:", grad[0, 1], "vs", fd)
