"""Optimal contracts four ways.

The quadratic-network closed form, the Cobb-Douglas and CES transformed
closed forms, and the projected-gradient optimizer all solve the same kind
of problem; where their domains overlap they agree.
"""

import numpy as np

import teampay as tp

p = tp.LinearCappedSuccess(0.5)

# Quadratic network: active-set enumeration plus a one-dimensional total
# share search under balanced neighborhood equity.
w = np.zeros((3, 3))
w[0, 1] = w[1, 0] = 1.0
w[0, 2] = w[2, 0] = 0.8
w[1, 2] = w[2, 1] = 0.6
network = tp.Network(w)
closed = tp.optimize_quadratic_binary(network, p)
print("quadratic closed form")
print("  payments       ", closed.contract.payments[:, 1])
print("  equity level   ", closed.balance_constant, "(G tau constant across active agents)")
print("  payoff         ", closed.principal_payoff)

general = tp.optimize_general(tp.quadratic_binary_problem(network, p))
print("gradient optimizer payoff gap:", abs(general.principal_payoff - closed.principal_payoff))

# Cobb-Douglas: payments proportional to factor shares.
cd = tp.closed_form_cobb_douglas([1.0, 2.0], tp.PowerSuccess(5.0))
print("cobb-douglas payments", cd.contract.payments[:, 1], "(ratio 2 by the factor shares)")

# CES: payments proportional to shares raised to 1/(1 - rho); strong
# complements (rho << 0) approach equal pay.
for rho in (0.5, -2.0, -20.0):
    ces = tp.closed_form_ces([1.0, 4.0], rho, 1.0, tp.PowerSuccess(2.0))
    tau = ces.contract.payments[:, 1]
    print(f"ces rho={rho:+.1f}: ratio {tau[1] / tau[0]:.4f} (formula {4.0 ** (1 / (1 - rho)):.4f})")

# The total share under a linear success curve is the root of a cubic,
# strictly inside (1/2, 1) and increasing in complementarity strength.
print("total share root beta=1:", tp.total_share_root(1.0, 0.5, 2.0))
print("total share root beta=1.5:", tp.total_share_root(1.5, 0.5, 2.0))
