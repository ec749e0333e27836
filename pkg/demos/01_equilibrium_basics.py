"""Effort-game equilibria under a fixed contract.

Builds the two-agent complementarity clique, solves the equilibrium with
the specialized quadratic-binary solver, and cross-checks it against both
the general best-response solver and the independent grid-argmax oracle.
"""

import numpy as np

import teampay as tp

# Two agents, complementarity weight 1, success probability P(Y) = 0.5 Y.
network = tp.Network([[0.0, 1.0], [1.0, 0.0]])
p = tp.LinearCappedSuccess(0.5)

# Pay each agent 0.25 on success.  The equilibrium is hand-checkable:
# a_i = 1/7 and Y* = 15/49.
tau = np.array([0.25, 0.25])
eq = tp.solve_equilibrium_quadratic_binary(network, tau, p)
print("specialized solver")
print("  actions      ", eq.actions, "(exact: 1/7 =", 1 / 7, ")")
print("  performance  ", eq.performance, "(exact: 15/49 =", 15 / 49, ")")
print("  spectral margin", eq.spectral_margin)

# The same instance through the general solver (works for any production /
# outcome / utility / cost combination).
problem = tp.quadratic_binary_problem(network, p)
contract = tp.Contract(np.column_stack([np.zeros(2), tau]))
eq_general = tp.solve_equilibrium_general(problem, contract)
print("general solver gap:", np.max(np.abs(eq_general.actions - eq.actions)))

# And through the grid-argmax oracle, which shares no code with the
# analytic solvers.
eq_oracle = tp.best_response_iterate(problem, contract, tol=1e-10)
print("oracle gap:        ", np.max(np.abs(eq_oracle.actions - eq.actions)))

# Raising any complementarity weight weakly raises equilibrium performance.
bumped = network.with_edge(0, 1, 1.2)
eq_bumped = tp.solve_equilibrium_quadratic_binary(bumped, tau, p)
print("performance after strengthening the link:", eq_bumped.performance, ">=", eq.performance)
