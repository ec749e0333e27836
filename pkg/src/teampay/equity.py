"""Equity contracts: fixed revenue shares across outcomes.

An equity contract pays agent i the amount ``shares[i] * revenue_s`` at
outcome s.  Equilibria and the share optimizer reuse the unrestricted
machinery through the linear map from shares to payments, so there is a
single gradient implementation to validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contract_opt import (
    OptimizationError,
    OptimizerOptions,
    _payoff_gradient,
    _principal_payoff,
    _solve_eq,
    _solve_eq_selected,
    optimize_general,
)
from .diagnostics import ACTIVITY_TOL, DiagnosticsError, _FirstOrderObjects
from .equilibrium import EquilibriumError, solve_equilibrium_general
from .model import Contract, EquilibriumResult, EquityContract, ModelError, Problem

__all__ = [
    "EquityResult",
    "induced_contract",
    "solve_equity_equilibrium",
    "optimize_equity",
]


def induced_contract(problem: Problem, sigma: EquityContract) -> Contract:
    """Per-outcome payments implied by the shares: ``tau[i, s] = sigma_i v_s``."""
    if sigma.n != problem.n:
        raise ModelError("share vector length does not match the problem")
    return Contract(np.outer(sigma.shares, problem.outcomes.revenues))


def solve_equity_equilibrium(problem: Problem, sigma: EquityContract, init=None, **kwargs) -> EquilibriumResult:
    """Effort equilibrium under an equity contract (delegates to the general solver)."""
    return solve_equilibrium_general(problem, induced_contract(problem, sigma), init=init, **kwargs)


@dataclass(frozen=True)
class EquityResult:
    contract: EquityContract
    equilibrium: EquilibriumResult
    principal_payoff: float
    balance_values: np.ndarray
    balance_residual: float
    kkt_residual: float
    unrestricted_payoff: float | None = None

    def to_dict(self) -> dict:
        return {
            "shares": [float(x) for x in self.contract.shares],
            "equilibrium": self.equilibrium.to_dict(),
            "principal_payoff": float(self.principal_payoff),
            "balance_values": [float(x) for x in self.balance_values],
            "balance_residual": float(self.balance_residual),
            "kkt_residual": float(self.kkt_residual),
            "unrestricted_payoff": (
                None if self.unrestricted_payoff is None else float(self.unrestricted_payoff)
            ),
        }


def _project_shares(sigma: np.ndarray) -> np.ndarray:
    """Project onto { sigma >= 0, sum(sigma) <= 1 }."""
    sigma = np.maximum(sigma, 0.0)
    total = float(sigma.sum())
    if total <= 1.0:
        return sigma
    # Euclidean projection onto the probability simplex.
    u = np.sort(sigma)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, sigma.size + 1)
    cond = u - css / ks > 0
    k = int(np.max(np.flatnonzero(cond))) + 1
    theta = css[k - 1] / k
    return np.maximum(sigma - theta, 0.0)


def _share_gradient(problem: Problem, sigma: np.ndarray, eq: EquilibriumResult) -> np.ndarray:
    contract = induced_contract(problem, EquityContract(sigma))
    grad_tau = _payoff_gradient(problem, contract, eq)
    # Chain rule through tau[i, s] = sigma_i v_s; zero-revenue outcomes have
    # structurally pinned payments and drop out.
    return grad_tau @ problem.outcomes.revenues


def _balance_values(problem: Problem, sigma: np.ndarray, eq: EquilibriumResult) -> np.ndarray:
    contract = induced_contract(problem, EquityContract(sigma))
    obj = _FirstOrderObjects(problem, contract, eq)
    v = problem.outcomes.revenues
    vals = np.zeros(problem.n)
    for i in range(problem.n):
        # Zero-revenue outcomes have structurally pinned payments; their
        # (possibly unbounded) marginal utilities contribute nothing.
        with np.errstate(invalid="ignore"):
            terms = np.where(v > 0.0, obj.dprobs * v * problem.utilities[i].marginal(sigma[i] * v), 0.0)
        vals[i] = obj.products_all[i] * float(np.nansum(terms))
    return vals


def optimize_equity(
    problem: Problem,
    options: OptimizerOptions | None = None,
    *,
    compare_unrestricted: bool = True,
) -> EquityResult:
    """Projected gradient ascent on the equity payoff
    ``(1 - sum(sigma)) * sum_s v_s P_s(Y*)``.

    Reports the per-agent balance values (whose spread across positive-share
    agents is the optimality diagnostic) and, by default, the unrestricted
    optimizer's payoff side by side.
    """
    options = options or OptimizerOptions()
    n = problem.n

    seeds = [np.full(n, x / n) for x in (0.3, 0.1, 0.6)]
    for i in range(max(0, options.starts - len(seeds))):
        s = np.full(n, 0.02 / n)
        s[i % n] = 0.4
        seeds.append(s)
    seeds = seeds[: options.starts]

    runs = []
    failures = []
    for sigma0 in seeds:
        try:
            run = _ascend_shares(problem, sigma0, options)
        except (EquilibriumError, DiagnosticsError, ModelError) as exc:
            failures.append(str(exc))
            continue
        if run is not None:
            runs.append(run)
    if not runs:
        raise OptimizationError(f"no equity start converged (failures: {failures[:3]})")

    best_pay = max(r[2] for r in runs)
    ties = [r for r in runs if r[2] >= best_pay - 1e-12]
    ties.sort(key=lambda r: tuple(r[0]))
    sigma, eq, payoff, kkt = ties[0]

    vals = _balance_values(problem, sigma, eq)
    positive = np.flatnonzero(sigma > ACTIVITY_TOL)
    if positive.size:
        ref = vals[positive]
        scale = max(abs(float(np.mean(ref))), 1e-12)
        balance_residual = float((np.max(ref) - np.min(ref)) / scale)
    else:
        balance_residual = 0.0

    unrestricted = None
    if compare_unrestricted:
        unrestricted = optimize_general(problem, options=options).principal_payoff

    return EquityResult(
        contract=EquityContract(sigma),
        equilibrium=eq,
        principal_payoff=payoff,
        balance_values=vals,
        balance_residual=balance_residual,
        kkt_residual=kkt,
        unrestricted_payoff=unrestricted,
    )


def _equity_payoff(problem: Problem, sigma: np.ndarray, probs: np.ndarray) -> float:
    contract = induced_contract(problem, EquityContract(sigma))
    return _principal_payoff(problem, contract, probs)


def _ascend_shares(problem: Problem, sigma0: np.ndarray, options: OptimizerOptions):
    sigma = _project_shares(sigma0.copy())
    eq = _solve_eq_selected(problem, induced_contract(problem, EquityContract(sigma)), tol=options.eq_tol)
    payoff = _equity_payoff(problem, sigma, eq.probs)
    step = options.step_init
    for _ in range(options.max_iters):
        grad = _share_gradient(problem, sigma, eq)
        viol = np.where(grad > 0.0, grad, np.minimum(sigma, -grad))
        kkt = float(np.max(viol))
        if kkt <= options.tol:
            return sigma, eq, payoff, kkt
        accepted = False
        for _ in range(options.max_backtracks):
            trial = _project_shares(sigma + step * grad)
            delta = trial - sigma
            if not np.any(delta):
                break
            try:
                eq_t = _solve_eq(problem, induced_contract(problem, EquityContract(trial)),
                                 warm=eq.actions, tol=options.eq_tol)
            except EquilibriumError:
                step *= 0.5
                continue
            pay_t = _equity_payoff(problem, trial, eq_t.probs)
            if pay_t >= payoff + options.armijo * float(grad @ delta):
                sigma, eq, payoff = trial, eq_t, pay_t
                step = min(step * 1.3, 1e3)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    grad = _share_gradient(problem, sigma, eq)
    viol = np.where(grad > 0.0, grad, np.minimum(sigma, -grad))
    kkt = float(np.max(viol))
    if kkt <= options.tol:
        return sigma, eq, payoff, kkt
    return None
