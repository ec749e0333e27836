"""Balance diagnostics at a (contract, equilibrium) pair.

Computes the curvature / productivity / spillover / payment-sensitivity
objects, agent centralities, the analytic performance-derivative matrix
dY/dtau, fitted per-outcome balance constants with residuals, and the
cross-agent / cross-outcome ratio identities that hold at optimal
contracts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    Contract,
    EquilibriumResult,
    Problem,
    outcome_probs,
)

__all__ = [
    "DiagnosticsError",
    "BalanceReport",
    "RatioCheck",
    "compute_balance_report",
    "marginal_performance",
    "check_cross_agent_ratios",
    "check_cross_outcome_ratios",
    "ACTIVITY_TOL",
]

# Actions below this are treated as zero; solver tolerance floor.
ACTIVITY_TOL = 1e-9

# Balance constants are not fitted when the principal's marginal revenue
# term is this close to zero (the first-order condition degenerates).
_D_FLOOR = 1e-12


class DiagnosticsError(RuntimeError):
    pass


@dataclass(frozen=True)
class BalanceReport:
    """All first-order objects at one (contract, equilibrium) pair.

    Matrix-valued fields are restricted to active agents except
    ``centrality_all`` and ``dY_dtau``, which cover every agent (inactive
    agents get the extended construction).  ``lambda_by_outcome`` holds NaN
    where no active agent is paid or where ``D_term`` is too close to zero
    to be meaningful.
    """

    active_agents: tuple
    curvature: np.ndarray        # diag of H, active agents
    alpha: np.ndarray            # normalized marginal productivity, active
    hessian: np.ndarray          # production Hessian on active agents
    payment_utility: np.ndarray  # diag of U, active agents
    centrality: np.ndarray       # active agents
    centrality_all: np.ndarray   # every agent; NaN when curvature vanishes at 0
    dY_dtau: np.ndarray          # (n, n_outcomes)
    l_factor: float
    d_vector: np.ndarray         # active agents
    lambda_by_outcome: np.ndarray
    balance_residuals: np.ndarray  # (n, n_outcomes), NaN where not applicable
    D_term: float

    def max_relative_residual(self) -> float:
        vals = self.balance_residuals[np.isfinite(self.balance_residuals)]
        return float(np.max(vals)) if vals.size else 0.0

    def to_dict(self) -> dict:
        return {
            "active_agents": [int(i) for i in self.active_agents],
            "curvature": self.curvature.tolist(),
            "alpha": self.alpha.tolist(),
            "hessian": self.hessian.tolist(),
            "payment_utility": self.payment_utility.tolist(),
            "centrality": self.centrality.tolist(),
            "centrality_all": self.centrality_all.tolist(),
            "dY_dtau": self.dY_dtau.tolist(),
            "l_factor": float(self.l_factor),
            "d_vector": self.d_vector.tolist(),
            "lambda_by_outcome": self.lambda_by_outcome.tolist(),
            "balance_residuals": self.balance_residuals.tolist(),
            "D_term": float(self.D_term),
        }


@dataclass(frozen=True)
class RatioCheck:
    """Identity gaps for the optimal-contract ratio laws.

    ``gaps`` holds ``(index..., gap)`` tuples; ``max_gap`` is 0 when no pair
    applies (vacuous pass).  ``ranking_ok`` reports the componentwise payment
    ordering for identical strictly-concave-utility pairs;
    ``slopes_positive`` reports whether every paid outcome has a positive
    probability slope at the equilibrium performance.
    """

    gaps: tuple
    max_gap: float
    ranking_ok: bool | None = None
    slopes_positive: bool | None = None


def _marginal_utilities(problem: Problem, payments: np.ndarray) -> np.ndarray:
    return np.array([problem.utilities[i].marginal(payments[i]) for i in range(problem.n)])


class _FirstOrderObjects:
    """Shared assembly for the balance report and the dY/dtau matrix."""

    def __init__(self, problem: Problem, contract: Contract, eq: EquilibriumResult):
        n = problem.n
        a = eq.actions
        y = eq.performance
        payments = contract.payments

        self.problem = problem
        self.contract = contract
        self.eq = eq
        self.active = np.flatnonzero(a > ACTIVITY_TOL)
        self.inactive = np.flatnonzero(a <= ACTIVITY_TOL)

        self.probs, self.dprobs, self.d2probs = outcome_probs(problem.outcomes, y)
        u_levels = np.array([problem.utilities[i].value(payments[i]) for i in range(n)])
        self.u_levels = u_levels
        self.u_marginals = _marginal_utilities(problem, payments)

        self.grad = problem.production.gradient(a)
        self.hess_all = problem.production.hessian(a)
        self.curv_all = np.array([float(problem.costs[i].curvature(a[i])) for i in range(n)])
        # Payment sensitivity: marginal change in expected payment utility as
        # performance rises, holding the contract fixed.
        self.payment_util_all = u_levels @ self.dprobs

        act = self.active
        if act.size == 0:
            raise DiagnosticsError("no active agents; balance objects are undefined")
        if np.any(self.curv_all[act] <= 0.0):
            raise DiagnosticsError("cost curvature must be positive at active actions")

        # Response system on active agents: rows of [H - U G].
        h_act = self.curv_all[act]
        u_act = self.payment_util_all[act]
        g_act = self.hess_all[np.ix_(act, act)]
        m_act = np.diag(h_act) - u_act[:, None] * g_act
        grad_act = self.grad[act]
        try:
            # w' = grad' [H - U G]^{-1}; w_i * grad_i is the
            # productivity-times-centrality product for agent i.
            self.w_act = np.linalg.solve(m_act.T, grad_act)
        except np.linalg.LinAlgError as exc:
            spill = np.diag(1.0 / np.sqrt(h_act)) @ (u_act[:, None] * g_act) @ np.diag(1.0 / np.sqrt(h_act))
            radius = float(np.max(np.abs(np.linalg.eigvals(spill))))
            raise DiagnosticsError(
                f"singular response system (spillover spectral radius {radius:.6g})"
            ) from exc

        # Symmetrized objects for the report.
        self.curvature = h_act
        self.alpha = grad_act / np.sqrt(h_act)
        self.hessian = g_act
        self.payment_utility = u_act
        spill = (u_act / np.sqrt(h_act))[:, None] * g_act / np.sqrt(h_act)[None, :]
        self.centrality = np.linalg.solve((np.eye(act.size) - spill).T, self.alpha)

        # Dampening factor from the probability curvature feedback.
        d_act = grad_act * (u_levels[act] @ self.d2probs)
        self.d_vector = d_act
        denom = 1.0 - float(self.w_act @ d_act)
        if abs(denom) < 1e-14:
            raise DiagnosticsError("probability-curvature feedback is singular (l factor blows up)")
        self.l_factor = 1.0 / denom

        # Extended products for inactive agents, block-solved so that a
        # vanishing curvature at zero action stays finite where possible.
        self.w_all = np.zeros(n)
        self.w_all[act] = self.w_act
        strict_corner = np.zeros(n, dtype=bool)
        if self.inactive.size:
            for j in self.inactive:
                if self.payment_util_all[j] < -1e-15:
                    strict_corner[j] = True  # paid only at unfavorable outcomes
            cross = self.grad[self.inactive] + (
                (self.w_act * u_act) @ self.hess_all[np.ix_(act, self.inactive)]
            )
            with np.errstate(divide="ignore", invalid="ignore"):
                unbounded = np.where(cross == 0.0, 0.0, np.inf * np.sign(cross))
                w_in = np.where(
                    self.curv_all[self.inactive] > 0.0,
                    cross / np.maximum(self.curv_all[self.inactive], 1e-300),
                    unbounded,
                )
            self.w_all[self.inactive] = w_in
        self.strict_corner = strict_corner

        self.products_all = self.w_all * self.grad  # alpha_i * c_i for every agent

        # Full centrality vector in the symmetrized convention, where defined.
        self.centrality_all = np.full(n, np.nan)
        self.centrality_all[act] = self.centrality
        if self.inactive.size and np.all(self.curv_all[self.inactive] > 0.0):
            sq = np.sqrt(self.curv_all)
            alpha_all = self.grad / sq
            u_ext = self.payment_util_all.copy()
            u_ext[self.inactive] = 0.0
            spill_all = (u_ext / sq)[:, None] * self.hess_all / sq[None, :]
            try:
                self.centrality_all = np.linalg.solve((np.eye(n) - spill_all).T, alpha_all)
            except np.linalg.LinAlgError:
                pass

        self.D_term = float(
            (problem.outcomes.revenues - payments.sum(axis=0)) @ self.dprobs
        )

    def performance_gradient(self) -> np.ndarray:
        """dY/dtau_i(s) for every agent and outcome.

        Active agents use the analytic first-order response.  Unpaid
        inactive agents sit at a degenerate corner: raising a payment at an
        outcome with positive probability slope moves them (one-sided
        derivative given by the same formula), while other perturbations
        leave them pinned.  Inactive agents paid only at unfavorable
        outcomes are at a strict corner and do not respond at all.
        """
        n = self.problem.n
        S = self.probs.size
        out = np.zeros((n, S))
        for i in range(n):
            if i in self.inactive and self.strict_corner[i]:
                continue
            for s in range(S):
                if i in self.inactive and self.dprobs[s] <= 0.0:
                    continue
                out[i, s] = (
                    self.l_factor
                    * self.dprobs[s]
                    * self.products_all[i]
                    * self.u_marginals[i, s]
                )
        return out

    def fit_lambdas(self):
        payments = self.contract.payments
        S = self.probs.size
        lam = np.full(S, np.nan)
        resid = np.full((self.problem.n, S), np.nan)
        if abs(self.D_term) < _D_FLOOR:
            return lam, resid
        for s in range(S):
            paid = [i for i in self.active if payments[i, s] > 0.0]
            if not paid:
                continue
            vals = np.array([self.products_all[i] * self.u_marginals[i, s] for i in paid])
            lam[s] = float(np.mean(vals))
            scale = abs(lam[s]) if lam[s] != 0.0 else 1.0
            for i, v in zip(paid, vals):
                resid[i, s] = abs(v - lam[s]) / scale
        return lam, resid


def compute_balance_report(problem: Problem, contract: Contract, eq: EquilibriumResult) -> BalanceReport:
    """Assemble every balance object at the given equilibrium."""
    obj = _FirstOrderObjects(problem, contract, eq)
    lam, resid = obj.fit_lambdas()
    return BalanceReport(
        active_agents=tuple(int(i) for i in obj.active),
        curvature=obj.curvature,
        alpha=obj.alpha,
        hessian=obj.hessian,
        payment_utility=obj.payment_utility,
        centrality=obj.centrality,
        centrality_all=obj.centrality_all,
        dY_dtau=obj.performance_gradient(),
        l_factor=obj.l_factor,
        d_vector=obj.d_vector,
        lambda_by_outcome=lam,
        balance_residuals=resid,
        D_term=obj.D_term,
    )


def marginal_performance(problem: Problem, contract: Contract, eq: EquilibriumResult) -> np.ndarray:
    """Analytic dY/dtau_i(s) matrix, shape (n, n_outcomes)."""
    return _FirstOrderObjects(problem, contract, eq).performance_gradient()


def check_cross_agent_ratios(report: BalanceReport, contract: Contract, problem: Problem) -> RatioCheck:
    """Marginal-utility ratio law across co-paid agents, plus the payment
    ranking for identical strictly concave utility pairs."""
    payments = contract.payments
    act = list(report.active_agents)
    products = {i: report.alpha[k] * report.centrality[k] for k, i in enumerate(act)}
    marginals = _marginal_utilities(problem, payments)

    gaps = []
    for s in range(payments.shape[1]):
        paid = [i for i in act if payments[i, s] > 0.0]
        for a_pos in range(len(paid)):
            for b_pos in range(a_pos + 1, len(paid)):
                i, j = paid[a_pos], paid[b_pos]
                lhs = marginals[i, s] / marginals[j, s]
                rhs = products[j] / products[i]
                gaps.append((i, j, s, abs(lhs - rhs)))

    ranking_ok = None
    comparable_pairs = []
    for a_pos in range(len(act)):
        for b_pos in range(a_pos + 1, len(act)):
            i, j = act[a_pos], act[b_pos]
            ui, uj = problem.utilities[i], problem.utilities[j]
            if ui != uj or type(ui).__name__ == "LinearUtility":
                continue
            le = bool(np.all(payments[i] <= payments[j] + 1e-12))
            ge = bool(np.all(payments[i] >= payments[j] - 1e-12))
            comparable_pairs.append(le or ge)
    if comparable_pairs:
        ranking_ok = all(comparable_pairs)

    max_gap = max((g[-1] for g in gaps), default=0.0)
    return RatioCheck(gaps=tuple(gaps), max_gap=float(max_gap), ranking_ok=ranking_ok)


def check_cross_outcome_ratios(
    report: BalanceReport, contract: Contract, eq: EquilibriumResult, problem: Problem
) -> RatioCheck:
    """Per-agent marginal-utility ratios across paid outcome pairs, and the
    positive-slope requirement at every paid outcome."""
    payments = contract.payments
    probs, dprobs, _ = outcome_probs(problem.outcomes, eq.performance)
    marginals = _marginal_utilities(problem, payments)

    slopes_positive = True
    gaps = []
    for i in report.active_agents:
        paid = [s for s in range(payments.shape[1]) if payments[i, s] > 0.0]
        for s in paid:
            if dprobs[s] <= 0.0:
                slopes_positive = False
        for a_pos in range(len(paid)):
            for b_pos in range(a_pos + 1, len(paid)):
                s1, s2 = paid[a_pos], paid[b_pos]
                lhs = marginals[i, s1] / marginals[i, s2]
                rhs = (probs[s1] / dprobs[s1]) * (dprobs[s2] / probs[s2])
                gaps.append((i, s1, s2, abs(lhs - rhs)))

    max_gap = max((g[-1] for g in gaps), default=0.0)
    return RatioCheck(gaps=tuple(gaps), max_gap=float(max_gap), slopes_positive=slopes_positive)
