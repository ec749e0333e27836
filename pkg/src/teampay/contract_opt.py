"""Optimal contract search.

Four routes: a projected-gradient ascent with the analytic payoff gradient
(any problem), a closed form for the quadratic-network binary environment
(active-set enumeration plus a one-dimensional total-share search under the
balanced-neighborhood-equity structure), and transformed closed forms for
Cobb-Douglas and CES production.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .diagnostics import ACTIVITY_TOL, DiagnosticsError, _FirstOrderObjects, compute_balance_report
from .equilibrium import (
    EquilibriumError,
    solve_equilibrium_general,
    solve_equilibrium_quadratic_binary,
)
from .model import (
    BinaryOutcomeModel,
    CapExceededError,
    CESProduction,
    CobbDouglasProduction,
    Contract,
    EquilibriumResult,
    LinearCappedSuccess,
    LinearUtility,
    ModelError,
    Network,
    PowerCost,
    Problem,
    QuadraticNetworkProduction,
    SuccessProbability,
)

__all__ = [
    "OptimizationError",
    "ActiveSetError",
    "OptimizerOptions",
    "OptimalContractResult",
    "ActiveSetCandidate",
    "optimize_general",
    "optimize_quadratic_binary",
    "optimal_active_set",
    "closed_form_cobb_douglas",
    "closed_form_ces",
    "total_share_root",
    "quadratic_binary_problem",
]

_BIG_GRADIENT = 1e6  # stand-in for unbounded marginal utility at a zero payment


class OptimizationError(RuntimeError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class ActiveSetError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerOptions:
    tol: float = 1e-8            # projected-gradient KKT residual
    max_iters: int = 4000
    starts: int = 8
    step_init: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    active_set_cap: int = 16
    golden_tol: float = 1e-11
    prescan: int = 64
    eq_tol: float = 1e-11


@dataclass(frozen=True)
class OptimalContractResult:
    contract: Contract
    equilibrium: EquilibriumResult
    principal_payoff: float
    active_set: tuple
    kkt_residual: float
    method: str
    balance_constant: float | None = None
    neighborhood_action_constant: float | None = None
    max_balance_residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "contract": {"payments": [[float(x) for x in row] for row in self.contract.payments]},
            "equilibrium": self.equilibrium.to_dict(),
            "principal_payoff": float(self.principal_payoff),
            "active_set": [int(i) for i in self.active_set],
            "kkt_residual": float(self.kkt_residual),
            "method": self.method,
            "balance_constant": None if self.balance_constant is None else float(self.balance_constant),
            "neighborhood_action_constant": (
                None if self.neighborhood_action_constant is None
                else float(self.neighborhood_action_constant)
            ),
            "max_balance_residual": (
                None if self.max_balance_residual is None else float(self.max_balance_residual)
            ),
        }


@dataclass(frozen=True)
class ActiveSetCandidate:
    """Candidate active set with its balance constant per unit total share."""

    agents: tuple
    share_rate: float
    direction: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).copy()
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def quadratic_binary_problem(network: Network, p: SuccessProbability, standalone=None) -> Problem:
    """The canonical environment: quadratic-network production, success or
    failure outcome, linear money utility, unit quadratic effort costs."""
    n = network.n
    return Problem(
        n=n,
        production=QuadraticNetworkProduction(network, standalone),
        outcomes=BinaryOutcomeModel(p),
        utilities=tuple(LinearUtility() for _ in range(n)),
        costs=tuple(PowerCost(1.0, 2.0) for _ in range(n)),
    )


def _is_quadratic_binary(problem: Problem) -> bool:
    return (
        isinstance(problem.production, QuadraticNetworkProduction)
        and isinstance(problem.outcomes, BinaryOutcomeModel)
        and all(isinstance(u, LinearUtility) for u in problem.utilities)
        and all(c.scale == 1.0 and c.exponent == 2.0 for c in problem.costs)
        and problem.outcomes.success.concave_on_nonneg()
    )


def _solve_eq(problem: Problem, contract: Contract, warm=None, *, tol: float = 1e-11) -> EquilibriumResult:
    """Equilibrium dispatcher: the quadratic-binary fast path applies whenever
    effective success incentives (success minus failure pay) are nonnegative,
    since equilibria depend on payments only through that difference."""
    if _is_quadratic_binary(problem):
        eff = contract.payments[:, 1] - contract.payments[:, 0]
        if np.all(eff >= 0.0):
            prod = problem.production
            return solve_equilibrium_quadratic_binary(
                prod.network, eff, problem.outcomes.success, prod.standalone
            )
    return solve_equilibrium_general(problem, contract, init=warm, tol=max(tol, 1e-12))


def _principal_payoff(problem: Problem, contract: Contract, probs: np.ndarray) -> float:
    return float((problem.outcomes.revenues - contract.payments.sum(axis=0)) @ probs)


def _solve_eq_selected(problem: Problem, contract: Contract, *, tol: float = 1e-11) -> EquilibriumResult:
    """Equilibrium with principal-best selection across several dynamics
    initializations.  Production functions with strong joint complementarity
    can pair a dormant equilibrium with an active one; the principal-optimal
    selection keeps whichever gives the higher payoff."""
    if _is_quadratic_binary(problem):
        return _solve_eq(problem, contract, tol=tol)
    n = problem.n
    best = None
    last_error = None
    for init in (np.full(n, 0.1), np.ones(n), np.full(n, 3.0)):
        try:
            eq = solve_equilibrium_general(problem, contract, init=init, tol=max(tol, 1e-12))
        except EquilibriumError as exc:
            last_error = exc
            continue
        payoff = _principal_payoff(problem, contract, eq.probs)
        if best is None or payoff > best[0]:
            best = (payoff, eq)
    if best is None:
        raise last_error if last_error is not None else EquilibriumError("no equilibrium found")
    return best[1]


def _payoff_gradient(problem: Problem, contract: Contract, eq: EquilibriumResult) -> np.ndarray:
    """Analytic gradient of the principal payoff in every payment cell."""
    probs, dprobs, _ = problem.outcomes.probs_derivs(eq.performance)
    d_term = float((problem.outcomes.revenues - contract.payments.sum(axis=0)) @ dprobs)
    if np.any(eq.actions > ACTIVITY_TOL):
        obj = _FirstOrderObjects(problem, contract, eq)
        dy = obj.performance_gradient()
    else:
        # Dormant team: every agent sits at the degenerate corner, so the
        # first incentive round has no spillover feedback.
        grad0 = problem.production.gradient(np.zeros(problem.n))
        curv0 = np.array([float(problem.costs[i].curvature(0.0)) for i in range(problem.n)])
        marg = np.array([problem.utilities[i].marginal(contract.payments[i]) for i in range(problem.n)])
        with np.errstate(invalid="ignore"):
            dy = np.where(
                dprobs[None, :] > 0.0, (grad0**2 / curv0)[:, None] * dprobs[None, :] * marg, 0.0
            )
        dy = np.nan_to_num(dy, nan=0.0, posinf=np.inf, neginf=-np.inf)
    grad = d_term * dy - probs[None, :]
    # Unbounded entries (marginal utility at a zero payment) keep their sign
    # but are capped near the finite entries' scale, so one runaway
    # coordinate cannot starve the line search.
    finite = grad[np.isfinite(grad)]
    cap = min(_BIG_GRADIENT, 10.0 * (1.0 + (np.max(np.abs(finite)) if finite.size else 1.0)))
    return np.nan_to_num(grad, nan=0.0, posinf=cap, neginf=-cap)


def _kkt_residual(tau: np.ndarray, grad: np.ndarray) -> float:
    viol = np.where(grad > 0.0, grad, np.minimum(tau, -grad))
    return float(np.max(viol)) if viol.size else 0.0


def _balance_residual_or_none(problem, contract, eq) -> float | None:
    try:
        return compute_balance_report(problem, contract, eq).max_relative_residual()
    except DiagnosticsError:
        return None


# ---------------------------------------------------------------------------
# projected gradient ascent
# ---------------------------------------------------------------------------


def _seed_contracts(problem: Problem, starts: int) -> list:
    """Deterministic starts: revenue-proportional contracts at several scales
    (so every seed carries outcome-contingent incentive) plus per-agent
    concentrated variants."""
    n = problem.n
    v = np.asarray(problem.outcomes.revenues, dtype=float)
    direction = v / max(float(np.max(v)), 1e-12) if np.max(v) > 0 else np.ones_like(v)
    seeds = []
    for scale in (0.25, 0.05, 0.5, 0.9):
        seeds.append(np.tile(scale * direction / n, (n, 1)))
    # Productivity-weighted seeds: strongly complementary production (e.g.
    # multiplicative) has no gradient signal at the dormant equilibrium, so
    # at least one seed must start inside the live region with a sensible
    # cross-agent split.
    try:
        marginal = problem.production.gradient(np.ones(n))
        if np.all(np.isfinite(marginal)) and np.all(marginal > 0.0):
            split = marginal / float(np.sum(marginal))
            for scale in (0.9, 0.5):
                seeds.append(np.outer(split, scale * direction))
    except ModelError:
        pass
    for i in range(max(0, starts - len(seeds))):
        tau = np.tile(0.02 * direction / n, (n, 1))
        tau[i % n] = 0.5 * direction
        seeds.append(tau)
    return seeds[:starts]


def _polish_support(problem: Problem, tau: np.ndarray, eq: EquilibriumResult, options: OptimizerOptions):
    """Newton refinement of the stationarity system on the positive support.

    Projected gradient stalls once line-search gains sink below the payoff's
    equilibrium-solve noise; solving grad = 0 on the support with a
    finite-difference Jacobian of the analytic gradient pushes the KKT
    residual a few more orders down.
    """
    shape = tau.shape
    support = np.flatnonzero(tau.ravel() > 1e-7)
    if support.size == 0:
        return tau, eq
    x = tau.ravel().copy()
    for _ in range(12):
        g_full = _payoff_gradient(problem, Contract(x.reshape(shape)), eq).ravel()
        g = g_full[support]
        if np.max(np.abs(g)) <= 0.25 * options.tol:
            break
        h = 1e-6 * np.maximum(1.0, np.abs(x[support]))
        jac = np.empty((support.size, support.size))
        for col, b in enumerate(support):
            xp = x.copy()
            xp[b] += h[col]
            try:
                eq_p = _solve_eq(problem, Contract(xp.reshape(shape)), warm=eq.actions, tol=options.eq_tol)
            except (EquilibriumError, CapExceededError):
                return x.reshape(shape), eq
            gp = _payoff_gradient(problem, Contract(xp.reshape(shape)), eq_p).ravel()
            jac[:, col] = (gp[support] - g) / h[col]
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        limit = 0.2 * max(1.0, float(np.max(np.abs(x[support]))))
        scale = min(1.0, limit / max(float(np.max(np.abs(delta))), 1e-300))
        x_new = x.copy()
        x_new[support] = np.maximum(0.0, x[support] + scale * delta)
        try:
            eq_new = _solve_eq(problem, Contract(x_new.reshape(shape)), warm=eq.actions, tol=options.eq_tol)
        except (EquilibriumError, CapExceededError):
            break
        x, eq = x_new, eq_new
    return x.reshape(shape), eq


def _ascend(problem: Problem, tau0: np.ndarray, options: OptimizerOptions, known=None):
    tau = tau0.copy()
    eq = _solve_eq_selected(problem, Contract(tau), tol=options.eq_tol)
    payoff = _principal_payoff(problem, Contract(tau), eq.probs)
    step = options.step_init
    kkt = np.inf
    prev = None  # (tau, grad) for the Barzilai-Borwein step length
    polish_gate = 1e-3
    for _ in range(options.max_iters):
        # A start homing in on an optimum another start already certified
        # can stop; re-running the same endgame is pure waste.
        if known:
            for run in known:
                if (
                    float(np.max(np.abs(tau - run[0]))) < 1e-2 * (1.0 + float(np.max(run[0])))
                    and payoff >= run[2] - 1e-7 * (1.0 + abs(run[2]))
                ):
                    return run
        grad = _payoff_gradient(problem, Contract(tau), eq)
        kkt = _kkt_residual(tau, grad)
        if kkt <= options.tol:
            return tau, eq, payoff, kkt, True
        if kkt <= polish_gate:
            tau_p, eq_p = _polish_support(problem, tau, eq, options)
            grad_p = _payoff_gradient(problem, Contract(tau_p), eq_p)
            kkt_p = _kkt_residual(tau_p, grad_p)
            if kkt_p <= options.tol:
                payoff_p = _principal_payoff(problem, Contract(tau_p), eq_p.probs)
                return tau_p, eq_p, payoff_p, kkt_p, True
            polish_gate = min(polish_gate / 30.0, kkt / 30.0)
        if prev is not None:
            # Barzilai-Borwein step over the free coordinates only; entries
            # pinned at the zero bound carry capped gradients whose jitter
            # would poison the quotient.
            free = ~((tau.ravel() == 0.0) & (grad.ravel() <= 0.0))
            d_tau = (tau - prev[0]).ravel()[free]
            d_grad = (grad - prev[1]).ravel()[free]
            denom = float(d_grad @ d_grad)
            if denom > 0.0:
                bb = abs(float(d_tau @ d_grad)) / denom
                if np.isfinite(bb) and bb > 0.0:
                    step = min(max(bb, 1e-12), 1e3)
        prev = (tau.copy(), grad.copy())
        accepted = False
        for _ in range(options.max_backtracks):
            trial = np.maximum(0.0, tau + step * grad)
            delta = trial - tau
            if not np.any(delta):
                break
            try:
                eq_t = _solve_eq(problem, Contract(trial), warm=eq.actions, tol=options.eq_tol)
            except (EquilibriumError, CapExceededError):
                step *= 0.5
                continue
            pay_t = _principal_payoff(problem, Contract(trial), eq_t.probs)
            if pay_t >= payoff + options.armijo * float(np.sum(grad * delta)):
                tau, eq, payoff = trial, eq_t, pay_t
                step = min(step * 1.3, 1e3)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    grad = _payoff_gradient(problem, Contract(tau), eq)
    kkt = _kkt_residual(tau, grad)
    if kkt > options.tol:
        tau, eq = _polish_support(problem, tau, eq, options)
        payoff = _principal_payoff(problem, Contract(tau), eq.probs)
        grad = _payoff_gradient(problem, Contract(tau), eq)
        kkt = _kkt_residual(tau, grad)
    return tau, eq, payoff, kkt, kkt <= options.tol


def optimize_general(problem: Problem, starts: int | None = None, options: OptimizerOptions | None = None) -> OptimalContractResult:
    """Multi-start projected gradient ascent on the principal payoff.

    Deterministic seeds (uniform contracts at three scales plus per-agent
    concentrated ones); Armijo backtracking line search; the best converged
    local optimum wins, with payoff ties broken toward the lexicographically
    smallest contract.
    """
    options = options or OptimizerOptions()
    if starts is None:
        starts = options.starts

    runs = []
    failures = []
    best_effort = None
    seen_seeds = []
    for tau0 in _seed_contracts(problem, starts):
        if any(np.array_equal(tau0, s) for s in seen_seeds):
            continue
        seen_seeds.append(tau0)
        try:
            tau, eq, payoff, kkt, converged = _ascend(problem, tau0, options, known=runs)
        except (EquilibriumError, DiagnosticsError, ModelError) as exc:
            failures.append(str(exc))
            continue
        if best_effort is None or payoff > best_effort[2]:
            best_effort = (tau, eq, payoff, kkt)
        if converged:
            runs.append((tau, eq, payoff, kkt, True))

    if not runs:
        raise OptimizationError(
            f"no start converged to tolerance (failures: {failures[:3]})",
            best=best_effort,
        )

    best_pay = max(r[2] for r in runs)
    ties = [r for r in runs if r[2] >= best_pay - 1e-12]
    ties.sort(key=lambda r: tuple(r[0].ravel()))
    tau, eq, payoff, kkt = ties[0][:4]

    contract = Contract(tau)
    return OptimalContractResult(
        contract=contract,
        equilibrium=eq,
        principal_payoff=payoff,
        active_set=tuple(int(i) for i in np.flatnonzero(eq.actions > ACTIVITY_TOL)),
        kkt_residual=kkt,
        method="general",
        max_balance_residual=_balance_residual_or_none(problem, contract, eq),
    )


# ---------------------------------------------------------------------------
# active sets
# ---------------------------------------------------------------------------


def _maximum_cliques(adjacency: np.ndarray) -> list:
    """All maximum cliques, by branch-and-bound extension of candidate sets."""
    n = adjacency.shape[0]
    neighbors = [set(np.flatnonzero(adjacency[i] > 0.0)) for i in range(n)]
    best: list = []
    best_size = 0

    def extend(clique: list, candidates: list):
        nonlocal best, best_size
        if not candidates:
            if len(clique) > best_size:
                best, best_size = [tuple(clique)], len(clique)
            elif len(clique) == best_size:
                best.append(tuple(clique))
            return
        if len(clique) + len(candidates) < best_size:
            return
        for idx, v in enumerate(candidates):
            rest = [u for u in candidates[idx + 1:] if u in neighbors[v]]
            # Only recurse when the branch can still tie the incumbent.
            if len(clique) + 1 + len(rest) >= best_size:
                extend(clique + [v], rest)

    extend([], list(range(n)))
    return sorted(set(best))


def _induced_diameter_le2(sub: np.ndarray) -> bool:
    """Connected with all pairwise distances at most 2 (in the induced graph)."""
    k = sub.shape[0]
    if k == 1:
        return True
    adj = sub > 0.0
    two_step = adj | (adj @ adj)
    np.fill_diagonal(two_step, True)
    return bool(np.all(two_step))


def optimal_active_set(network: Network, p: SuccessProbability, *, cap: int = 16) -> list:
    """Ranked candidate active sets for the quadratic-binary environment.

    Unweighted (0/1) networks: the maximum cliques, with balance constant
    ``(k-1)/k`` per unit share.  Weighted networks: all connected subsets of
    diameter at most 2 whose subnetwork supports a positive balanced payment
    direction, scored by balance constant per unit share.  Ties break toward
    smaller then lexicographically earlier sets.  The ranking does not
    depend on the success probability (it only scales the share level), so
    ``p`` participates only through downstream share searches.
    """
    n = network.n
    if n > cap:
        raise ActiveSetError(
            f"active-set enumeration capped at {cap} agents; use optimize_general"
        )
    g = network.matrix

    candidates: list[ActiveSetCandidate] = []
    if np.all(np.isin(g, (0.0, 1.0))):
        for clique in _maximum_cliques(g):
            k = len(clique)
            candidates.append(ActiveSetCandidate(
                agents=tuple(int(i) for i in clique),
                share_rate=(k - 1.0) / k,
                direction=np.full(k, 1.0 / k),
            ))
        candidates.sort(key=lambda c: (len(c.agents), c.agents))
        return candidates

    for size in range(1, n + 1):
        for agents in itertools.combinations(range(n), size):
            sub = g[np.ix_(agents, agents)]
            if size == 1:
                candidates.append(ActiveSetCandidate(agents=agents, share_rate=0.0, direction=np.ones(1)))
                continue
            if not _induced_diameter_le2(sub):
                continue
            try:
                t = np.linalg.solve(sub, np.ones(size))
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(t)) or np.max(np.abs(sub @ t - 1.0)) > 1e-8:
                continue
            if np.min(t) <= 1e-12:
                continue
            total = float(np.sum(t))
            candidates.append(ActiveSetCandidate(
                agents=agents, share_rate=1.0 / total, direction=t / total,
            ))

    candidates.sort(key=lambda c: (-c.share_rate, len(c.agents), c.agents))
    return candidates


# ---------------------------------------------------------------------------
# quadratic-binary closed form
# ---------------------------------------------------------------------------


def _balanced_performance(s: float, rate: float, p: SuccessProbability) -> float:
    """Equilibrium performance under a balanced-equity contract with total
    share ``s`` and neighborhood equity ``lam = s * rate``.

    Solves the scalar fixed point of
    ``y = s * (P'/(1 - P' lam) + P'^2 lam / (2 (1 - P' lam)^2))``,
    a strictly decreasing map on the range where ``P'(y) lam < 1``.
    """
    lam = s * rate
    cap = p.cap if isinstance(p, LinearCappedSuccess) else np.inf

    def rhs(y: float) -> float:
        slope = float(p.deriv(y))
        q = slope * lam
        if q >= 1.0:
            return np.inf
        return s * (slope / (1.0 - q) + slope * slope * lam / (2.0 * (1.0 - q) ** 2))

    y_lo = 0.0
    if lam > 0.0 and float(p.deriv(0.0)) * lam >= 1.0:
        if isinstance(p, LinearCappedSuccess):
            raise EquilibriumError(f"no balanced equilibrium: slope * equity = {p.slope * lam:.6g} >= 1")
        lo, hi = 0.0, 1.0
        while float(p.deriv(hi)) * lam >= 1.0:
            hi *= 2.0
            if hi > 1e12:
                raise EquilibriumError("spectral condition never satisfied")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(p.deriv(mid)) * lam >= 1.0:
                lo = mid
            else:
                hi = mid
        y_lo = hi * (1.0 + 1e-12)

    y_hi = max(1.0, 2.0 * y_lo)
    for _ in range(200):
        if y_hi >= cap:
            y_hi = cap * (1.0 - 1e-12)
            if rhs(y_hi) > y_hi:
                raise CapExceededError("balanced performance would reach the probability cap")
            break
        if rhs(y_hi) <= y_hi:
            break
        y_hi *= 2.0
    else:
        raise EquilibriumError("balanced performance map stays above the diagonal")

    lo, hi = y_lo, y_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rhs(mid) > mid:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def _share_search(payoff, smax: float, options: OptimizerOptions) -> float:
    """Coarse prescan then golden-section refinement of a 1-D share payoff."""
    grid = np.linspace(smax / options.prescan, smax, options.prescan)
    vals = np.array([payoff(s) for s in grid])
    k = int(np.argmax(vals))
    lo = grid[max(0, k - 1)]
    hi = grid[min(options.prescan - 1, k + 1)]
    return _golden_max(payoff, lo, hi, options.golden_tol)


def optimize_quadratic_binary(
    network: Network, p: SuccessProbability, options: OptimizerOptions | None = None
) -> OptimalContractResult:
    """Closed-form optimal contract for the quadratic-network environment.

    Enumerates candidate active sets, takes the best balance rate, and
    maximizes the exact principal payoff over the total share via golden
    section, re-solving the balanced-equity performance fixed point at each
    candidate share.  Falls back to the gradient optimizer when no usable
    candidate set exists.
    """
    options = options or OptimizerOptions()
    try:
        candidates = optimal_active_set(network, p, cap=options.active_set_cap)
    except ActiveSetError:
        candidates = []
    if not candidates:
        warnings.warn("no usable active set; falling back to the gradient optimizer")
        return optimize_general(quadratic_binary_problem(network, p), options=options)

    best = candidates[0]
    agents = np.array(best.agents, dtype=int)
    rate = best.share_rate
    n = network.n

    smax = 1.0 - 1e-12
    if rate > 0.0:
        smax = min(smax, (1.0 - 1e-9) / (float(p.deriv(0.0)) * rate))

    def payoff_of_share(s: float) -> float:
        try:
            y = _balanced_performance(s, rate, p)
        except (EquilibriumError, CapExceededError):
            return -np.inf
        return (1.0 - s) * float(p.value(y))

    s_star = _share_search(payoff_of_share, smax, options)

    tau = np.zeros(n)
    tau[agents] = s_star * best.direction
    eq = solve_equilibrium_quadratic_binary(network, tau, p)

    g = network.matrix
    sub = g[np.ix_(agents, agents)]
    equity_levels = sub @ tau[agents]
    action_levels = sub @ eq.actions[agents]
    for name, levels in (("equity", equity_levels), ("action", action_levels)):
        spread = float(np.max(levels) - np.min(levels))
        scale = max(abs(float(np.mean(levels))), 1e-12)
        if agents.size > 1 and spread / scale > 1e-6:
            raise OptimizationError(f"balanced neighborhood {name} violated (spread {spread:.3g})")

    payments = np.zeros((n, 2))
    payments[:, 1] = tau
    contract = Contract(payments)
    payoff = _principal_payoff(quadratic_binary_problem(network, p), contract, eq.probs)

    h = max(1e-7, 1e-7 * s_star)
    kkt = abs(payoff_of_share(min(s_star + h, smax)) - payoff_of_share(max(s_star - h, 1e-12))) / (2 * h)

    problem = quadratic_binary_problem(network, p)
    return OptimalContractResult(
        contract=contract,
        equilibrium=eq,
        principal_payoff=payoff,
        active_set=tuple(int(i) for i in agents),
        kkt_residual=float(kkt),
        method="quadratic_closed_form",
        balance_constant=float(s_star * rate),
        neighborhood_action_constant=float(np.mean(action_levels)) if agents.size > 1 else 0.0,
        max_balance_residual=_balance_residual_or_none(problem, contract, eq),
    )


# ---------------------------------------------------------------------------
# separable closed forms
# ---------------------------------------------------------------------------


def _scan_roots(f, lo: float, hi: float, points: int = 257) -> list:
    xs = np.geomspace(lo, hi, points)
    vals = np.array([f(x) for x in xs])
    roots = []
    for k in range(points - 1):
        a, b = vals[k], vals[k + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0.0:
            roots.append(float(xs[k]))
        elif a * b < 0.0:
            roots.append(float(brentq(f, xs[k], xs[k + 1], xtol=1e-15, rtol=1e-15)))
    return roots


def _second_order_ok(production, p: SuccessProbability, y: float, tau: np.ndarray, actions: np.ndarray) -> bool:
    """Each agent's payoff must be locally concave at the candidate
    equilibrium: tau_i * (P'' (dY/da_i)^2 + P' d2Y/da_i^2) <= C'' = 1."""
    dp = float(p.deriv(y))
    d2p = float(p.second(y))
    for i in range(actions.size):
        dy = production.partial(actions, i)
        d2y = production.partial2(actions, i)
        if tau[i] * (d2p * dy * dy + dp * d2y) > 1.0 + 1e-7:
            return False
    return True


def _separable_equilibrium(production, p: SuccessProbability, tau: np.ndarray):
    """Principal-best verified equilibrium of the separable environments.

    Works through the scalar performance fixed point implied by the agents'
    first-order conditions; every root is checked against the agents'
    second-order conditions, and the best surviving root (highest success
    probability) is returned as ``(performance, actions)`` or None.
    """
    cap = p.cap if isinstance(p, LinearCappedSuccess) else np.inf
    y_hi = min(cap * (1.0 - 1e-9), 1e8)

    if isinstance(production, CobbDouglasProduction):
        shares = production.shares
        if np.any(tau <= 0.0):
            return None
        total = float(np.sum(shares))
        log_k = float(np.sum(0.5 * shares * np.log(tau * shares)))

        def f(y):
            dp = float(p.deriv(y))
            if dp <= 0.0:
                return np.inf
            return (1.0 - 0.5 * total) * np.log(y) - log_k - 0.5 * total * np.log(dp)

        def actions_at(y):
            return np.sqrt(tau * shares * float(p.deriv(y)) * y)

    elif isinstance(production, CESProduction):
        shares, rho, returns = production.shares, production.rho, production.returns
        if np.any(tau <= 0.0):
            return None
        q = float(np.sum(shares * (tau * shares) ** (rho / (2.0 - rho))))

        def f(y):
            dp = float(p.deriv(y))
            if dp <= 0.0:
                return np.inf
            b = returns * dp * y ** (1.0 - rho / returns)
            return y - q ** (returns / rho) * b ** (returns / (2.0 - rho))

        def actions_at(y):
            dp = float(p.deriv(y))
            b = returns * dp * y ** (1.0 - rho / returns)
            return (tau * shares * b) ** (1.0 / (2.0 - rho))

    else:
        raise ModelError(f"no separable closed form for {type(production).__name__}")

    best = None
    for y in _scan_roots(f, 1e-10, y_hi):
        a = actions_at(y)
        if not np.all(np.isfinite(a)):
            continue
        if not _second_order_ok(production, p, y, tau, a):
            continue
        # Several candidate equilibria can coexist; keep the principal-best
        # (highest-performance) one.
        if best is None or y > best[0]:
            best = (y, a)
    return best


def _separable_closed_form(production, p, direction: np.ndarray, method: str,
                           options: OptimizerOptions) -> OptimalContractResult:
    n = direction.size
    d_hat = direction / float(np.sum(direction))

    def payoff_of_total(t: float) -> float:
        got = _separable_equilibrium(production, p, t * d_hat)
        if got is None:
            return -np.inf
        return (1.0 - t) * float(p.value(got[0]))

    t_star = _share_search(payoff_of_total, 1.0 - 1e-9, options)
    tau = t_star * d_hat
    got = _separable_equilibrium(production, p, tau)
    if got is None:
        raise OptimizationError(f"{method}: no stable equilibrium at the optimal scale")
    y_star, actions = got

    problem = Problem(
        n=n,
        production=production,
        outcomes=BinaryOutcomeModel(p),
        utilities=tuple(LinearUtility() for _ in range(n)),
        costs=tuple(PowerCost(1.0, 2.0) for _ in range(n)),
    )
    payments = np.zeros((n, 2))
    payments[:, 1] = tau
    contract = Contract(payments)
    eq = solve_equilibrium_general(problem, contract, init=actions, tol=1e-11)
    if abs(eq.performance - y_star) > 1e-6 * max(1.0, y_star):
        raise OptimizationError(
            f"{method}: scalar fixed point and best-response equilibrium disagree "
            f"({y_star:.9g} vs {eq.performance:.9g})"
        )
    payoff = _principal_payoff(problem, contract, eq.probs)

    h = 1e-7
    kkt = abs(payoff_of_total(min(t_star + h, 1.0 - 1e-9)) - payoff_of_total(t_star - h)) / (2 * h)

    return OptimalContractResult(
        contract=contract,
        equilibrium=eq,
        principal_payoff=payoff,
        active_set=tuple(range(n)),
        kkt_residual=float(kkt),
        method=method,
        max_balance_residual=_balance_residual_or_none(problem, contract, eq),
    )


def closed_form_cobb_douglas(
    gamma, p: SuccessProbability, options: OptimizerOptions | None = None
) -> OptimalContractResult:
    """Optimal contract for Cobb-Douglas production in the binary
    environment: payments proportional to factor shares, scaled by a 1-D
    payoff search with an equilibrium re-solve per candidate scale."""
    options = options or OptimizerOptions()
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0):
        raise ModelError("factor shares must be strictly positive")
    if abs(float(np.sum(gamma)) - 2.0) < 1e-12:
        raise ModelError("total factor share of exactly 2 makes the scalar equilibrium degenerate")
    production = CobbDouglasProduction(gamma)
    return _separable_closed_form(production, p, gamma, "cobb_douglas_closed_form", options)


def closed_form_ces(
    gamma, rho: float, kappa: float, p: SuccessProbability,
    options: OptimizerOptions | None = None,
) -> OptimalContractResult:
    """Optimal contract for CES production (``rho < 1``): payments
    proportional to ``gamma ** (1 / (1 - rho))``."""
    options = options or OptimizerOptions()
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0):
        raise ModelError("factor shares must be strictly positive")
    if rho == 0.0:
        raise ModelError("rho must be nonzero; use the Cobb-Douglas closed form")
    if rho >= 1.0:
        raise ModelError("closed form restricted to rho < 1 (interior payments)")
    if abs(2.0 - float(kappa)) < 1e-12:
        raise ModelError("returns-to-scale of exactly 2 makes the scalar equilibrium degenerate")
    production = CESProduction(gamma, rho, kappa)
    direction = gamma ** (1.0 / (1.0 - rho))
    return _separable_closed_form(production, p, direction, "ces_closed_form", options)


# ---------------------------------------------------------------------------
# total-share cubic (linear success probability)
# ---------------------------------------------------------------------------


def share_cubic(s: float, beta: float, kappa: float, kstar: float) -> float:
    """Numerator of the share derivative of the principal payoff under a
    linear success probability: a cubic in the total share."""
    bk = beta * kappa
    return -(bk**2) * s**3 + 3.0 * bk * kstar * s**2 - 4.0 * kstar**2 * s + 2.0 * kstar**2


def total_share_root(beta: float, kappa: float, kstar: float, *, tol: float = 1e-13) -> float:
    """Optimal total share with a linear success probability: the unique
    root of the share cubic, which lies in (1/2, 1).  Requires
    ``beta * kappa < kstar``."""
    if not beta * kappa < kstar:
        raise ModelError(f"requires beta * kappa < kstar, got {beta * kappa:.6g} >= {kstar:.6g}")
    lo, hi = 0.5, 1.0
    flo = share_cubic(lo, beta, kappa, kstar)
    if flo <= 0.0:
        raise ModelError("cubic not positive at s = 1/2; parameters out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if share_cubic(mid, beta, kappa, kstar) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)
