"""Independent brute-force verification paths.

Everything here is deliberately primitive: equilibria come from grid-argmax
best responses (not first-order conditions), optima from exhaustive payoff
grids, derivatives from finite differences.  The module shares no solver
code with the analytic paths; it imports the domain types only, so a bug in
the main solvers cannot leak in.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import Contract, EquilibriumResult, Problem

__all__ = [
    "OracleError",
    "best_response_iterate",
    "brute_force_optimal_contract",
    "finite_diff",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class OracleError(RuntimeError):
    pass


def _payoff_batch(problem: Problem, u_levels: np.ndarray, i: int, a: np.ndarray, ai: np.ndarray) -> np.ndarray:
    pts = np.broadcast_to(a, ai.shape + a.shape).copy()
    pts[..., i] = ai
    y = problem.production.value(pts)
    probs = problem.outcomes.probs(y)
    return probs @ u_levels[i] - problem.costs[i].value(ai)


def _payoff_scalar(problem: Problem, u_levels: np.ndarray, i: int, a: np.ndarray, ai: float) -> float:
    return float(_payoff_batch(problem, u_levels, i, a, np.asarray(ai, dtype=float)))


def _golden_refine(problem, u_levels, i, a, lo, hi, xtol):
    f = lambda x: _payoff_scalar(problem, u_levels, i, a, x)
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > xtol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def _grid_best_response(problem, u_levels, i, a, a_max, grid_points, xtol, window=None):
    """Argmax of agent i's payoff over a grid, zoomed by nested batched grids
    down to ``xtol`` and finished by a short golden-section pass.

    ``window`` restricts the initial scan to a local bracket around the
    current action (used mid-iteration for speed); an argmax on the bracket
    edge reopens the full range, and the caller's final sweep always runs
    the full grid.
    """
    if window is not None:
        half = window
        while True:
            lo = max(0.0, a[i] - half)
            hi = min(a_max, a[i] + half)
            sub = np.linspace(lo, hi, 64)
            vals = _payoff_batch(problem, u_levels, i, a, sub)
            k = int(np.argmax(vals))
            if (k > 0 or lo == 0.0) and (k < 63 or hi == a_max):
                break
            half *= 6.0
            if half > a_max:
                return _grid_best_response(problem, u_levels, i, a, a_max, grid_points, xtol)
        corner = float(_payoff_scalar(problem, u_levels, i, a, 0.0)) if lo > 0.0 else float(vals[0])
        lo, hi = sub[max(0, k - 1)], sub[min(63, k + 1)]
    else:
        grid = np.linspace(0.0, a_max, grid_points)
        vals = _payoff_batch(problem, u_levels, i, a, grid)
        k = int(np.argmax(vals))
        corner = float(vals[0])
        lo = grid[max(0, k - 1)]
        hi = grid[min(grid_points - 1, k + 1)]
        if hi - lo <= xtol:
            return float(grid[k])
    for _ in range(8):
        sub = np.linspace(lo, hi, 64)
        vals = _payoff_batch(problem, u_levels, i, a, sub)
        k = int(np.argmax(vals))
        lo = sub[max(0, k - 1)]
        hi = sub[min(63, k + 1)]
        if hi - lo <= xtol:
            break
    x = _golden_refine(problem, u_levels, i, a, lo, hi, xtol) if hi - lo > xtol else 0.5 * (lo + hi)
    # The corner can beat the interior refinement when the payoff is
    # decreasing from the start.
    if corner >= _payoff_scalar(problem, u_levels, i, a, x):
        return 0.0
    return float(x)


def best_response_iterate(
    problem: Problem,
    contract: Contract,
    tol: float = 1e-10,
    damping: float = 0.5,
    *,
    max_sweeps: int = 5000,
    grid_points: int = 1024,
    a_max: float | None = None,
    init=None,
) -> EquilibriumResult:
    """Damped simultaneous grid-argmax best responses.

    Response resolution adapts to the remaining profile movement (no point
    resolving below the current sweep-to-sweep gap) and tightens to ``tol``
    as the fixed point closes in.
    """
    n = problem.n
    u_levels = np.array([problem.utilities[i].value(contract.payments[i]) for i in range(n)])
    if a_max is None:
        a_max = 10.0 * (float(np.max(contract.payments, axis=1).sum()) + 1.0)
    a = np.zeros(n) if init is None else np.asarray(init, dtype=float).copy()

    # Value comparisons cannot rank actions closer than ~sqrt(machine eps)
    # around a flat payoff maximum, so requested tolerances are clamped at
    # that resolution floor; the returned residual stays honest.
    floor = 5e-9
    gap = a_max
    trail = [a.copy()]
    warm = init is not None
    for sweeps in range(1, max_sweeps + 1):
        eff_tol = max(tol, floor * max(1.0, float(np.max(np.abs(a)))))
        xtol = max(eff_tol / 4.0, min(gap / 20.0, a_max / grid_points))
        # Mid-iteration sweeps on a warm start search a local window; the
        # accepting sweep below always re-derives from the full grid.
        window = min(4.0 * gap + 100.0 * xtol, a_max) if (warm and sweeps > 1) or sweeps > 2 else None
        br = np.array([
            _grid_best_response(problem, u_levels, i, a, a_max, grid_points, xtol, window=window)
            for i in range(n)
        ])
        gap = float(np.max(np.abs(br - a)))
        if gap <= eff_tol and xtol <= eff_tol / 2.0:
            full = np.array([
                _grid_best_response(problem, u_levels, i, br, a_max, grid_points, eff_tol / 4.0)
                for i in range(n)
            ])
            if float(np.max(np.abs(full - br))) <= eff_tol:
                return EquilibriumResult(
                    actions=full,
                    performance=float(problem.production.value(full)),
                    probs=np.asarray(problem.outcomes.probs(float(problem.production.value(full))), dtype=float),
                    iterations=sweeps,
                    residual=float(np.max(np.abs(full - br))),
                    spectral_margin=None,
                )
        a = (1.0 - damping) * a + damping * br
        trail.append(a.copy())
        if len(trail) == 3:
            # Aitken extrapolation of the linearly converging damped map;
            # the next sweep re-measures the gap, so a bad jump self-corrects.
            x0, x1, x2 = trail
            d1, d2 = x1 - x0, x2 - x1
            denom = d2 - d1
            safe = np.abs(denom) > 1e-14
            jump = np.where(safe, x2 - np.divide(d2**2, denom, out=np.zeros_like(d2), where=safe), x2)
            a = np.maximum(0.0, jump)
            trail = [a.copy()]
    raise OracleError(f"grid best-response iteration did not converge in {max_sweeps} sweeps")


def principal_payoff(problem: Problem, contract: Contract, performance: float) -> float:
    """Expected revenue minus transfers at the given performance level."""
    probs = problem.outcomes.probs(performance)
    revenues = problem.outcomes.revenues
    return float(np.dot(revenues - contract.payments.sum(axis=0), probs))


def brute_force_optimal_contract(
    problem: Problem,
    grid_resolution: float,
    bounds,
    *,
    free_coords=None,
    dim_cap: int = 6,
    tol: float = 1e-8,
) -> tuple[Contract, float]:
    """Exhaustive payoff search over a Cartesian grid of contracts.

    ``bounds`` is ``(lo, hi)`` arrays (or scalars) with shape (n, S);
    ``free_coords`` optionally restricts the search to a subset of (agent,
    outcome) cells, with all other payments pinned at ``lo``.  By default, a
    binary problem searches success payments only (paying at failure is
    never optimal there).  Ties break to the lexicographically smallest
    contract; equilibria come from :func:`best_response_iterate`, warm
    started along the scan.
    """
    n, S = problem.n, problem.n_outcomes
    lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n, S)).copy()
    hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n, S)).copy()

    if free_coords is None:
        if S == 2 and float(problem.outcomes.revenues[0]) == 0.0:
            free_coords = [(i, 1) for i in range(n)]
        else:
            free_coords = [(i, s) for i in range(n) for s in range(S)]
    free_coords = list(free_coords)
    if len(free_coords) > dim_cap:
        raise OracleError(
            f"{len(free_coords)} free payment coordinates exceed the enumeration cap {dim_cap}; "
            "use the gradient optimizer instead"
        )

    axes = []
    for (i, s) in free_coords:
        count = int(round((hi[i, s] - lo[i, s]) / grid_resolution)) + 1
        axes.append(lo[i, s] + grid_resolution * np.arange(count))

    best_payoff = -np.inf
    best_payments = None
    warm = np.zeros(n)
    base = lo.copy()
    for values in itertools.product(*axes):
        payments = base.copy()
        for (coord, v) in zip(free_coords, values):
            payments[coord] = v
        contract = Contract(payments)
        try:
            eq = best_response_iterate(problem, contract, tol=tol, init=warm)
        except OracleError:
            continue
        warm = eq.actions
        payoff = principal_payoff(problem, contract, eq.performance)
        if payoff > best_payoff + 1e-15:
            best_payoff = payoff
            best_payments = payments
    if best_payments is None:
        raise OracleError("no grid point produced a solvable equilibrium")
    return Contract(best_payments), float(best_payoff)


def finite_diff(functional, point, step: float = 1e-6, *, richardson: bool = False):
    """Central-difference derivative of ``functional`` at ``point``.

    Scalar points give a scalar derivative; vector points give the gradient.
    With ``richardson`` the h and h/2 estimates are extrapolated.
    """

    def central(h):
        p = np.asarray(point, dtype=float)
        if p.ndim == 0:
            return (functional(float(p) + h) - functional(float(p) - h)) / (2.0 * h)
        out = np.empty(p.size)
        for k in range(p.size):
            up = p.copy()
            dn = p.copy()
            up[k] += h
            dn[k] -= h
            out[k] = (functional(up) - functional(dn)) / (2.0 * h)
        return out

    d1 = central(step)
    if not richardson:
        return d1
    d2 = central(step / 2.0)
    return (4.0 * np.asarray(d2) - np.asarray(d1)) / 3.0
