"""Discrete Kantorovich transport between weighted point sets.

Marginals are probability vectors (density times grid weight). Rows of a cost
matrix index the source, columns the target. Dual potentials ``(phi, psi)``
satisfy ``phi_i + psi_j <= C_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import minimize_scalar

from . import _simplex
from .sphere import SphereGrid, distance_matrix

MARGINAL_TOL = 1e-10


class InfeasibleMarginals(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    """Raised by the entropic solver; ``diagnostics`` holds the last iterate's stats."""

    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class TransportPlan:
    coupling: np.ndarray
    primal_cost: float
    phi: np.ndarray
    psi: np.ndarray
    duality_gap: float
    solver: str
    stats: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.argwhere(self.coupling > 0)

    def marginal_residuals(self, source, target) -> tuple[float, float]:
        return (float(np.abs(self.coupling.sum(1) - source).max()),
                float(np.abs(self.coupling.sum(0) - target).max()))


def cost_matrix(grid: SphereGrid, cost) -> np.ndarray:
    """``C_ij = cost(d(p_i, p_j))`` for any vectorized cost of the distance."""
    C = np.asarray(cost(distance_matrix(grid)), dtype=float)
    if not np.all(np.isfinite(C)):
        raise ValueError("infinite cost entry: grid contains an antipodal pair")
    np.fill_diagonal(C, 0.0)
    return C


def _check_problem(source, target, C):
    a = np.ascontiguousarray(source, dtype=float)
    b = np.ascontiguousarray(target, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    if C.shape != (len(a), len(b)):
        raise ValueError("cost matrix shape does not match marginals")
    if np.any(a < 0) or np.any(b < 0):
        raise InfeasibleMarginals("marginals must be nonnegative")
    if abs(a.sum() - 1.0) > MARGINAL_TOL or abs(b.sum() - 1.0) > MARGINAL_TOL:
        raise InfeasibleMarginals(
            f"marginals must sum to 1 (got {a.sum():.17g} and {b.sum():.17g})")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    return a, b, C


def solve_exact(source, target, C, max_iter: int = 50_000_000) -> TransportPlan:
    """Optimal coupling of the finite transport LP by the network simplex.

    The returned plan is a basic solution (at most ``n1 + n2 - 1`` positive
    entries) with optimal duals; the run is deterministic.
    """
    a, b, C = _check_problem(source, target, C)
    n1, n2 = C.shape
    scale = max(1.0, float(np.abs(C).max()))
    tol = 1e-13 * scale
    basis, flow, local, offset, status, iters = _simplex.network_simplex(C, a, b, max_iter, tol)
    if status == _simplex.MAX_ITER_REACHED:
        raise SolverError(f"network simplex hit max_iter={max_iter}")
    if status != _simplex.OPTIMAL:
        raise SolverError(f"network simplex failed with status {status}")

    n_real = n1 * n2
    real = basis < n_real
    P = np.zeros((n1, n2))
    e = basis[real]
    P[e // n2, e % n2] = np.maximum(flow[real], 0.0)
    art_flow = float(np.abs(flow[~real]).max()) if np.any(~real) else 0.0

    # At optimality every node carrying mass shares one potential offset (a
    # mismatch would leave an arc pricing at about -big-M). Massless nodes may
    # hang elsewhere; their duals are rebuilt by c-transform.
    ref = offset[int(np.argmax(a))]
    same = offset[: n1 + n2] == ref
    mass = np.concatenate([a, b])
    if np.any(mass[~same] > 1e-12):
        raise SolverError("inconsistent potential offsets at termination")
    phi = np.where(same[:n1], -local[:n1], np.nan)
    psi = np.where(same[n1:], local[n1 : n1 + n2], np.nan)
    ok_i = same[:n1]
    psi = np.where(np.isnan(psi), np.min(C[ok_i] - phi[ok_i, None], axis=0), psi)
    phi = np.where(np.isnan(phi), np.min(C - psi[None, :], axis=1), phi)
    shift = float(np.min(phi))
    phi -= shift
    psi = np.min(C - phi[:, None], axis=0)

    primal = float(np.sum(P * C))
    gap = primal - float(phi @ a + psi @ b)
    stats = {"iterations": int(iters), "artificial_flow": art_flow,
             "support": int(np.count_nonzero(P))}
    return TransportPlan(P, primal, phi, psi, gap, "network-simplex", stats)


def _round_to_marginals(P, a, b):
    # Altschuler-Weed-Rigollet rounding: scale down over-full rows and columns,
    # then put the missing mass back with a rank-one correction
    rows = P.sum(1)
    x = np.where(rows > a, a / np.where(rows > 0, rows, 1.0), 1.0)
    P = P * x[:, None]
    cols = P.sum(0)
    y = np.where(cols > b, b / np.where(cols > 0, cols, 1.0), 1.0)
    P = P * y[None, :]
    # deficits are nonnegative up to rounding; clipping keeps the correction nonnegative
    ea = np.maximum(a - P.sum(1), 0.0)
    eb = np.maximum(b - P.sum(0), 0.0)
    total = ea.sum()
    if total > 0:
        P = P + np.outer(ea, eb) / total
    return P


@njit(cache=True)
def _softmin_rows(C, g, log_b, epsilon):
    # f_i = -epsilon * log sum_j b_j exp((g_j - C_ij) / epsilon), stabilized by the row maximum
    n1, n2 = C.shape
    out = np.empty(n1)
    z = np.empty(n2)
    for i in range(n1):
        top = -np.inf
        for j in range(n2):
            z[j] = (g[j] - C[i, j]) / epsilon + log_b[j]
            if z[j] > top:
                top = z[j]
        if top == -np.inf:
            out[i] = np.inf
            continue
        acc = 0.0
        for j in range(n2):
            acc += math.exp(z[j] - top)
        out[i] = -epsilon * (top + math.log(acc))
    return out


def solve_entropic(source, target, C, epsilon: float, max_iters: int = 10_000,
                   tol: float = 1e-9, warm_start=None) -> TransportPlan:
    """Entropic transport by log-domain Sinkhorn iterations.

    Stops when the L1 row-marginal violation drops below ``tol``. The plan is
    then rounded onto the exact marginals and ``primal_cost`` is its
    unregularized cost, an upper bound of the exact optimum. The reported
    duals are the Sinkhorn ``phi`` and its c-transform, a feasible pair.

    Raises :class:`ConvergenceError` when ``max_iters`` is exhausted.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a, b, C = _check_problem(source, target, C)
    with np.errstate(divide="ignore"):
        log_a = np.log(a)
        log_b = np.log(b)
    f = np.zeros(len(a)) if warm_start is None else np.array(warm_start[0], dtype=float)
    g = np.zeros(len(b)) if warm_start is None else np.array(warm_start[1], dtype=float)
    CT = np.ascontiguousarray(C.T)
    err = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        f = _softmin_rows(C, g, log_b, epsilon)
        g = _softmin_rows(CT, f, log_a, epsilon)
        if it % 10 == 0 or it == max_iters:
            # row sums of the current plan are a_i exp((f_i - f_new_i) / epsilon)
            row = a * np.exp((f - _softmin_rows(C, g, log_b, epsilon)) / epsilon)
            err = float(np.abs(row - a).sum())
            if err <= tol:
                break
    else:
        raise ConvergenceError(
            f"Sinkhorn did not reach tol={tol} in {max_iters} iterations",
            {"iterations": it, "marginal_error": err, "epsilon": epsilon})

    P = np.exp((f[:, None] + g[None, :] - C) / epsilon + log_a[:, None] + log_b[None, :])
    P = _round_to_marginals(P, a, b)
    primal = float(np.sum(P * C))
    psi = np.min(C - f[:, None], axis=0)
    gap = primal - float(f @ a + psi @ b)
    stats = {"iterations": it, "marginal_error": err, "epsilon": epsilon,
             "potentials": (f, g)}
    return TransportPlan(P, primal, f, psi, gap, "sinkhorn-log", stats)


ENTROPIC_LADDER = (0.1, 0.05, 0.01, 0.005, 0.002)


def entropic_scale(C) -> float:
    """Median off-diagonal cost, the unit of the default regularization ladder.

    ``max(C)`` is useless as a unit for ``c_n``, which blows up near antipodes.
    """
    C = np.asarray(C, dtype=float)
    off = C[~np.eye(*C.shape, dtype=bool)] if C.shape[0] > 1 else C.ravel()
    return float(np.median(off))


def solve_entropic_ladder(source, target, C, epsilons, **kwargs) -> list[TransportPlan]:
    """Run :func:`solve_entropic` down a decreasing ``epsilons`` ladder, warm-starting each rung."""
    plans = []
    warm = None
    for eps in epsilons:
        plan = solve_entropic(source, target, C, eps, warm_start=warm, **kwargs)
        warm = plan.stats["potentials"]
        plans.append(plan)
    return plans


def inf_convolution(phi, C) -> np.ndarray:
    """``(Q phi)_i = min_j (phi_j + C_ij)``."""
    phi = np.asarray(phi, dtype=float)
    return np.min(phi[None, :] + np.asarray(C, dtype=float), axis=1)


def dual_objective(phi, source, target, C) -> float:
    """``<Q phi, source> - <phi, target>``; a lower bound of the optimal cost."""
    phi = np.asarray(phi, dtype=float)
    return float(inf_convolution(phi, C) @ source - phi @ target)


def _poly_interval_min(poly, lo, hi):
    crit = [r.real for r in poly.deriv().roots() if abs(r.imag) < 1e-12] if poly.degree() > 1 else []
    best = np.minimum(poly(lo), poly(hi))
    for r in crit:
        inside = (lo <= r) & (r <= hi)
        best = np.where(inside, np.minimum(best, poly(r)), best)
    return best


def sphere_inf_convolution(g, points, cost, eps: float, n_radii: int = 4001) -> np.ndarray:
    """``Q(eps g)(x) = inf_{y in S^n} {eps g(y) + c(d(x, y))}`` at each row of ``points``.

    The infimum runs over the whole sphere, not a grid. For ``g = P(y . axis)``
    the points at distance ``r`` from ``x`` see ``y . axis`` sweep the interval
    ``s cos r +- |axis_tan| sin r`` (n >= 2), so the inner minimum is a
    polynomial minimum over an interval and the outer one is one-dimensional
    in ``r``: a dense scan followed by bounded Brent refinement.
    """
    X = np.asarray(points, dtype=float)
    poly = eps * g.polynomial
    s = X @ g.axis
    q = np.sqrt(np.maximum(g.axis @ g.axis - s**2, 0.0))
    radii = np.linspace(0.0, math.pi, n_radii)[:-1]
    c_r = cost(radii)

    def inner(r, si, qi):
        cr, sr = np.cos(r), np.sin(r)
        return _poly_interval_min(poly, si * cr - qi * sr, si * cr + qi * sr)

    obj = inner(radii[None, :], s[:, None], q[:, None]) + c_r[None, :]
    k = np.argmin(obj, axis=1)
    out = obj[np.arange(len(X)), k]
    for idx in range(len(X)):
        lo = radii[max(k[idx] - 1, 0)]
        hi = radii[min(k[idx] + 1, len(radii) - 1)]
        if hi <= lo:
            continue
        res = minimize_scalar(
            lambda r: float(inner(r, s[idx], q[idx]) + cost(r)),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        out[idx] = min(out[idx], res.fun)
    return out


def export_plan(plan: TransportPlan, path) -> None:
    lines = [f"{i},{j},{plan.coupling[i, j]:.17g}" for i, j in plan.support]
    lines.append(f"# cost={plan.primal_cost:.17g} gap={plan.duality_gap:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
