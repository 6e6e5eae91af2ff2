"""Brute-force dynamic-programming oracle for one-dimensional instances.

The velocity is piecewise constant on ``n_t`` equal time steps and takes
one of ``n_v`` uniform levels spanning the integrand's box.  Displacement
after ``k`` steps is ``k*lo*dt + K*dv*dt`` for an integer ``K``, so the
state lattice is exact and no rounding happens during the sweep; only the
final cell is matched against ``u1 - u0`` (to half a cell).

The oracle uses no convex analysis.  It shares the problem data with the
solver and nothing else; ``B(s)`` is integrated here independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleGrid
from .problem import ProblemSpec


@dataclass(frozen=True)
class DPGrid:
    n_t: int = 200
    n_v: int = 401
    substeps: int = 8  # quadrature refinement for B inside each time step


@dataclass(frozen=True)
class DPResult:
    cost: float
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    allowance: float  # Lipschitz slack for the half-cell endpoint mismatch
    endpoint_error: float
    grid: DPGrid


def _step_averages_of_B(spec: ProblemSpec, n_t: int, sub: int) -> tuple[np.ndarray, float]:
    """Mean of ``B(s) = int_s^T a`` over each step, and ``B(0)``."""
    fine = np.linspace(0.0, spec.T, n_t * sub + 1)
    a = spec.a(fine)[:, 0]
    h = spec.T / (n_t * sub)
    tail = np.concatenate([np.cumsum((0.5 * h * (a[1:] + a[:-1]))[::-1])[::-1], [0.0]])
    # trapezoid average of B over each coarse step
    seg = 0.5 * (tail[1:] + tail[:-1]) * h
    means = seg.reshape(n_t, sub).sum(axis=1) / (h * sub)
    return means, float(tail[0])


def dp_minimize(spec: ProblemSpec, grid: DPGrid = DPGrid()) -> DPResult:
    """Exact minimum over the discrete velocity schedule.

    Minimises ``B(0) u0 + sum_k (Bbar_k v_k + f(v_k)) dt`` subject to the
    accumulated displacement landing in the cell of ``u1 - u0``.  Ties go
    to the smallest velocity index.
    """
    if spec.dim != 1:
        raise ValueError("the DP oracle handles one-dimensional problems only")
    n_t, n_v = int(grid.n_t), int(grid.n_v)
    if n_t < 1 or n_v < 2:
        raise ValueError("need n_t >= 1 and n_v >= 2")
    lo, hi = spec.f.lo[0], spec.f.hi[0]
    levels = np.linspace(lo, hi, n_v)
    fv = np.asarray(spec.f(levels), dtype=float)
    dt = spec.T / n_t
    dv = (hi - lo) / (n_v - 1)
    cell = dv * dt
    du = float(spec.displacement[0])
    target = int(round((du - spec.T * lo) / cell))
    top = n_t * (n_v - 1)
    if target < 0 or target > top:
        raise InfeasibleGrid(
            f"displacement {du:.6g} needs mean velocity {du / spec.T:.6g}, "
            f"outside the velocity box [{lo:.6g}, {hi:.6g}]"
        )
    Bbar, B0 = _step_averages_of_B(spec, n_t, grid.substeps)

    # windows[k] = (first K, values) of states reachable at step k that can still hit target
    def window(k):
        first = max(0, target - (n_t - k) * (n_v - 1))
        last = min(k * (n_v - 1), target)
        return first, last

    tables: list[tuple[int, np.ndarray]] = [None] * (n_t + 1)
    tables[n_t] = (target, np.zeros(1))
    for k in range(n_t - 1, -1, -1):
        first, last = window(k)
        nxt_first, nxt = tables[k + 1]
        nxt_last = nxt_first + nxt.size - 1
        best = np.full(last - first + 1, np.inf)
        step_cost = (Bbar[k] * levels + fv) * dt
        for j in range(n_v):
            if not np.isfinite(step_cost[j]):
                continue
            # states K with K + j inside the next window
            k_lo = max(first, nxt_first - j)
            k_hi = min(last, nxt_last - j)
            if k_lo > k_hi:
                continue
            cand = step_cost[j] + nxt[k_lo + j - nxt_first : k_hi + j - nxt_first + 1]
            view = best[k_lo - first : k_hi - first + 1]
            np.minimum(view, cand, out=view)
        tables[k] = (first, best)

    first0, J0 = tables[0]
    if first0 != 0 or not np.isfinite(J0[0]):
        raise InfeasibleGrid("no velocity schedule reaches the target displacement cell")

    K = 0
    vel = np.empty(n_t)
    for k in range(n_t):
        nxt_first, nxt = tables[k + 1]
        idx = K + np.arange(n_v) - nxt_first
        ok = (idx >= 0) & (idx < nxt.size)
        total = np.full(n_v, np.inf)
        total[ok] = (Bbar[k] * levels[ok] + fv[ok]) * dt + nxt[idx[ok]]
        j = int(np.argmin(total))
        vel[k] = levels[j]
        K += j

    t = np.linspace(0.0, spec.T, n_t + 1)
    u = spec.u0[0] + np.concatenate([[0.0], np.cumsum(vel * dt)])
    fin = np.isfinite(fv)
    lip = np.abs(np.diff(fv[fin]) / np.diff(levels[fin])).max() if fin.sum() > 1 else 0.0
    allowance = (float(np.abs(Bbar).max()) + float(lip)) * 0.5 * cell
    cost = B0 * float(spec.u0[0]) + float(J0[0])
    return DPResult(
        cost=cost,
        t=t,
        u=u[:, None],
        v=vel[:, None],
        allowance=allowance,
        endpoint_error=float(abs(u[-1] - spec.u1[0])),
        grid=grid,
    )
