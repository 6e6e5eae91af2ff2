"""Dual solution of the convexified problem.

Integrating the linear term by parts,

    int_0^T a.u dt = B(0).u0 + int_0^T B(s).v(s) ds,   B(s) = int_s^T a,

turns the relaxed problem into an isoperimetric one in ``v = u'``:
minimise ``int [B.v + f**(v)]`` subject to ``int v = u1 - u0``.  Its
concave dual is ``h(c) = c.du - int f*(c - B(s)) ds`` and any optimal
``v(s)`` lies in the exposed face ``d f*(c - B(s))`` of ``f**``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .convex import (
    ConvexPiecewise,
    ConvexPolyhedral,
    Face,
    exposed_interval,
    legendre_conjugate,
    subdifferential,
)
from .errors import DualDomainExceeded, InfeasibleSelection, NoMinimizer
from .problem import ProblemSpec

log = logging.getLogger(__name__)

DEFAULT_NODES = 1001


@dataclass(frozen=True)
class AccumulatedTerm:
    s: np.ndarray  # (N,)
    B: np.ndarray  # (N, m)

    @property
    def T(self) -> float:
        return float(self.s[-1])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; node ``i`` owns a cell of exactly this length."""
        h = np.diff(self.s)
        w = np.zeros_like(self.s)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @property
    def cells(self) -> np.ndarray:
        """``(N, 2)`` cell boundaries around each node (midpoints between nodes)."""
        mid = 0.5 * (self.s[:-1] + self.s[1:])
        left = np.concatenate([[self.s[0]], mid])
        right = np.concatenate([mid, [self.s[-1]]])
        return np.column_stack([left, right])


def accumulate(spec: ProblemSpec, N: int = DEFAULT_NODES) -> AccumulatedTerm:
    """``B(s_i) = int_{s_i}^T a`` by the trapezoid rule on ``N`` uniform nodes."""
    if N < 2:
        raise ValueError("need at least two time nodes")
    s = np.linspace(0.0, spec.T, N)
    a = spec.a(s)
    seg = 0.5 * (a[1:] + a[:-1]) * np.diff(s)[:, None]
    B = np.zeros_like(a)
    B[:-1] = np.cumsum(seg[::-1], axis=0)[::-1]
    return AccumulatedTerm(s, B)


# ---------------------------------------------------------------------------
# dual function
# ---------------------------------------------------------------------------


def _slope_box(conj):
    if isinstance(conj, ConvexPiecewise):
        lo, hi = conj.box
        return np.array([lo]), np.array([hi])
    return conj.box


def dual_domain(conj, acc: AccumulatedTerm) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers ``c`` keeping ``c - B(s)`` inside the slope box for every ``s``."""
    lo, hi = _slope_box(conj)
    return lo + acc.B.max(axis=0), hi + acc.B.min(axis=0)


def _eval_conj(conj, p: np.ndarray) -> np.ndarray:
    if isinstance(conj, ConvexPiecewise):
        return conj(p[:, 0])
    return conj(p)


def dual_value(conj, acc: AccumulatedTerm, du, c) -> float:
    """``h(c) = c.du - int_0^T f*(c - B(s)) ds`` (trapezoid)."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    du = np.atleast_1d(np.asarray(du, dtype=float))
    p = c - acc.B
    lo, hi = _slope_box(conj)
    slack = 1e-12 * (1.0 + np.abs(p).max())
    if np.any(p < lo - slack) or np.any(p > hi + slack):
        raise DualDomainExceeded(
            f"c - B(s) spans [{p.min(axis=0)}, {p.max(axis=0)}], "
            f"outside the slope box [{lo}, {hi}]"
        )
    return float(c @ du - acc.weights @ _eval_conj(conj, p))


# ---------------------------------------------------------------------------
# maximisation
# ---------------------------------------------------------------------------


def _integrated_faces(env: ConvexPiecewise, acc: AccumulatedTerm, c: float):
    lo, hi = exposed_interval(env, c - acc.B[:, 0])
    w = acc.weights
    return float(w @ lo), float(w @ hi)


def maximize_dual(conj, acc: AccumulatedTerm, du, tol: float = 1e-10, max_iter: int = 10_000):
    """Maximiser ``c`` of the dual function.

    One coordinate: ``c -> [int min d f*(c-B), int max d f*(c-B)]`` is a
    monotone step-valued map that only jumps at ``c = B(s_i) + sigma_j``
    (``sigma_j`` the breakpoints of ``f*``), so the bisection runs over that
    finite sorted set and returns a ``c`` whose bracket contains ``du``.
    Where ``du`` is attained on a whole open interval of multipliers its
    midpoint is returned, which keeps every face a singleton.

    Two coordinates: supergradient ascent followed by an active-set LP
    polish (see :func:`_maximize_dual_2d`).
    """
    du = np.atleast_1d(np.asarray(du, dtype=float))
    if isinstance(conj, ConvexPolyhedral):
        return _maximize_dual_2d(conj, acc, du, tol, max_iter)

    env = legendre_conjugate(conj)
    c_lo, c_hi = (float(v[0]) for v in dual_domain(conj, acc))
    target = float(du[0])
    tol_c = tol * (1.0 + abs(target))
    if c_lo > c_hi:
        raise NoMinimizer(
            f"dual domain is empty: B(s) varies by {np.ptp(acc.B):.6g}, more than the "
            f"slope box width {conj.box[1] - conj.box[0]:.6g}"
        )
    B = acc.B[:, 0]
    cand = (B[:, None] + conj.x[None, :]).ravel()
    cand = np.unique(np.concatenate([cand[(cand > c_lo) & (cand < c_hi)], [c_lo, c_hi]]))

    v_lo_left, _ = _integrated_faces(env, acc, cand[0])
    _, v_hi_right = _integrated_faces(env, acc, cand[-1])
    log.debug("dual bracket c in [%g, %g] -> [%g, %g]", c_lo, c_hi, v_lo_left, v_hi_right)
    if v_hi_right < target - tol_c or v_lo_left > target + tol_c:
        raise NoMinimizer(
            f"displacement {target:.6g} is outside [{v_lo_left:.6g}, {v_hi_right:.6g}], the "
            f"range reachable with multipliers in the dual domain [{c_lo:.6g}, {c_hi:.6g}]; "
            "the dual supremum is not attained"
        )

    lo_i, hi_i = 0, len(cand) - 1
    while lo_i < hi_i:
        mid = (lo_i + hi_i) // 2
        if _integrated_faces(env, acc, cand[mid])[1] >= target - tol_c:
            hi_i = mid
        else:
            lo_i = mid + 1
    j = lo_i
    v_lo, v_hi = _integrated_faces(env, acc, cand[j])
    if v_lo > target + tol_c:
        raise NoMinimizer(f"monotone bracket broken at c = {cand[j]:.17g}")
    if abs(v_hi - target) <= tol_c and j + 1 < len(cand):
        c_mid = 0.5 * (cand[j] + cand[j + 1])
        v_mid = _integrated_faces(env, acc, c_mid)
        if abs(v_mid[0] - target) <= tol_c and abs(v_mid[1] - target) <= tol_c:
            return np.array([c_mid])
    return np.array([cand[j]])


def _faces_2d(env: ConvexPolyhedral, p: np.ndarray, eps: float):
    scores = p @ env.points.T - env.values
    best = scores.max(axis=1, keepdims=True)
    return scores >= best - eps * (1.0 + np.abs(best))


def _selection_lp(env, acc, du, active, cost_rows=None):
    """Weights over active vertices per node; L1-minimal constraint residual."""
    N = acc.s.size
    rows, cols = np.nonzero(active)
    nvar = rows.size
    w = acc.weights
    X = env.points[cols]
    A_sum = sparse.csr_matrix((np.ones(nvar), (rows, np.arange(nvar))), shape=(N, nvar))
    A_du = sparse.csr_matrix((w[rows][None, :] * X.T))
    eye = sparse.identity(2, format="csr")
    A_eq = sparse.vstack(
        [
            sparse.hstack([A_sum, sparse.csr_matrix((N, 4))]),
            sparse.hstack([A_du, eye, -eye]),
        ],
        format="csr",
    )
    b_eq = np.concatenate([np.ones(N), du])
    if cost_rows is None:
        cost = np.concatenate([np.zeros(nvar), np.ones(4)])
    else:
        cost = np.concatenate([cost_rows, np.full(4, 1e6)])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    lam = res.x[:nvar]
    residual = float(res.x[nvar:].sum())
    v = np.zeros((N, 2))
    np.add.at(v, rows, lam[:, None] * X)
    return res, v, residual


def _maximize_dual_2d(conj, acc, du, tol, max_iter):
    env = legendre_conjugate(conj)
    c_lo, c_hi = dual_domain(conj, acc)
    if np.any(c_lo > c_hi):
        raise NoMinimizer("dual domain is empty: B(s) varies by more than the slope box")
    c = 0.5 * (c_lo + c_hi)
    w = acc.weights

    def h_and_g(cc):
        p = cc - acc.B
        scores = p @ env.points.T - env.values
        idx = scores.argmax(axis=1)
        fstar = scores[np.arange(len(idx)), idx]
        v = env.points[idx]
        return float(cc @ du - w @ fstar), du - w @ v

    h, g = h_and_g(c)
    best_c, best_h = c.copy(), h
    delta = 1.0 + abs(h)
    stall = 0
    for k in range(1, max_iter + 1):
        gn = float(g @ g)
        if gn <= tol**2:
            break
        step = (best_h + delta - h) / gn
        c = np.clip(c + step * g, c_lo, c_hi)
        h, g = h_and_g(c)
        if h > best_h + 1e-15 * (1.0 + abs(best_h)):
            best_c, best_h, stall = c.copy(), h, 0
        else:
            stall += 1
            if stall >= 10:
                delta *= 0.5
                c, stall = best_c.copy(), 0
                h, g = h_and_g(c)
        if delta < tol * (1.0 + abs(best_h)):
            break
    log.debug("2-D ascent stopped after %d iterations, h = %.12g", k, best_h)

    # Active-set polish: the relaxed problem restricted to near-active
    # vertices is a small LP whose constraint multiplier is the exact c.
    span = float(np.ptp(env.values)) + float(np.abs(env.points).max()) * float(
        np.abs(best_c).max() + np.abs(acc.B).max() + 1.0
    )
    cost_all = None
    for frac in (1e-4, 1e-3, 1e-2, 1e-1, np.inf):
        active = _faces_2d(env, best_c - acc.B, frac * span if np.isfinite(frac) else np.inf)
        rows, cols = np.nonzero(active)
        cost_all = w[rows] * ((acc.B[rows] * env.points[cols]).sum(axis=1) + env.values[cols])
        out = _selection_lp(env, acc, du, active, cost_rows=cost_all)
        if out is None:
            continue
        res, _, residual = out
        if residual > tol * (1.0 + np.abs(du).max()):
            continue
        c_lp = np.asarray(res.eqlin.marginals[-2:], dtype=float)
        c_lp = np.clip(c_lp, c_lo, c_hi)
        exact = _faces_2d(env, c_lp - acc.B, 1e-9)
        check = _selection_lp(env, acc, du, exact)
        if check is not None and check[2] <= 1e-8 * (1.0 + np.abs(du).max()):
            return c_lp
    raise NoMinimizer("dual ascent could not certify a maximiser inside the dual domain")


# ---------------------------------------------------------------------------
# primal recovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultivaluedSegment:
    t0: float
    t1: float
    face: Face


@dataclass(frozen=True)
class RelaxedSolution:
    c: np.ndarray
    acc: AccumulatedTerm
    v: np.ndarray  # (N, m) selection per node
    multivalued: np.ndarray  # (N,) bool
    multivalued_segments: tuple[MultivaluedSegment, ...]
    relaxed_cost: float
    dual_value: float
    du: np.ndarray
    offset: float = 0.0
    theta: float | None = None
    fy_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def s(self) -> np.ndarray:
        return self.acc.s

    @property
    def duality_gap(self) -> float:
        return self.relaxed_cost - self.dual_value

    @property
    def constraint_residual(self) -> float:
        return float(np.abs(self.acc.weights @ self.v - self.du).max())


def _segments(acc: AccumulatedTerm, mask: np.ndarray, faces: list) -> tuple:
    cells = acc.cells
    out = []
    i = 0
    N = mask.size
    while i < N:
        if not mask[i]:
            i += 1
            continue
        j = i
        while (
            j + 1 < N
            and mask[j + 1]
            and faces[j + 1].vertices.shape == faces[i].vertices.shape
            and np.array_equal(faces[j + 1].vertices, faces[i].vertices)
        ):
            j += 1
        out.append(MultivaluedSegment(float(cells[i, 0]), float(cells[j, 1]), faces[i]))
        i = j + 1
    return tuple(out)


def primal_selection(conj, acc: AccumulatedTerm, c, du, offset: float = 0.0) -> RelaxedSolution:
    """Pick ``v(s)`` in ``d f*(c - B(s))`` with ``int v = du``.

    One coordinate: singleton faces fix ``v``; on multivalued nodes a single
    global fraction ``theta`` between the face endpoints closes the
    constraint.  Two coordinates: an LP over the face vertices.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    du = np.atleast_1d(np.asarray(du, dtype=float))
    env = legendre_conjugate(conj)
    w = acc.weights
    p = c - acc.B
    m = du.size
    theta = None

    if m == 1:
        lo, hi = exposed_interval(env, p[:, 0])
        multi = hi > lo
        fixed = float(w[~multi] @ lo[~multi])
        base = float(w[multi] @ lo[multi])
        width = float(w[multi] @ (hi[multi] - lo[multi]))
        tol_sel = 1e-8 * (1.0 + abs(du[0]))
        if width > 0:
            theta = (du[0] - fixed - base) / width
            if theta < -tol_sel or theta > 1 + tol_sel:
                raise InfeasibleSelection(f"face fraction {theta:.6g} outside [0, 1]")
            theta = float(np.clip(theta, 0.0, 1.0))
        v1 = np.where(multi, lo + (theta or 0.0) * (hi - lo), lo)
        v = v1[:, None]
        faces = [
            Face(np.array([[a], [b]]), p[i]) if multi[i] else None
            for i, (a, b) in enumerate(zip(lo, hi))
        ]
    else:
        active = _faces_2d(env, p, 1e-9)
        out = _selection_lp(env, acc, du, active)
        if out is None or out[2] > 1e-8 * (1.0 + np.abs(du).max()):
            raise InfeasibleSelection("no face selection meets the displacement constraint")
        v = out[1]
        multi = active.sum(axis=1) > 1
        faces = [subdifferential(env, p[i]) if multi[i] else None for i in range(p.shape[0])]

    if np.abs(w @ v - du).max() > 1e-8 * (1.0 + np.abs(du).max()):
        raise InfeasibleSelection(
            f"selection integrates to {w @ v}, not {du}"
        )
    env_v = env(v[:, 0]) if m == 1 else env(v)
    fstar = _eval_conj(conj, p)
    # Fenchel-Young equality f**(v) + f*(p) = p.v certifies v in d f*(p)
    fy = float(np.abs(env_v + fstar - (p * v).sum(axis=1)).max())
    relaxed = offset + float(w @ ((acc.B * v).sum(axis=1) + env_v))
    dual = offset + dual_value(conj, acc, du, c)
    return RelaxedSolution(
        c=c,
        acc=acc,
        v=v,
        multivalued=multi,
        multivalued_segments=_segments(acc, multi, faces),
        relaxed_cost=relaxed,
        dual_value=dual,
        du=du,
        offset=offset,
        theta=theta,
        fy_residual=fy,
    )


def solve_relaxed(spec: ProblemSpec, N: int = DEFAULT_NODES, conj=None, tol: float = 1e-10):
    """Envelope, conjugate, ``B``, multiplier and selection for ``spec``."""
    from .convex import convex_envelope

    if conj is None:
        conj = legendre_conjugate(convex_envelope(spec.f))
    acc = accumulate(spec, N)
    du = spec.displacement
    c = maximize_dual(conj, acc, du, tol=tol)
    offset = float(acc.B[0] @ spec.u0)
    return primal_selection(conj, acc, c, du, offset=offset)
