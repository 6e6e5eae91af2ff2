"""Convex-analysis primitives on sampled integrands.

The integrand ``f`` lives on a bounded uniform grid (one or two
coordinates).  Its convex envelope ``f**`` is the lower convex hull of the
finite samples, hence piecewise affine, and every conjugation below is done
exactly on that piecewise-affine data: breakpoints of ``f*`` are slopes of
``f**`` and vice versa.  Nothing is re-sampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, ClassVar, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import DecompositionFailure, DegenerateInput

TOUCH_TOL = 1e-8
SLOPE_RTOL = 1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _as_tuple(v, m: int | None = None) -> tuple[float, ...]:
    t = tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))
    if m is not None and len(t) == 1 and m > 1:
        t = t * m
    return t


# ---------------------------------------------------------------------------
# Sampled integrand
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledFunction:
    """A (possibly non-convex) integrand sampled on a uniform box grid.

    ``values`` has one axis per coordinate; ``np.inf`` marks nodes outside
    the effective domain and never enters arithmetic.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    step: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        m = values.ndim
        lo, hi, step = (_as_tuple(v, m) for v in (self.lo, self.hi, self.step))
        if m not in (1, 2):
            raise ValueError(f"only 1 or 2 coordinates are supported, got {m}")
        if not (len(lo) == len(hi) == len(step) == m):
            raise ValueError("box, step and values have inconsistent dimensions")
        for k in range(m):
            if not step[k] > 0:
                raise ValueError(f"step must be positive (coordinate {k})")
            if not lo[k] < hi[k]:
                raise ValueError(f"degenerate box [{lo[k]}, {hi[k]}] (coordinate {k})")
            n = int(round((hi[k] - lo[k]) / step[k])) + 1
            if abs((n - 1) * step[k] - (hi[k] - lo[k])) > 1e-9 * max(1.0, hi[k] - lo[k]):
                raise ValueError(f"step {step[k]} does not divide the box on coordinate {k}")
            if values.shape[k] != n:
                raise ValueError(
                    f"expected {n} samples along coordinate {k}, got {values.shape[k]}"
                )
        if np.isnan(values).any() or np.isneginf(values).any():
            raise ValueError("samples must be finite or +inf")
        if not np.isfinite(values).any():
            raise DegenerateInput("sampled function has no finite value")
        values.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, func: Callable, lo, hi, step) -> "SampledFunction":
        """Sample ``func`` on the grid; 2-D callables receive ``(X, Y)`` meshes."""
        lo_t, hi_t, step_t = _as_tuple(lo), _as_tuple(hi), _as_tuple(step)
        m = max(len(lo_t), len(hi_t))
        lo_t, hi_t, step_t = _as_tuple(lo_t, m), _as_tuple(hi_t, m), _as_tuple(step_t, m)
        axes = [
            np.linspace(lo_t[k], hi_t[k], int(round((hi_t[k] - lo_t[k]) / step_t[k])) + 1)
            for k in range(m)
        ]
        if m == 1:
            vals = func(axes[0])
        else:
            vals = func(*np.meshgrid(*axes, indexing="ij"))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), tuple(len(a) for a in axes))
        return cls(lo_t, hi_t, step_t, vals)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            _frozen(np.linspace(self.lo[k], self.hi[k], self.values.shape[k]))
            for k in range(self.dim)
        )

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates ``(k, m)`` and values ``(k,)`` of the finite samples."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        coords = np.stack([g.ravel() for g in mesh], axis=1)
        vals = self.values.ravel()
        keep = np.isfinite(vals)
        return coords[keep], vals[keep]

    @property
    def value_range(self) -> float:
        v = self.values[np.isfinite(self.values)]
        return float(v.max() - v.min())

    def __call__(self, x) -> np.ndarray:
        """Grid interpolation (linear / bilinear); ``+inf`` off the box."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self._interp1(x)
        return self._interp2(x)

    def _cell(self, x: np.ndarray, k: int):
        n = self.values.shape[k]
        t = (x - self.lo[k]) / self.step[k]
        outside = (t < -1e-9) | (t > n - 1 + 1e-9)
        t = np.clip(t, 0.0, n - 1)
        i0 = np.minimum(np.floor(t).astype(int), n - 2)
        frac = t - i0
        # snap onto nodes so node evaluation never touches a neighbouring +inf
        frac = np.where(np.abs(frac) < 1e-12, 0.0, frac)
        frac = np.where(np.abs(frac - 1.0) < 1e-12, 1.0, frac)
        return i0, frac, outside

    @staticmethod
    def _mix(a, b, w):
        out = np.where(w == 0.0, a, np.where(w == 1.0, b, np.inf))
        both = np.isfinite(a) & np.isfinite(b) & (w > 0.0) & (w < 1.0)
        return np.where(both, (1.0 - w) * np.where(both, a, 0) + w * np.where(both, b, 0), out)

    def _interp1(self, x):
        i0, w, outside = self._cell(x, 0)
        v = self.values
        out = self._mix(v[i0], v[i0 + 1], w)
        return np.where(outside, np.inf, out)

    def _interp2(self, x):
        x = np.atleast_2d(x)
        i0, wx, ox = self._cell(x[..., 0], 0)
        j0, wy, oy = self._cell(x[..., 1], 1)
        v = self.values
        lower = self._mix(v[i0, j0], v[i0 + 1, j0], wx)
        upper = self._mix(v[i0, j0 + 1], v[i0 + 1, j0 + 1], wx)
        out = self._mix(lower, upper, wy)
        return np.where(ox | oy, np.inf, out)


# ---------------------------------------------------------------------------
# Piecewise-affine convex functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexPiecewise:
    """Convex piecewise-affine function of one variable.

    Between ``x[0]`` and ``x[-1]`` the function interpolates the breakpoints.
    Beyond them it is ``+inf`` when the corresponding tail slope is ``None``
    and affine with that slope otherwise.  Conjugates of box-restricted
    functions have affine tails, which is how the box artifact is recorded.
    """

    x: np.ndarray
    y: np.ndarray
    left_slope: float | None = None
    right_slope: float | None = None

    dim: ClassVar[int] = 1

    def __post_init__(self):
        x = _frozen(np.ravel(self.x))
        y = _frozen(np.ravel(self.y))
        if x.size == 0 or x.size != y.size:
            raise ValueError("breakpoints and values must be non-empty and equal length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("breakpoints must be finite")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        s = self.slopes
        scale = 1e-9 * (1.0 + np.abs(s).max(initial=0.0))
        if np.any(np.diff(s) < -scale):
            raise ValueError("chord slopes are not non-decreasing: function is not convex")
        if self.left_slope is not None and s.size and self.left_slope > s[0] + scale:
            raise ValueError("left tail slope exceeds the first chord slope")
        if self.right_slope is not None and s.size and self.right_slope < s[-1] - scale:
            raise ValueError("right tail slope is below the last chord slope")

    @cached_property
    def slopes(self) -> np.ndarray:
        return _frozen(np.diff(self.y) / np.diff(self.x))

    @property
    def intercepts(self) -> np.ndarray:
        return self.y[:-1] - self.slopes * self.x[:-1]

    @property
    def box(self) -> tuple[float, float]:
        """Range spanned by the breakpoints."""
        return float(self.x[0]), float(self.x[-1])

    @property
    def domain(self) -> tuple[float, float]:
        lo = -np.inf if self.left_slope is not None else float(self.x[0])
        hi = np.inf if self.right_slope is not None else float(self.x[-1])
        return lo, hi

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.interp(q, self.x, self.y)
        left = q < self.x[0]
        right = q > self.x[-1]
        if self.left_slope is None:
            out = np.where(left, np.inf, out)
        else:
            out = np.where(left, self.y[0] + self.left_slope * (q - self.x[0]), out)
        if self.right_slope is None:
            out = np.where(right, np.inf, out)
        else:
            out = np.where(right, self.y[-1] + self.right_slope * (q - self.x[-1]), out)
        return out

    def derivative(self, q) -> np.ndarray:
        """Slope of the affine piece containing ``q``; NaN at breakpoints and outside."""
        q = np.asarray(q, dtype=float)
        s = self.slopes
        if s.size == 0:
            return np.full(q.shape, np.nan)
        j = np.clip(np.searchsorted(self.x, q, side="right") - 1, 0, s.size - 1)
        undefined = np.isin(q, self.x) | (q < self.x[0]) | (q > self.x[-1])
        return np.where(undefined, np.nan, s[j])


@dataclass(frozen=True)
class ConvexPolyhedral:
    """Convex piecewise-affine function of two variables.

    Two dual forms share one container:

    * ``bounded=True`` -- lower convex hull of ``(points, values)``, finite on
      ``conv(points)`` and ``+inf`` outside; ``grads``/``intercepts`` are the
      affine facets and ``simplices`` the triangulation (vertex indices).
    * ``bounded=False`` -- ``max`` of the affine pieces ``grads``/``intercepts``
      on all of R^2; ``points``/``values`` are its vertices.

    Conjugation swaps the roles exactly.
    """

    points: np.ndarray
    values: np.ndarray
    grads: np.ndarray
    intercepts: np.ndarray
    bounded: bool = True
    simplices: np.ndarray | None = None
    # samples lying on the hull but not vertices of it (coplanar); their
    # values are returned exactly at those nodes
    touch_points: np.ndarray | None = None
    touch_values: np.ndarray | None = None

    dim: ClassVar[int] = 2

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(np.reshape(self.points, (-1, 2))))
        object.__setattr__(self, "values", _frozen(np.ravel(self.values)))
        object.__setattr__(self, "grads", _frozen(np.reshape(self.grads, (-1, 2))))
        object.__setattr__(self, "intercepts", _frozen(np.ravel(self.intercepts)))
        if self.simplices is not None:
            object.__setattr__(self, "simplices", _frozen(self.simplices, dtype=int))

    @cached_property
    def _domain_eq(self) -> np.ndarray | None:
        if not self.bounded:
            return None
        return ConvexHull(self.points).equations

    @cached_property
    def _lookup(self) -> dict:
        table = {}
        if self.touch_points is not None:
            table.update((tuple(p), float(v)) for p, v in zip(self.touch_points, self.touch_values))
        table.update((tuple(p), float(v)) for p, v in zip(self.points, self.values))
        return table

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        flat = np.atleast_2d(q).reshape(-1, 2)
        out = (flat @ self.grads.T + self.intercepts).max(axis=1)
        if self.bounded:
            eq = self._domain_eq
            viol = (flat @ eq[:, :2].T + eq[:, 2]).max(axis=1)
            scale = 1e-9 * (1.0 + np.abs(flat).max(axis=1))
            out = np.where(viol > scale, np.inf, out)
        for i, p in enumerate(flat):
            v = self._lookup.get(tuple(p))
            if v is not None:
                out[i] = v
        return out.reshape(q.shape[:-1]) if q.ndim > 1 else out[0]


@dataclass(frozen=True)
class Face:
    """Exposed face ``argmax_x [p.x - g(x)]`` together with its slope ``p``."""

    vertices: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        v = v.reshape(-1, 1) if v.ndim == 1 else v
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "slope", _frozen(np.atleast_1d(self.slope)))

    @property
    def lo(self) -> float:
        return float(self.vertices[:, 0].min())

    @property
    def hi(self) -> float:
        return float(self.vertices[:, 0].max())

    @property
    def is_singleton(self) -> bool:
        return len(self.vertices) == 1

    @property
    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())


@dataclass(frozen=True)
class CaratheodoryCombo:
    """Touching points ``xi_j`` of ``epi f`` whose convex combination gives ``target``."""

    points: np.ndarray
    weights: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts = pts.reshape(-1, 1) if pts.ndim == 1 else pts
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(np.ravel(self.weights)))
        object.__setattr__(self, "target", _frozen(np.atleast_1d(self.target)))

    def check(self, f: SampledFunction, env, tol: float = TOUCH_TOL) -> None:
        """Raise ``DecompositionFailure`` unless all three combo invariants hold."""
        m = self.points.shape[1]
        if len(self.points) > m + 2:
            raise DecompositionFailure(f"{len(self.points)} points exceed m + 2 = {m + 2}")
        w = self.weights
        if np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
            raise DecompositionFailure("weights are not a convex combination")
        if np.abs(w @ self.points - self.target).max() > tol * (1 + np.abs(self.target).max()):
            raise DecompositionFailure("combination does not reproduce the target point")
        arg = self.points[:, 0] if m == 1 else self.points
        fv, ev = np.asarray(f(arg), float), np.asarray(env(arg), float)
        if np.any(np.abs(fv - ev) > tol * (1 + np.abs(ev))):
            raise DecompositionFailure("a combo point does not touch the envelope")
        target = self.target[0] if m == 1 else self.target
        et = float(env(target))
        if abs(w @ fv - et) > tol * (1 + abs(et)):
            raise DecompositionFailure("combination does not realise the envelope value")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _lower_chain(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    # Monotone chain, lower half only.  A point is dropped only when it lies
    # above the chord by more than rounding, so collinear samples stay as
    # breakpoints and are reproduced exactly (no interpolation error there).
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            lhs = (xs[b] - xs[a]) * (ys[i] - ys[a])
            rhs = (ys[b] - ys[a]) * (xs[i] - xs[a])
            # each ys carries rounding of order eps * |ys|
            noise = (xs[i] - xs[a]) * (abs(ys[a]) + abs(ys[b]) + abs(ys[i]))
            if lhs - rhs > -1e-12 * (abs(lhs) + abs(rhs) + noise):
                break
            hull.pop()
        hull.append(i)
    return hull


def _envelope_2d(pts: np.ndarray, vals: np.ndarray) -> ConvexPolyhedral:
    if len(pts) < 3 or np.linalg.matrix_rank(pts[1:] - pts[0]) < 2:
        raise DegenerateInput("need three non-collinear finite samples in two dimensions")
    spread = float(vals.max() - vals.min())
    # An apex far above the data keeps the lifted hull full-dimensional even
    # when every sample has the same value; facets touching it are discarded.
    apex = np.array([*pts.mean(axis=0), vals.max() + 10.0 * (spread + 1.0)])
    lifted = np.vstack([np.column_stack([pts, vals]), apex])
    try:
        hull = ConvexHull(lifted)
    except QhullError as exc:
        raise DegenerateInput(f"lower hull failed: {exc}") from exc
    apex_idx = len(lifted) - 1
    eq = hull.equations
    lower = (eq[:, 2] < -1e-10) & ~np.any(hull.simplices == apex_idx, axis=1)
    simp = hull.simplices[lower]
    eq = eq[lower]
    grads = -eq[:, :2] / eq[:, 2:3]
    icpt = -eq[:, 3] / eq[:, 2]
    used = np.unique(simp)
    remap = {int(old): new for new, old in enumerate(used)}
    simp = np.vectorize(remap.__getitem__)(simp)
    planes = np.round(np.column_stack([grads, icpt]), 12)
    _, first = np.unique(planes, axis=0, return_index=True)
    first = np.sort(first)
    # facet evaluation at a coplanar sample can round above it; keep those
    # samples so envelope values at grid nodes are exact
    terms = np.abs(pts) @ np.abs(grads).T + np.abs(icpt)
    k = np.argmax(pts @ grads.T + icpt, axis=1)
    at = (pts @ grads.T + icpt)[np.arange(len(pts)), k]
    noise = 1e-10 * (1.0 + np.abs(vals) + terms[np.arange(len(pts)), k])
    touch = at >= vals - noise
    touch[used] = False
    return ConvexPolyhedral(
        points=pts[used],
        values=vals[used],
        grads=grads[first],
        intercepts=icpt[first],
        bounded=True,
        simplices=simp,
        touch_points=_frozen(pts[touch]),
        touch_values=_frozen(vals[touch]),
    )


def convex_envelope(f: SampledFunction):
    """Lower convex hull of the finite samples of ``epi f``.

    Returns a :class:`ConvexPiecewise` for one coordinate and a bounded
    :class:`ConvexPolyhedral` for two.
    """
    pts, vals = f.points()
    if f.dim == 1:
        if len(vals) < 2:
            raise DegenerateInput("convex envelope needs at least two finite samples")
        xs = pts[:, 0]
        idx = _lower_chain(xs, vals)
        return ConvexPiecewise(xs[idx], vals[idx])
    return _envelope_2d(pts, vals)


def resample(env, like: SampledFunction) -> SampledFunction:
    """Evaluate ``env`` on the grid of ``like`` (used for idempotence checks)."""
    if like.dim == 1:
        return SampledFunction(like.lo, like.hi, like.step, env(like.axes[0]))
    mesh = np.stack(np.meshgrid(*like.axes, indexing="ij"), axis=-1)
    return SampledFunction(like.lo, like.hi, like.step, env(mesh))


def _merge_close(bx: list[float], by: list[float]) -> tuple[list[float], list[float]]:
    out_x, out_y = [bx[0]], [by[0]]
    for x, y in zip(bx[1:], by[1:]):
        if x - out_x[-1] <= 1e-14 * (1.0 + abs(x)):
            continue
        out_x.append(x)
        out_y.append(y)
    return out_x, out_y


def legendre_conjugate(g):
    """Exact Legendre-Fenchel conjugate of a piecewise-affine convex function.

    In one variable the breakpoints of the result are the chord slopes of
    ``g`` and its slopes are the breakpoints of ``g``; a side on which ``g``
    is ``+inf`` becomes an affine tail and vice versa.  In two variables the
    vertex / facet data are swapped.
    """
    if isinstance(g, ConvexPolyhedral):
        return ConvexPolyhedral(
            points=g.grads,
            values=-g.intercepts,
            grads=g.points,
            intercepts=-g.values,
            bounded=not g.bounded,
            simplices=None,
        )
    x, y, s = g.x, g.y, g.slopes
    bx: list[float] = []
    by: list[float] = []
    if g.left_slope is not None:
        bx.append(float(g.left_slope))
        by.append(float(g.left_slope * x[0] - y[0]))
    for j, sj in enumerate(s):
        bx.append(float(sj))
        by.append(float(sj * x[j] - y[j]))
    if g.right_slope is not None:
        bx.append(float(g.right_slope))
        by.append(float(g.right_slope * x[-1] - y[-1]))
    left = None if g.left_slope is not None else float(x[0])
    right = None if g.right_slope is not None else float(x[-1])
    if not bx:
        # +inf except at one point: the conjugate is affine with slope x[0]
        return ConvexPiecewise([0.0], [-float(y[0])], float(x[0]), float(x[0]))
    bx, by = _merge_close(bx, by)
    return ConvexPiecewise(np.array(bx), np.array(by), left, right)


def exposed_interval(g: ConvexPiecewise, p, rtol: float = SLOPE_RTOL):
    """Vectorised ``argmax_x [p x - g(x)]`` for a one-variable ``g``.

    Returns ``(lo, hi)`` arrays; ``lo == hi`` where the face is a single
    point.  Slopes within ``rtol * (1 + |p|)`` of a chord slope expose the
    whole chord.  Infinite endpoints mean the supremum is not attained.
    """
    p = np.asarray(p, dtype=float)
    xs = list(g.x)
    sig = list(g.slopes)
    if g.left_slope is not None:
        xs.insert(0, -np.inf)
        sig.insert(0, float(g.left_slope))
    if g.right_slope is not None:
        xs.append(np.inf)
        sig.append(float(g.right_slope))
    xs_a = np.array(xs)
    sig_a = np.array(sig)
    tol = rtol * (1.0 + np.abs(p))
    jl = np.searchsorted(sig_a, p - tol, side="left")
    jr = np.searchsorted(sig_a, p + tol, side="right")
    return xs_a[jl], xs_a[jr]


def subdifferential(g, p, rtol: float = SLOPE_RTOL) -> Face:
    """Exposed face of ``g`` at slope ``p``; equals ``d(g*)(p)``."""
    if isinstance(g, ConvexPiecewise):
        p0 = float(np.ravel(p)[0])
        lo, hi = exposed_interval(g, p0, rtol)
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"supremum at slope {p0} is not attained")
        verts = [[lo]] if lo == hi else [[lo], [hi]]
        return Face(np.array(verts), np.array([p0]))
    p = np.asarray(p, dtype=float).reshape(2)
    score = g.points @ p - g.values
    best = score.max()
    active = score >= best - rtol * (1.0 + abs(best) + np.abs(p).sum())
    return Face(_polygon_vertices(g.points[active]), p)


def _polygon_vertices(pts: np.ndarray) -> np.ndarray:
    pts = np.unique(np.round(pts, 13), axis=0)
    if len(pts) <= 2:
        return pts
    centred = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centred, tol=1e-12) < 2:
        direction = np.linalg.svd(centred)[2][0]
        t = centred @ direction
        return pts[[int(np.argmin(t)), int(np.argmax(t))]]
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def _touching_nodes(f: SampledFunction, env: ConvexPiecewise, tol: float) -> np.ndarray:
    pts, vals = f.points()
    xs = pts[:, 0]
    return xs[np.abs(vals - env(xs)) <= tol * (1.0 + np.abs(vals))]


def caratheodory_decompose(
    f: SampledFunction, env, xbar, tol: float = TOUCH_TOL
) -> CaratheodoryCombo:
    """Write ``(xbar, env(xbar))`` as a convex combination of touching points.

    At most ``m + 2`` points are used.  When several faces contain ``xbar``
    the one of smallest diameter is chosen, so in one variable the nearest
    touching samples on either side are returned.
    """
    xbar_v = np.atleast_1d(np.asarray(xbar, dtype=float))
    arg = xbar_v[0] if f.dim == 1 else xbar_v
    e = float(np.ravel(env(arg))[0])
    if not np.isfinite(e):
        raise DecompositionFailure(f"{xbar_v} is outside the envelope domain")
    if abs(float(np.ravel(f(arg))[0]) - e) <= tol * (1.0 + abs(e)):
        return CaratheodoryCombo(xbar_v[None, :], [1.0], xbar_v)

    if f.dim == 1:
        xb = float(xbar_v[0])
        touch = _touching_nodes(f, env, tol)
        left, right = touch[touch <= xb], touch[touch >= xb]
        if not len(left) or not len(right):
            raise DecompositionFailure(f"no touching samples bracket {xb}")
        a, b = float(left.max()), float(right.min())
        if a == b:
            raise DecompositionFailure(f"{xb} touches the envelope but f differs there")
        lam_b = (xb - a) / (b - a)
        pts = np.array([[a], [b]])
        w = np.array([1.0 - lam_b, lam_b])
    else:
        pts, w = _carath_2d(env, xbar_v)

    fv = np.asarray(f(pts[:, 0] if f.dim == 1 else pts), dtype=float)
    if abs(w @ fv - e) > tol * (1.0 + abs(e)) * 10:
        raise DecompositionFailure(
            f"touching points around {xbar_v} do not realise the envelope value"
        )
    return CaratheodoryCombo(pts, w, xbar_v)


def _carath_2d(env: ConvexPolyhedral, xbar: np.ndarray):
    if env.simplices is None:
        raise DecompositionFailure("envelope carries no triangulation")
    best = None
    for tri in env.simplices:
        v = env.points[tri]
        mat = np.vstack([(v[1:] - v[0]).T])
        try:
            lam12 = np.linalg.solve(mat, xbar - v[0])
        except np.linalg.LinAlgError:
            continue
        lam = np.array([1.0 - lam12.sum(), *lam12])
        if np.any(lam < -1e-12):
            continue
        keep = lam > 1e-14
        support = v[keep]
        d = support[:, None, :] - support[None, :, :]
        diam = float(np.sqrt((d**2).sum(-1)).max())
        if best is None or diam < best[0] - 1e-15:
            best = (diam, support, lam[keep] / lam[keep].sum())
    if best is None:
        raise DecompositionFailure(f"no envelope facet contains {xbar}")
    return best[1], best[2]


__all__: Sequence[str] = [
    "SampledFunction",
    "ConvexPiecewise",
    "ConvexPolyhedral",
    "Face",
    "CaratheodoryCombo",
    "convex_envelope",
    "legendre_conjugate",
    "subdifferential",
    "exposed_interval",
    "caratheodory_decompose",
    "resample",
]
