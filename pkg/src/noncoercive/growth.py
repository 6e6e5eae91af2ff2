"""Numerical check of the growth condition on the convex envelope.

For a piecewise-affine ``f**`` the quantity ``f**(x) - x . grad f**(x)`` is
constant on each affine piece: it is the intercept of that piece, and it
also equals ``-f*(grad f**(x))``.  The profile records, per radial shell,
the largest such value over the pieces meeting the shell.  Membership in
the class is an asymptotic property, so the verdict is three-valued.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import warnings

import numpy as np

from .convex import ConvexPiecewise, ConvexPolyhedral, legendre_conjugate


class Verdict(str, Enum):
    IN_CLASS_F = "InClassF"
    NOT_IN_CLASS_F = "NotInClassF"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


class EmptyShell(UserWarning):
    """A shell contains no point of differentiability (recorded, not raised)."""


@dataclass(frozen=True)
class GrowthProfile:
    radii: np.ndarray
    g_max: np.ndarray  # NaN marks an empty shell
    outer: float
    verdict: Verdict = Verdict.INCONCLUSIVE
    divergence_slope: float = float("nan")
    empty_shells: tuple[int, ...] = field(default=())
    cross_check_error: float = 0.0

    def rows(self):
        for r, g in zip(self.radii, self.g_max):
            yield float(r), float(g), self.verdict.value


def default_shells(env, n_shells: int = 8) -> np.ndarray:
    r_max = _outer_radius(env)
    return np.linspace(0.0, r_max, n_shells, endpoint=False)


def default_threshold(env) -> float:
    """Scale-aware threshold: a tenth of the envelope's range, negated."""
    vals = env.y if isinstance(env, ConvexPiecewise) else env.values
    return -0.1 * float(vals.max() - vals.min())


def _outer_radius(env) -> float:
    if isinstance(env, ConvexPiecewise):
        return float(max(abs(env.x[0]), abs(env.x[-1])))
    return float(np.sqrt((env.points**2).sum(axis=1)).max())


def _pieces_1d(env: ConvexPiecewise):
    """Yield ``(r_lo, r_hi, lo, hi, slope)`` per piece, split at the origin."""
    for a, b, s in zip(env.x[:-1], env.x[1:], env.slopes):
        parts = [(a, b)] if (a >= 0 or b <= 0) else [(a, 0.0), (0.0, b)]
        for lo, hi in parts:
            r_lo, r_hi = sorted((abs(lo), abs(hi)))
            yield r_lo, r_hi, lo, hi, s


def growth_profile(
    env,
    shells: Sequence[float] | None = None,
    cross_tol: float = 1e-8,
) -> GrowthProfile:
    """Per-shell maximum of ``f**(x) - x . grad f**(x)``.

    Shell ``i`` is ``r_i <= |x| < r_{i+1}``; the last one is closed at the
    outer radius of the envelope's domain.  Each value is computed at the
    midpoint of the piece's portion inside the shell and cross-checked
    against ``-f*(slope)``.
    """
    radii = np.asarray(default_shells(env) if shells is None else shells, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0):
        raise ValueError("shell radii must be a non-empty strictly increasing list")
    outer = _outer_radius(env)
    edges = np.append(radii, max(outer, radii[-1]))
    conj = legendre_conjugate(env)
    g_max = np.full(radii.size, -np.inf)
    worst = 0.0

    def record(k, value, check):
        nonlocal worst
        worst = max(worst, abs(value - check) / (1.0 + abs(value)))
        g_max[k] = max(g_max[k], value)

    if isinstance(env, ConvexPiecewise):
        for r_lo, r_hi, lo, hi, s in _pieces_1d(env):
            for k in range(radii.size):
                top = min(r_hi, edges[k + 1])
                bottom = max(r_lo, edges[k])
                if top <= bottom:
                    continue
                mid_r = 0.5 * (bottom + top)
                x_mid = mid_r if hi > 0 else -mid_r
                value = float(env(x_mid) - x_mid * s)
                record(k, value, -float(conj(s)))
    else:
        norms = np.sqrt((env.points**2).sum(axis=1))
        simplices = env.simplices if env.simplices is not None else []
        for tri in simplices:
            v = env.points[tri]
            centroid = v.mean(axis=0)
            r_lo, r_hi = _triangle_distance(v), float(norms[tri].max())
            grad = _facet_gradient(env, centroid)
            value = float(env(centroid) - centroid @ grad)
            check = -float(conj(grad))
            for k in range(radii.size):
                a, b = edges[k], edges[k + 1]
                if r_hi < a or r_lo > b or (r_lo == b and k < radii.size - 1):
                    continue
                record(k, value, check)

    if worst > cross_tol:
        raise ArithmeticError(
            f"intercept and conjugate disagree by {worst:.3e} (relative)"
        )
    empty = tuple(int(k) for k in np.flatnonzero(~np.isfinite(g_max)))
    g_max[list(empty)] = np.nan
    if empty:
        warnings.warn(f"empty shells {empty}", EmptyShell, stacklevel=2)
    return GrowthProfile(radii, g_max, outer, empty_shells=empty, cross_check_error=worst)


def _triangle_distance(v: np.ndarray) -> float:
    """Distance from the origin to the triangle with vertices ``v``."""
    M = (v[1:] - v[0]).T
    if abs(np.linalg.det(M)) > 0:
        lam = np.linalg.solve(M, -v[0])
        if lam.min() >= 0 and lam.sum() <= 1:
            return 0.0
    best = np.inf
    for a, b in ((v[0], v[1]), (v[1], v[2]), (v[2], v[0])):
        e = b - a
        t = np.clip(-(a @ e) / (e @ e), 0.0, 1.0) if e @ e > 0 else 0.0
        best = min(best, float(np.linalg.norm(a + t * e)))
    return best


def _facet_gradient(env: ConvexPolyhedral, x: np.ndarray) -> np.ndarray:
    vals = env.grads @ x + env.intercepts
    return env.grads[int(np.argmax(vals))]


def classify_class_f(
    profile: GrowthProfile,
    threshold: float,
    min_decrease_shells: int = 3,
    flat_tol: float = 1e-6,
) -> Verdict:
    """Three-valued decision on the tail of the profile.

    * InClassF: the last ``min_decrease_shells`` non-empty values decrease
      strictly and the final one is below ``threshold``.
    * NotInClassF: the final value is bounded below by the smallest earlier
      tail value (within ``flat_tol``), i.e. the profile stopped decreasing.
    * Inconclusive otherwise.
    """
    g = profile.g_max[np.isfinite(profile.g_max)]
    if g.size == 0:
        raise ValueError("profile has no non-empty shell")
    k = max(2, int(min_decrease_shells))
    tail = g[-k:]
    if tail.size >= k and np.all(np.diff(tail) < 0) and tail[-1] < threshold:
        return Verdict.IN_CLASS_F
    if tail.size == 1:
        return Verdict.INCONCLUSIVE
    floor = tail[:-1].min()
    if tail[-1] >= floor - flat_tol * (1.0 + abs(floor)):
        return Verdict.NOT_IN_CLASS_F
    return Verdict.INCONCLUSIVE


def check_growth(
    env,
    shells: Sequence[float] | None = None,
    threshold: float | None = None,
    min_decrease_shells: int = 3,
) -> GrowthProfile:
    """Profile plus verdict plus a least-squares slope of the tail values."""
    prof = growth_profile(env, shells)
    thr = default_threshold(env) if threshold is None else threshold
    verdict = classify_class_f(prof, thr, min_decrease_shells)
    ok = np.isfinite(prof.g_max)
    r, g = prof.radii[ok], prof.g_max[ok]
    k = max(2, min_decrease_shells)
    slope = float(np.polyfit(r[-k:], g[-k:], 1)[0]) if r.size >= 2 else float("nan")
    return GrowthProfile(
        prof.radii,
        prof.g_max,
        prof.outer,
        verdict,
        slope,
        prof.empty_shells,
        prof.cross_check_error,
    )
