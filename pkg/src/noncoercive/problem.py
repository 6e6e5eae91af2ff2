"""Problem data: horizon, endpoints, linear coefficient ``a(t)`` and integrand."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .convex import SampledFunction


@dataclass(frozen=True)
class LinearTerm:
    """``a(t)`` as uniform samples on ``[0, T]`` (piecewise linear) or a callable.

    A callable receives a 1-D array of times and returns ``(len(t), m)`` or,
    for ``m = 1``, ``(len(t),)``.
    """

    dim: int
    samples: np.ndarray | None = None
    horizon: float | None = None
    func: Callable | None = None

    def __post_init__(self):
        if (self.samples is None) == (self.func is None):
            raise ValueError("give exactly one of samples or func")
        if self.samples is not None:
            s = np.asarray(self.samples, dtype=float)
            s = s.reshape(-1, 1) if s.ndim == 1 else s
            if s.shape[0] < 2:
                raise ValueError("a linear term needs at least two samples")
            if s.shape[1] != self.dim:
                raise ValueError(f"samples have {s.shape[1]} components, expected {self.dim}")
            if self.horizon is None or not self.horizon > 0:
                raise ValueError("sampled linear term needs a positive horizon")
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)

    @classmethod
    def constant(cls, value) -> "LinearTerm":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(dim=v.size, samples=np.vstack([v, v]), horizon=1.0)

    @classmethod
    def zero(cls, dim: int = 1) -> "LinearTerm":
        return cls.constant(np.zeros(dim))

    def with_horizon(self, T: float) -> "LinearTerm":
        if self.samples is None:
            return self
        return LinearTerm(self.dim, self.samples, T)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.func is not None:
            out = np.asarray(self.func(t), dtype=float)
            out = np.broadcast_to(out.reshape(len(t), -1) if out.ndim else out, (len(t), self.dim))
            return np.array(out)
        knots = np.linspace(0.0, self.horizon, self.samples.shape[0])
        return np.column_stack(
            [np.interp(t, knots, self.samples[:, k]) for k in range(self.dim)]
        )


@dataclass(frozen=True)
class ProblemSpec:
    """``min int_0^T [a(t).u(t) + f(u'(t))] dt`` with ``u(0)=u0``, ``u(T)=u1``."""

    T: float
    u0: np.ndarray
    u1: np.ndarray
    a: LinearTerm
    f: SampledFunction

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        u0 = np.atleast_1d(np.asarray(self.u0, dtype=float))
        u1 = np.atleast_1d(np.asarray(self.u1, dtype=float))
        m = self.f.dim
        if u0.size != m or u1.size != m or self.a.dim != m:
            raise ValueError(
                f"dimension mismatch: f has {m}, u0 {u0.size}, u1 {u1.size}, a {self.a.dim}"
            )
        u0.setflags(write=False)
        u1.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "a", self.a.with_horizon(self.T))

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def displacement(self) -> np.ndarray:
        return self.u1 - self.u0

    def shifted(self, delta) -> "ProblemSpec":
        """Same problem with both endpoints moved by ``delta``."""
        d = np.atleast_1d(np.asarray(delta, dtype=float))
        return ProblemSpec(self.T, self.u0 + d, self.u1 + d, self.a, self.f)
