"""Recovery of a minimiser of the original (non-convex) problem.

Where the relaxed velocity sits strictly inside a face of ``f**`` with
``f(v) > f**(v)``, the velocity is replaced by a fast switch between the
touching points of a Caratheodory decomposition of ``v``.  Time fractions
equal the convex weights, so ``int v`` is unchanged over every run and the
cost under ``f`` equals the relaxed cost under ``f**`` up to the variation
of ``B(s)`` across a chattering piece.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .convex import CaratheodoryCombo, SampledFunction, caratheodory_decompose
from .errors import CertificateFailure, ComboMismatch
from .problem import ProblemSpec
from .relaxed import RelaxedSolution

DEFAULT_CHATTER = 16


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear ``u`` on ``t`` with constant velocity ``v[k]`` on ``[t[k], t[k+1]]``."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost_f: float
    cost_env: float

    @classmethod
    def from_segments(cls, spec: ProblemSpec, t: np.ndarray, v: np.ndarray, f, env):
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float).reshape(len(t) - 1, -1)
        dt = np.diff(t)
        u = np.vstack([spec.u0, spec.u0 + np.cumsum(v * dt[:, None], axis=0)])
        a = spec.a(t)
        au = (a * u).sum(axis=1)
        linear = float(0.5 * dt @ (au[1:] + au[:-1]))
        arg = v[:, 0] if v.shape[1] == 1 else v
        cost_f = linear + float(dt @ np.asarray(f(arg), dtype=float))
        cost_env = linear + float(dt @ np.asarray(env(arg), dtype=float))
        return cls(t, u, v, cost_f, cost_env)

    def u_at(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.column_stack(
            [np.interp(times, self.t, self.u[:, k]) for k in range(self.u.shape[1])]
        )

    def sup_distance(self, other: "Trajectory") -> float:
        """``sup_t |u - u_other|``; exact for piecewise-linear paths."""
        grid = np.union1d(self.t, other.t)
        return float(np.abs(self.u_at(grid) - other.u_at(grid)).max())

    @property
    def n_switches(self) -> int:
        return int(np.any(np.diff(self.v, axis=0) != 0, axis=1).sum())


@dataclass(frozen=True)
class DetachedRun:
    """Maximal run of consecutive cells with one detached velocity ``v``."""

    t0: float
    t1: float
    v: np.ndarray
    first: int
    last: int


def default_tol_detach(f: SampledFunction) -> float:
    return 1e-6 * (1.0 + f.value_range)


def relaxed_trajectory(spec: ProblemSpec, rel: RelaxedSolution, f, env) -> Trajectory:
    cells = rel.acc.cells
    t = np.concatenate([[cells[0, 0]], cells[:, 1]])
    return Trajectory.from_segments(spec, t, rel.v, f, env)


def detachment_set(rel: RelaxedSolution, f: SampledFunction, env, tol_detach=None):
    """Runs of cells where ``f(v) - f**(v) > tol_detach``.

    Consecutive detached cells are merged while the velocity is unchanged;
    a change of velocity starts a new run.
    """
    tol = default_tol_detach(f) if tol_detach is None else tol_detach
    arg = rel.v[:, 0] if rel.v.shape[1] == 1 else rel.v
    gap = np.asarray(f(arg), dtype=float) - np.asarray(env(arg), dtype=float)
    detached = gap > tol
    cells = rel.acc.cells
    runs = []
    i, N = 0, detached.size
    while i < N:
        if not detached[i]:
            i += 1
            continue
        j = i
        while j + 1 < N and detached[j + 1] and np.array_equal(rel.v[j + 1], rel.v[i]):
            j += 1
        runs.append(DetachedRun(float(cells[i, 0]), float(cells[j, 1]), rel.v[i].copy(), i, j))
        i = j + 1
    return runs


def _run_segments(run: DetachedRun, combo: CaratheodoryCombo, n_chatter: int):
    order = np.argsort(-combo.weights, kind="stable")
    lam = combo.weights[order]
    pts = combo.points[order]
    keep = lam > 0
    lam, pts = lam[keep], pts[keep]
    cum = np.cumsum(lam)[:-1]
    length = (run.t1 - run.t0) / n_chatter
    bounds, vel = [], []
    for q in range(n_chatter):
        a = run.t0 + q * length
        b = run.t1 if q == n_chatter - 1 else run.t0 + (q + 1) * length
        bounds.extend([a, *(a + cum * (b - a))])
        vel.extend(pts)
    return bounds, vel


def chatter(
    spec: ProblemSpec,
    rel: RelaxedSolution,
    runs,
    combos,
    n_chatter: int = DEFAULT_CHATTER,
    f=None,
    env=None,
    tol: float = 1e-9,
) -> Trajectory:
    """Replace each detached run by ``n_chatter`` repetitions of its combo.

    Within a repetition the touching points are visited in order of
    decreasing weight, each for its weight's share of the time.
    """
    if n_chatter < 1:
        raise ValueError("n_chatter must be at least 1")
    if len(runs) != len(combos):
        raise ValueError("one combo per detached run is required")
    f = spec.f if f is None else f
    cells = rel.acc.cells
    by_start = {}
    for run, combo in zip(runs, combos):
        rep = combo.weights @ combo.points
        if np.abs(rep - run.v).max() > tol * (1.0 + np.abs(run.v).max()):
            raise ComboMismatch(f"combo represents {rep}, run velocity is {run.v}")
        by_start[run.first] = (run, combo)

    bounds: list[float] = []
    vel: list[np.ndarray] = []
    i, N = 0, rel.v.shape[0]
    while i < N:
        if i in by_start:
            run, combo = by_start[i]
            b, v = _run_segments(run, combo, n_chatter)
            bounds.extend(b)
            vel.extend(v)
            i = run.last + 1
        else:
            bounds.append(float(cells[i, 0]))
            vel.append(rel.v[i])
            i += 1
    bounds.append(float(cells[-1, 1]))
    return Trajectory.from_segments(spec, np.array(bounds), np.array(vel), f, env)


def decompose_runs(f: SampledFunction, env, runs) -> list[CaratheodoryCombo]:
    return [caratheodory_decompose(f, env, run.v) for run in runs]


@dataclass
class SolveReport:
    relaxed_cost: float
    dual_value: float
    duality_gap: float
    cost_f: float
    cost_env: float
    gap: float
    endpoint_residual: float
    verdict: str
    is_minimizer: bool
    multiplier: list
    theta: float | None
    n_detached_runs: int
    n_switches: int
    tol_cert: float
    tol_gap: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def assemble(
    spec: ProblemSpec,
    rel: RelaxedSolution,
    traj: Trajectory,
    verdict: str = "Inconclusive",
    n_detached_runs: int = 0,
    tol_cert: float | None = None,
    tol_gap: float | None = None,
    raise_on_failure: bool = True,
) -> SolveReport:
    """Collect costs and the optimality certificate for a recovered trajectory.

    ``is_minimizer`` requires ``cost_f - relaxed_cost <= tol_cert`` and
    ``relaxed_cost - dual_value <= tol_gap``.
    """
    tol_cert = 1e-4 * (1.0 + abs(rel.relaxed_cost)) if tol_cert is None else tol_cert
    tol_gap = 1e-5 * (1.0 + abs(rel.dual_value)) if tol_gap is None else tol_gap
    gap = traj.cost_f - rel.relaxed_cost
    dgap = rel.duality_gap
    report = SolveReport(
        relaxed_cost=rel.relaxed_cost,
        dual_value=rel.dual_value,
        duality_gap=dgap,
        cost_f=traj.cost_f,
        cost_env=traj.cost_env,
        gap=gap,
        endpoint_residual=float(np.abs(traj.u[-1] - spec.u1).max()),
        verdict=str(verdict),
        is_minimizer=bool(gap <= tol_cert and dgap <= tol_gap),
        multiplier=[float(x) for x in rel.c],
        theta=rel.theta,
        n_detached_runs=n_detached_runs,
        n_switches=traj.n_switches,
        tol_cert=tol_cert,
        tol_gap=tol_gap,
    )
    if raise_on_failure and not report.is_minimizer:
        raise CertificateFailure(
            f"certificate failed: cost gap {gap:.3e} (tol {tol_cert:.1e}), "
            f"duality gap {dgap:.3e} (tol {tol_gap:.1e})",
            report,
        )
    return report
