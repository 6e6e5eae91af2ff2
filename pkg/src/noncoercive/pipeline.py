"""End-to-end solve: envelope, growth check, relaxed dual, chattering, certificate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .convex import convex_envelope, legendre_conjugate
from .errors import NoMinimizer
from .growth import GrowthProfile, check_growth
from .problem import ProblemSpec
from .recovery import (
    DEFAULT_CHATTER,
    SolveReport,
    Trajectory,
    assemble,
    chatter,
    decompose_runs,
    detachment_set,
    relaxed_trajectory,
)
from .relaxed import DEFAULT_NODES, RelaxedSolution, solve_relaxed


@dataclass(frozen=True)
class SolveResult:
    env: object
    conj: object
    profile: GrowthProfile
    relaxed: RelaxedSolution
    relaxed_path: Trajectory
    trajectory: Trajectory
    report: SolveReport


def solve(
    spec: ProblemSpec,
    nodes: int = DEFAULT_NODES,
    n_chatter: int = DEFAULT_CHATTER,
    shells: Sequence[float] | None = None,
    tol_cert: float | None = None,
    tol_gap: float | None = None,
    tol_detach: float | None = None,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Solve ``spec`` and certify the recovered trajectory.

    Raises ``NoMinimizer`` (with the growth verdict attached) when the dual
    supremum is not attained, and ``CertificateFailure`` when the recovered
    cost misses the dual bound.
    """
    env = convex_envelope(spec.f)
    conj = legendre_conjugate(env)
    profile = check_growth(env, shells)
    try:
        rel = solve_relaxed(spec, nodes, conj=conj)
    except NoMinimizer as exc:
        exc.verdict = profile.verdict.value
        raise
    runs = detachment_set(rel, spec.f, env, tol_detach)
    combos = decompose_runs(spec.f, env, runs)
    traj = chatter(spec, rel, runs, combos, n_chatter, spec.f, env)
    report = assemble(
        spec,
        rel,
        traj,
        verdict=profile.verdict.value,
        n_detached_runs=len(runs),
        tol_cert=tol_cert,
        tol_gap=tol_gap,
        raise_on_failure=raise_on_failure,
    )
    return SolveResult(
        env, conj, profile, rel, relaxed_trajectory(spec, rel, spec.f, env), traj, report
    )
