import numpy as np
import pytest

from noncoercive import (
    CaratheodoryCombo,
    CertificateFailure,
    ComboMismatch,
    DPGrid,
    LinearTerm,
    SampledFunction,
    assemble,
    chatter,
    convex_envelope,
    detachment_set,
    dp_minimize,
    solve,
    solve_relaxed,
)
from noncoercive.recovery import Trajectory, decompose_runs, relaxed_trajectory

from conftest import double_well, make_spec


def relaxed_parts(spec, N=101):
    env = convex_envelope(spec.f)
    return env, solve_relaxed(spec, N)


# --- detachment_set ----------------------------------------------------------


def test_convex_integrand_has_no_detachment(square):
    for a in (None, LinearTerm.constant(1.0)):
        spec = make_spec(square, a, u1=0.3)
        env, rel = relaxed_parts(spec)
        assert detachment_set(rel, square, env) == []


def test_double_well_detaches_everywhere(dw):
    spec = make_spec(dw)
    env, rel = relaxed_parts(spec)
    (run,) = detachment_set(rel, dw, env)
    assert (run.t0, run.t1) == (0.0, 1.0)
    assert dw(0.0) - env(0.0) == 1.0
    assert (run.first, run.last) == (0, 100)


def test_detachment_runs_are_maximal_and_disjoint():
    # a steep ramp sweeps c - B(s) across the faces of the envelope
    f = SampledFunction.from_callable(double_well, -2, 2, 0.5)
    spec = make_spec(f, LinearTerm(1, func=lambda t: 40 * (t - 0.5)), u1=0.0)
    env, rel = relaxed_parts(spec, 201)
    runs = detachment_set(rel, f, env)
    assert len(runs) == 2
    for run in runs:
        seg = rel.v[run.first : run.last + 1, 0]
        assert np.all(seg == run.v[0])
        assert f(run.v[0]) - env(run.v[0]) > 0
        for k in (run.first - 1, run.last + 1):
            if 0 <= k < rel.v.shape[0]:
                gap = f(rel.v[k, 0]) - env(rel.v[k, 0])
                assert gap <= 1e-6 * (1 + f.value_range) or rel.v[k, 0] != run.v[0]
    for r1, r2 in zip(runs, runs[1:]):
        assert r1.t1 <= r2.t0


# --- chatter -----------------------------------------------------------------


def test_chatter_single_switch(dw):
    spec = make_spec(dw)
    env, rel = relaxed_parts(spec)
    runs = detachment_set(rel, dw, env)
    combo = CaratheodoryCombo([[-1.0], [1.0]], [0.5, 0.5], [0.0])
    traj = chatter(spec, rel, runs, [combo], 1, dw, env)
    np.testing.assert_array_equal(traj.t, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(traj.v[:, 0], [-1.0, 1.0])
    assert traj.u[-1, 0] == 0.0
    assert traj.cost_f == 0.0


def test_chatter_sawtooth(dw):
    spec = make_spec(dw)
    env, rel = relaxed_parts(spec)
    runs = detachment_set(rel, dw, env)
    traj = chatter(spec, rel, runs, decompose_runs(dw, env, runs), 4, dw, env)
    assert traj.t.size == 9
    assert np.abs(traj.u).max() == pytest.approx(1 / 8)
    assert traj.u[-1, 0] == pytest.approx(0.0, abs=1e-15)
    assert traj.cost_f == 0.0
    assert traj.n_switches == 7


def test_chatter_leaves_convex_solution_unchanged(square):
    spec = make_spec(square, LinearTerm.constant(1.0))
    env, rel = relaxed_parts(spec)
    traj = chatter(spec, rel, [], [], 16, square, env)
    ref = relaxed_trajectory(spec, rel, square, env)
    np.testing.assert_array_equal(traj.t, ref.t)
    np.testing.assert_array_equal(traj.v, ref.v)
    assert traj.cost_f == ref.cost_f


def test_combo_mismatch(dw):
    spec = make_spec(dw)
    env, rel = relaxed_parts(spec)
    runs = detachment_set(rel, dw, env)
    bad = CaratheodoryCombo([[-1.0], [1.0]], [0.25, 0.75], [0.5])
    with pytest.raises(ComboMismatch):
        chatter(spec, rel, runs, [bad], 4, dw, env)


def test_chatter_preserves_run_integrals():
    f = SampledFunction.from_callable(lambda x: (x**2 - 1) ** 2 + 0.3 * x, -2, 2, 0.1)
    spec = make_spec(f, LinearTerm(1, samples=[1.0, -1.0, 0.5], horizon=1.0), u1=0.2)
    env, rel = relaxed_parts(spec, 401)
    runs = detachment_set(rel, f, env)
    assert runs
    traj = chatter(spec, rel, runs, decompose_runs(f, env, runs), 5, f, env)
    relaxed = relaxed_trajectory(spec, rel, f, env)
    for run in runs:
        a, b = traj.u_at([run.t0, run.t1])[:, 0]
        ra, rb = relaxed.u_at([run.t0, run.t1])[:, 0]
        assert b - a == pytest.approx(rb - ra, abs=1e-14)
    assert traj.cost_f >= traj.cost_env - 1e-12


def test_trajectory_telescopes():
    f = SampledFunction.from_callable(double_well, -2, 2, 0.5)
    spec = make_spec(f, u0=1.5)
    t = np.array([0.0, 0.2, 0.7, 1.0])
    v = np.array([1.0, -2.0, 0.5])
    traj = Trajectory.from_segments(spec, t, v, f, convex_envelope(f))
    np.testing.assert_allclose(traj.u[:, 0], [1.5, 1.7, 0.7, 0.85])


# --- assemble ----------------------------------------------------------------


def test_assemble_double_well(dw):
    res = solve(make_spec(dw), nodes=101)
    rep = res.report
    assert (rep.relaxed_cost, rep.cost_f, rep.gap) == (0.0, 0.0, 0.0)
    assert rep.is_minimizer


def test_assemble_square_straight_line(square):
    res = solve(make_spec(square, u1=1.0), nodes=101)
    assert res.report.cost_f == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(res.trajectory.u_at(np.linspace(0, 1, 11))[:, 0], np.linspace(0, 1, 11))


def test_assemble_square_with_linear_term_against_oracle(square):
    spec = make_spec(square, LinearTerm.constant(1.0))
    res = solve(spec)
    rep = res.report
    assert rep.cost_f == pytest.approx(rep.relaxed_cost, abs=rep.tol_cert)
    dp = dp_minimize(spec, DPGrid(200, 401))
    assert abs(dp.cost - rep.cost_f) <= 0.02 * (1 + abs(rep.cost_f)) + dp.allowance


def test_certificate_failure_carries_report(dw):
    spec = make_spec(dw)
    env, rel = relaxed_parts(spec)
    # the unchattered path pays f(0) = 1 instead of f**(0) = 0
    naive = relaxed_trajectory(spec, rel, dw, env)
    with pytest.raises(CertificateFailure) as info:
        assemble(spec, rel, naive)
    assert info.value.report is not None
    assert info.value.report.gap == pytest.approx(1.0)
    rep = assemble(spec, rel, naive, raise_on_failure=False)
    assert not rep.is_minimizer


def test_global_certificate_on_tilted_instance():
    f = SampledFunction.from_callable(lambda x: (x**2 - 1) ** 2 - 0.2 * x, -2, 2, 0.05)
    spec = make_spec(f, LinearTerm(1, samples=[0.6, -0.4, 0.2], horizon=1.5), u1=0.4, T=1.5)
    res = solve(spec)
    rep = res.report
    assert rep.cost_f <= rep.dual_value + rep.tol_cert + rep.tol_gap
    assert rep.endpoint_residual <= 1e-12
    dp = dp_minimize(spec, DPGrid(200, 81))
    assert rep.cost_f <= dp.cost + dp.allowance


# --- refinement -------------------------------------------------------------


def test_refinement_halves_deviation(dw):
    spec = make_spec(dw)
    dist = []
    for n in (1, 2, 4, 8):
        res = solve(spec, nodes=101, n_chatter=n)
        dist.append(res.trajectory.sup_distance(res.relaxed_path))
        assert res.report.cost_f == 0.0
    np.testing.assert_allclose(dist, [0.5, 0.25, 0.125, 0.0625])
