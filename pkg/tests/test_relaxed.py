import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncoercive import (
    DualDomainExceeded,
    InfeasibleSelection,
    LinearTerm,
    NoMinimizer,
    SampledFunction,
    accumulate,
    convex_envelope,
    dual_value,
    legendre_conjugate,
    maximize_dual,
    primal_selection,
    solve_relaxed,
)
from noncoercive.convex import exposed_interval
from noncoercive.relaxed import dual_domain

from conftest import double_well, make_spec


def conj_of(f):
    return legendre_conjugate(convex_envelope(f))


@pytest.fixture
def square_conj(square):
    return conj_of(square)


@pytest.fixture
def ramp():
    """Random-looking piecewise-linear a(t) on [0, 2]."""
    return LinearTerm(1, samples=[0.3, -1.2, 0.8, 0.1, -0.4], horizon=2.0)


# --- accumulate ------------------------------------------------------------


def test_accumulate_zero(square):
    acc = accumulate(make_spec(square), 11)
    np.testing.assert_array_equal(acc.B, 0.0)


@pytest.mark.parametrize("N", [2, 3, 17, 1001])
def test_accumulate_constant_is_exact(square, N):
    alpha = -1.75
    acc = accumulate(make_spec(square, LinearTerm.constant(alpha)), N)
    np.testing.assert_allclose(acc.B[:, 0], alpha * (1 - acc.s), rtol=0, atol=1e-13)
    assert acc.B[-1, 0] == 0.0


def test_accumulate_linear_a(square):
    a = LinearTerm(1, func=lambda t: t)
    acc = accumulate(make_spec(square, a), 101)
    assert abs(acc.B[0, 0] - 0.5) <= 1e-6
    np.testing.assert_allclose(acc.B[:, 0], 0.5 * (1 - acc.s**2), atol=1e-14)


def test_accumulate_derivative_is_minus_a(square, ramp):
    spec = make_spec(square, ramp, T=2.0)
    acc = accumulate(spec, 401)
    dB = np.gradient(acc.B[:, 0], acc.s)
    # central differences are exact for piecewise-quadratic B away from kinks
    knots = np.linspace(0, 2, 5)
    away = np.abs(acc.s[:, None] - knots[None, :]).min(axis=1) > 0.01
    np.testing.assert_allclose(dB[away], -spec.a(acc.s)[away, 0], atol=1e-10)


def test_accumulate_rejects_single_node(square):
    with pytest.raises(ValueError):
        accumulate(make_spec(square), 1)


def test_trapezoid_weights_sum_to_horizon(square, ramp):
    acc = accumulate(make_spec(square, ramp, T=2.0), 77)
    assert acc.weights.sum() == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(acc.cells[:, 1] - acc.cells[:, 0], acc.weights, atol=1e-15)


# --- dual_value --------------------------------------------------------------


@pytest.mark.parametrize("c", [-2.0, 0.0, 0.5, 2.0, 3.0])
def test_dual_value_square(square_conj, square, c):
    acc = accumulate(make_spec(square, u1=1.0), 101)
    # the sampled conjugate overshoots p^2/4 by at most step^2/4
    assert dual_value(square_conj, acc, [1.0], [c]) == pytest.approx(c - c * c / 4, abs=1e-4)


def test_dual_value_at_zero_and_double_well(square_conj, square, dw):
    acc = accumulate(make_spec(square, u1=1.0), 101)
    assert dual_value(square_conj, acc, [1.0], [0.0]) == 0.0
    conj = conj_of(dw)
    acc = accumulate(make_spec(dw), 101)
    for c in np.linspace(-10, 10, 41):
        assert dual_value(conj, acc, [0.0], [c]) == pytest.approx(-float(conj(c)))
    assert dual_value(conj, acc, [0.0], [0.0]) == 0.0


def test_dual_value_outside_domain(dw):
    conj = conj_of(dw)
    acc = accumulate(make_spec(dw, LinearTerm.constant(5.0)), 11)
    lo, hi = dual_domain(conj, acc)
    assert (lo[0], hi[0]) == (-14.875 + 5.0, 14.875)
    with pytest.raises(DualDomainExceeded):
        dual_value(conj, acc, [0.0], [lo[0] - 1.0])
    with pytest.raises(DualDomainExceeded):
        dual_value(conj, acc, [0.0], [hi[0] + 1e-6])
    dual_value(conj, acc, [0.0], [lo[0]])


@pytest.fixture
def random_instance(ramp):
    f = SampledFunction.from_callable(lambda x: (x**2 - 1) ** 2 + 0.3 * x**3, -2, 2, 0.05)
    spec = make_spec(f, ramp, u1=0.7, T=2.0)
    conj = conj_of(f)
    acc = accumulate(spec, 201)
    return spec, conj, acc


def test_dual_concave_on_random_pairs(random_instance):
    spec, conj, acc = random_instance
    lo, hi = dual_domain(conj, acc)
    rng = np.random.default_rng(7)
    c1, c2 = rng.uniform(lo[0], hi[0], (2, 1000))
    h = lambda c: dual_value(conj, acc, spec.displacement, [c])
    for a, b in zip(c1, c2):
        assert h(0.5 * (a + b)) >= 0.5 * (h(a) + h(b)) - 1e-9


def test_integrated_face_map_is_monotone(random_instance):
    spec, conj, acc = random_instance
    env = legendre_conjugate(conj)
    lo, hi = dual_domain(conj, acc)
    rng = np.random.default_rng(11)
    c1, c2 = np.sort(rng.uniform(lo[0], hi[0], (2, 1000)), axis=0)
    top = lambda c: acc.weights @ exposed_interval(env, c - acc.B[:, 0])[1]
    for a, b in zip(c1, c2):
        assert top(a) <= top(b) + 1e-12


# --- maximize_dual / primal_selection ---------------------------------------


def test_square_unit_displacement(square, square_conj):
    rel = solve_relaxed(make_spec(square, u1=1.0), 101)
    assert rel.c[0] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_array_equal(rel.v[:, 0], 1.0)
    assert not rel.multivalued.any() and rel.theta is None
    assert rel.relaxed_cost == pytest.approx(1.0, abs=1e-12)
    assert rel.dual_value == pytest.approx(1.0, abs=1e-4)


def test_double_well_symmetric(dw):
    rel = solve_relaxed(make_spec(dw), 101)
    assert rel.c[0] == 0.0
    assert rel.theta == 0.5
    np.testing.assert_array_equal(rel.v[:, 0], 0.0)
    assert rel.multivalued.all()
    (seg,) = rel.multivalued_segments
    assert (seg.t0, seg.t1) == (0.0, 1.0)
    assert (seg.face.lo, seg.face.hi) == (-1.0, 1.0)
    assert rel.relaxed_cost == 0.0 and rel.dual_value == 0.0


def test_double_well_half_displacement(dw):
    rel = solve_relaxed(make_spec(dw, u1=0.5), 101)
    assert rel.theta == pytest.approx(0.75)
    np.testing.assert_allclose(rel.v[:, 0], 0.5)


def test_primal_selection_direct(dw):
    conj = conj_of(dw)
    acc = accumulate(make_spec(dw), 21)
    rel = primal_selection(conj, acc, [0.0], [-0.5])
    assert rel.theta == pytest.approx(0.25)
    np.testing.assert_allclose(rel.v[:, 0], -0.5)
    # the face [-1, 1] cannot carry a mean velocity of 3
    with pytest.raises(InfeasibleSelection):
        primal_selection(conj, acc, [0.0], [3.0])


def test_square_with_constant_linear_term(square):
    rel = solve_relaxed(make_spec(square, LinearTerm.constant(1.0)), 1001)
    assert rel.c[0] == pytest.approx(0.5, abs=0.01)
    # v(s) = s/2 - 1/4 up to the velocity grid
    assert np.abs(rel.v[:, 0] - (rel.s / 2 - 0.25)).max() <= 0.01
    assert rel.relaxed_cost == pytest.approx(-1 / 48, abs=1e-4)
    assert rel.constraint_residual <= 1e-8


def test_maximize_dual_returns_root_of_face_map(random_instance):
    spec, conj, acc = random_instance
    env = legendre_conjugate(conj)
    c = maximize_dual(conj, acc, spec.displacement)
    lo, hi = exposed_interval(env, c[0] - acc.B[:, 0])
    du = spec.displacement[0]
    assert acc.weights @ lo - 1e-9 <= du <= acc.weights @ hi + 1e-9


def test_no_minimizer_when_dual_domain_empty():
    f = SampledFunction.from_callable(np.abs, -8, 8, 0.25)
    with pytest.raises(NoMinimizer):
        solve_relaxed(make_spec(f, LinearTerm.constant(3.0)), 101)


def test_no_minimizer_when_displacement_unreachable(dw):
    conj = conj_of(dw)
    acc = accumulate(make_spec(dw), 11)
    with pytest.raises(NoMinimizer):
        maximize_dual(conj, acc, [2.5])


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-2, 2), min_size=2, max_size=6),
    st.floats(-1.5, 1.5),
    st.floats(0.5, 2.0),
)
def test_certificate_and_constraint(a_samples, du, T):
    f = SampledFunction.from_callable(lambda x: (x**2 - 1) ** 2 + 0.2 * x, -2, 2, 0.1)
    spec = make_spec(f, LinearTerm(1, samples=a_samples, horizon=T), u1=du * T / 2, T=T)
    try:
        rel = solve_relaxed(spec, 201)
    except NoMinimizer:
        return
    assert rel.duality_gap <= 1e-5 * (1 + abs(rel.dual_value))
    assert rel.constraint_residual <= 1e-8 * (1 + abs(spec.displacement[0]))
    assert rel.fy_residual <= 1e-8 * (1 + f.value_range)


@pytest.mark.parametrize("delta", [-3.0, 0.25, 10.0])
def test_translation_covariance(ramp, delta):
    f = SampledFunction.from_callable(double_well, -2, 2, 0.1)
    spec = make_spec(f, ramp, u0=0.1, u1=0.6, T=2.0)
    base = solve_relaxed(spec, 201)
    moved = solve_relaxed(spec.shifted(delta), 201)
    int_a = accumulate(spec, 201).B[0, 0]
    assert moved.relaxed_cost - base.relaxed_cost == pytest.approx(int_a * delta, abs=1e-12)
    np.testing.assert_array_equal(moved.v, base.v)


# --- two coordinates -------------------------------------------------------


@pytest.fixture(scope="module")
def well_2d():
    return SampledFunction.from_callable(
        lambda x, y: (x**2 - 1) ** 2 + y**2, [-2, -2], [2, 2], 0.25
    )


def test_two_dimensional_solve(well_2d):
    a = LinearTerm(2, func=lambda t: np.column_stack([0 * t, 0.5 + 0 * t]))
    spec = make_spec(well_2d, a, u0=[0.0, 0.0], u1=[0.0, 0.0])
    rel = solve_relaxed(spec, 101)
    assert rel.constraint_residual <= 1e-8
    assert rel.duality_gap <= 1e-5 * (1 + abs(rel.dual_value))
    assert rel.fy_residual <= 1e-8
    # first coordinate relaxes onto the flat bottom between -1 and 1
    assert rel.multivalued.any()
    assert np.all(np.abs(rel.v[:, 0]) <= 1 + 1e-12)


def test_two_dimensional_dual_concave(well_2d):
    spec = make_spec(well_2d, u0=[0.0, 0.0], u1=[0.3, -0.2])
    conj = conj_of(well_2d)
    acc = accumulate(spec, 51)
    rng = np.random.default_rng(3)
    lo, hi = dual_domain(conj, acc)
    c1, c2 = rng.uniform(lo, hi, (2, 200, 2))
    h = lambda c: dual_value(conj, acc, spec.displacement, c)
    for a, b in zip(c1, c2):
        assert h(0.5 * (a + b)) >= 0.5 * (h(a) + h(b)) - 1e-9
