import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geopid.errors import DegenerateMetric, StructuralError
from geopid.geometry import (
    TWO_PI,
    ChartPoint,
    MetricField,
    Topology,
    chart_difference,
    christoffel,
    covariant_accel,
    group_compose,
    group_inverse,
    inner,
    tracking_error,
    wrap_angle,
)

L, A = Topology.LINEAR, Topology.ANGULAR
ROBOT = (L, L, A)

coord = st.floats(-50, 50, allow_nan=False)
robot_points = st.tuples(coord, coord, coord).map(lambda c: ChartPoint(c, ROBOT))


def polar_metric():
    return MetricField(lambda g: np.diag([1.0, g[0] ** 2]))


def close_mod(a: ChartPoint, b: ChartPoint, tol=1e-12):
    d = chart_difference(a.coords, b.coords, a.mask)
    return np.max(np.abs(d)) <= tol


# -- chart points ---------------------------------------------------------------------


def test_angles_wrapped_on_construction():
    p = ChartPoint([1.0, 2.0, -np.pi / 2], ROBOT)
    assert p.coords[2] == pytest.approx(3 * np.pi / 2)
    assert p.coords[0] == 1.0


def test_wrap_never_returns_two_pi():
    assert wrap_angle(-1e-18) == 0.0
    assert 0 <= wrap_angle(-1e-12) < TWO_PI


def test_chart_point_is_read_only():
    p = ChartPoint([0.0, 0.0, 1.0], ROBOT)
    with pytest.raises(ValueError):
        p.coords[0] = 3.0


def test_chart_point_equality_and_hash():
    a = ChartPoint([1.0, 2.0, 7.0], ROBOT)
    b = ChartPoint([1.0, 2.0, 7.0 - TWO_PI], ROBOT)
    assert a == b
    assert hash(a) == hash(b)


# -- group operations -------------------------------------------------------------------


def test_compose_with_identity():
    e = ChartPoint.identity(ROBOT)
    g = ChartPoint([1.0, -0.1, 0.6], ROBOT)
    assert group_compose(e, g) == g


def test_compose_wraps_angles():
    a = ChartPoint([0, 0, 3 * np.pi / 2], ROBOT)
    b = ChartPoint([0, 0, np.pi], ROBOT)
    assert np.allclose(group_compose(a, b).coords, [0, 0, np.pi / 2])


def test_inverse_examples():
    g = ChartPoint([1.0, 2.0, np.pi], ROBOT)
    assert np.allclose(group_inverse(g).coords, [-1.0, -2.0, np.pi])
    e = ChartPoint.identity(ROBOT)
    assert group_inverse(e) == e


def test_tracking_error_examples():
    g = ChartPoint([0.3, -1.0, 2.0], ROBOT)
    assert close_mod(tracking_error(g, g), ChartPoint.identity(ROBOT))
    assert tracking_error(ChartPoint.identity(ROBOT), g) == g
    gr = ChartPoint([0, 0, np.pi / 2], ROBOT)
    gg = ChartPoint([0, 0, np.pi / 4], ROBOT)
    assert np.allclose(tracking_error(gr, gg).coords, [0, 0, 7 * np.pi / 4])


def test_mismatched_groups_raise():
    a = ChartPoint([0.0, 0.0], (L, L))
    b = ChartPoint([0.0, 0.0, 0.0], ROBOT)
    with pytest.raises(StructuralError):
        group_compose(a, b)
    c = ChartPoint([0.0, 0.0], (L, A))
    with pytest.raises(StructuralError):
        tracking_error(a, c)


@settings(max_examples=300, deadline=None)
@given(robot_points, robot_points, robot_points)
def test_group_axioms(a, b, c):
    e = ChartPoint.identity(ROBOT)
    assert close_mod(group_compose(group_compose(a, b), c), group_compose(a, group_compose(b, c)), 1e-10)
    assert close_mod(group_compose(a, e), a)
    assert close_mod(group_compose(a, group_inverse(a)), e)
    assert close_mod(group_inverse(group_inverse(a)), a)


def test_group_axioms_on_random_triples(rng):
    # 1000 triples in the range where chart addition is exact to 1e-12
    e = ChartPoint.identity(ROBOT)
    for _ in range(1000):
        a, b, c = (ChartPoint(rng.uniform(-5, 5, 3), ROBOT) for _ in range(3))
        assert close_mod(group_compose(group_compose(a, b), c), group_compose(a, group_compose(b, c)))
        assert close_mod(group_compose(e, a), a)
        assert close_mod(group_compose(group_inverse(a), a), e)


# -- Christoffel symbols ----------------------------------------------------------------


def test_euclidean_christoffel_vanishes():
    assert np.all(christoffel(MetricField.euclidean(3), np.zeros(3)) == 0)


def test_robot_metric_christoffel_vanishes(robot):
    assert np.all(christoffel(robot.system.metric, [1.0, -0.1, 0.6]) == 0)


def test_polar_christoffel_against_closed_form():
    # hand-derived Levi-Civita symbols of dr^2 + r^2 dphi^2 at r = 2
    gam = christoffel(polar_metric(), np.array([2.0, 0.3]))
    oracle = np.zeros((2, 2, 2))
    oracle[0, 1, 1] = -2.0
    oracle[1, 0, 1] = oracle[1, 1, 0] = 0.5
    assert np.allclose(gam, oracle, atol=1e-8)


def test_christoffel_symmetric_and_metric_compatible(rng):
    metric = MetricField(
        lambda g: np.array(
            [[2 + np.sin(g[0]), 0.3 * g[1], 0.0], [0.3 * g[1], 1 + g[0] ** 2, 0.1], [0.0, 0.1, 3 + np.cos(g[2])]]
        )
    )
    h = 1e-5
    for _ in range(20):
        g = rng.uniform(-1, 1, 3)
        gam = christoffel(metric, g)
        assert np.max(np.abs(gam - gam.transpose(0, 2, 1))) <= 1e-8
        m = metric(g)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            dm = (metric(g + e) - metric(g - e)) / (2 * h)
            # d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il
            resid = dm - gam[:, k, :].T @ m - m @ gam[:, k, :]
            assert np.max(np.abs(resid)) <= 1e-6


def test_degenerate_metric_needs_analytic_symbols():
    singular = MetricField(lambda g: np.diag([1.0, 0.0]))
    with pytest.raises(DegenerateMetric):
        christoffel(singular, np.zeros(2))
    supplied = MetricField(lambda g: np.diag([1.0, 0.0]), christoffel=lambda g: np.zeros((2, 2, 2)))
    assert np.all(christoffel(supplied, np.zeros(2)) == 0)


# -- covariant acceleration and inner product ----------------------------------------


def test_covariant_accel_trivial_cases():
    zd = np.array([0.1, -0.2, 0.3])
    assert np.array_equal(covariant_accel(np.zeros((3, 3, 3)), [1.0, 2.0, 3.0], zd), zd)
    gam = np.random.default_rng(0).normal(size=(3, 3, 3))
    assert np.allclose(covariant_accel(gam, np.zeros(3), zd), zd)


def test_covariant_accel_centripetal():
    # uniform circular motion in polar chart: r = 1.5, phi' = 2, no chart acceleration
    r, w = 1.5, 2.0
    gam = christoffel(polar_metric(), np.array([r, 0.0]))
    acc = covariant_accel(gam, np.array([0.0, w]), np.zeros(2))
    assert acc[0] == pytest.approx(-r * w**2, rel=1e-8)
    assert acc[1] == pytest.approx(0.0, abs=1e-8)


def test_covariant_accel_shape_mismatch():
    with pytest.raises(StructuralError):
        covariant_accel(np.zeros((3, 3, 3)), np.zeros(3), np.zeros(2))


def test_inner_product(rng):
    m = MetricField.euclidean(3)
    assert inner(m, np.zeros(3), np.zeros(3), np.zeros(3)) == 0
    assert inner(m, np.zeros(3), [1, 0, 0], [0, 1, 0]) == 0
    metric = polar_metric()
    for _ in range(50):
        g, v, w = rng.normal(size=(3, 2))
        assert inner(metric, g, v, w) == pytest.approx(inner(metric, g, w, v), rel=1e-14)
