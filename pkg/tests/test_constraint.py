import numpy as np
import pytest

from geopid.constraint import (
    DistributionField,
    constraint_force,
    constraint_residual,
    nabla_projector,
    nabla_projector_tangent,
    projectors,
)
from geopid.errors import ConstraintViolation, DegenerateConstraint
from geopid.geometry import MetricField, christoffel

from conftest import random_robot_point


def robot_perp(theta):
    # P_{D perp} = v v^T with v = (sin, -cos, 0), written out by hand
    v = np.array([np.sin(theta), -np.cos(theta), 0.0])
    return np.outer(v, v)


def curved_metric():
    return MetricField(
        lambda g: np.array(
            [
                [1.0 + 0.5 * g[1] ** 2, 0.2 * np.sin(g[2]), 0.0],
                [0.2 * np.sin(g[2]), 2.0, 0.1 * g[0]],
                [0.0, 0.1 * g[0], 1.5 + 0.5 * np.cos(g[0])],
            ]
        )
    )


def curved_dist():
    return DistributionField(
        lambda g: np.array([[1.0, 0.0], [0.0, np.cos(g[2])], [g[0], np.sin(g[2])]]), 2
    )


def random_in_d(b, rng):
    return b @ rng.normal(size=b.shape[1])


# -- projectors ---------------------------------------------------------------------


def test_robot_perp_projector_at_zero(robot):
    ps = projectors(robot.system.metric, robot.system.dist, [0.0, 0.0, 0.0])
    assert np.allclose(ps.p_d_perp, np.diag([0.0, 1.0, 0.0]), atol=1e-15)


def test_robot_perp_projector_at_quarter_turn(robot):
    ps = projectors(robot.system.metric, robot.system.dist, [0.0, 0.0, np.pi / 2])
    assert np.allclose(ps.p_d_perp, np.diag([1.0, 0.0, 0.0]), atol=1e-15)


def test_full_distribution_projectors():
    ps = projectors(MetricField.euclidean(3), DistributionField.full(3), np.zeros(3))
    assert np.array_equal(ps.p_d, np.eye(3))
    assert np.array_equal(ps.p_dstar, np.eye(3))
    assert np.all(ps.p_d_perp == 0) and np.all(ps.p_dstar_perp == 0)


@pytest.mark.parametrize("which", ["robot", "curved"])
def test_projector_invariants(which, robot, rng):
    if which == "robot":
        metric, dist = robot.system.metric, robot.system.dist
    else:
        metric, dist = curved_metric(), curved_dist()
    eye = np.eye(3)
    for _ in range(1000):
        g = random_robot_point(rng) if which == "robot" else rng.uniform(-1, 1, 3)
        ps = projectors(metric, dist, g)
        m = metric(g)
        for p in (ps.p_d, ps.p_d_perp, ps.p_dstar, ps.p_dstar_perp):
            assert np.max(np.abs(p @ p - p)) <= 1e-10
        assert np.max(np.abs(ps.p_d + ps.p_d_perp - eye)) <= 1e-10
        assert np.max(np.abs(ps.p_dstar + ps.p_dstar_perp - eye)) <= 1e-10
        assert np.max(np.abs(m @ ps.p_d - ps.p_dstar @ m)) <= 1e-10
        b = dist(g)
        assert np.max(np.abs(ps.p_d @ b - b)) <= 1e-10


def test_rank_deficient_basis_raises():
    dist = DistributionField(lambda g: np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]), 2)
    with pytest.raises(DegenerateConstraint):
        projectors(MetricField.euclidean(3), dist, np.zeros(3))


def test_metric_not_injective_on_distribution_raises():
    metric = MetricField(lambda g: np.diag([1.0, 0.0]), christoffel=lambda g: np.zeros((2, 2, 2)))
    dist = DistributionField.from_matrix([[0.0], [1.0]])
    with pytest.raises(DegenerateConstraint):
        projectors(metric, dist, np.zeros(2))


def test_degenerate_metric_allowed_when_injective_on_distribution():
    metric = MetricField(lambda g: np.diag([1.0, 0.0]), christoffel=lambda g: np.zeros((2, 2, 2)))
    dist = DistributionField.from_matrix([[1.0], [0.0]])
    ps = projectors(metric, dist, np.zeros(2))
    assert np.allclose(ps.p_dstar @ ps.p_dstar, ps.p_dstar)


# -- covariant derivative of the projector --------------------------------------------


def test_nabla_projector_robot_quarter_pi(robot):
    theta = np.pi / 4
    got = nabla_projector(robot.system.metric, robot.system.dist, [0.0, 0.0, theta], [0.0, 0.0, 1.0])
    h = 1e-6
    fd = (robot_perp(theta + h) - robot_perp(theta - h)) / (2 * h)
    expected = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
    assert np.allclose(fd, expected, atol=1e-8)
    assert np.allclose(got, expected, atol=1e-8)


def test_nabla_projector_zero_direction(robot):
    got = nabla_projector(robot.system.metric, robot.system.dist, [1.0, 2.0, 0.4], np.zeros(3))
    assert np.all(got == 0)


def test_nabla_projector_constant_distribution():
    dist = DistributionField.from_matrix([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    got = nabla_projector(MetricField.euclidean(3), dist, np.zeros(3), [0.3, -1.0, 2.0])
    assert np.allclose(got, 0.0, atol=1e-12)


def test_leibniz_rule_for_covector_fields(rng):
    metric, dist = curved_metric(), curved_dist()
    h = 1e-5

    def y(g):
        return np.array([np.sin(g[0]) + g[1], g[2] ** 2, np.cos(g[1])])

    def p(g):
        return projectors(metric, dist, g).p_dstar_perp

    def nabla_cov(field, g, x):
        d = (field(g + h * x) - field(g - h * x)) / (2 * h)
        gam_x = np.einsum("ikm,k->im", christoffel(metric, g), x)
        return d - gam_x.T @ field(g)

    for _ in range(10):
        g = rng.uniform(-1, 1, 3)
        x = rng.normal(size=3)
        lhs = nabla_cov(lambda q: p(q) @ y(q), g, x)
        rhs = nabla_projector(metric, dist, g, x) @ y(g) + p(g) @ nabla_cov(y, g, x)
        assert np.allclose(lhs, rhs, atol=1e-5)


def test_leibniz_rule_for_tangent_fields(rng):
    metric, dist = curved_metric(), curved_dist()
    h = 1e-5

    def y(g):
        return np.array([g[1] * g[2], np.sin(g[0]), 1.0 + g[0] ** 2])

    def p(g):
        return projectors(metric, dist, g).p_d

    def nabla_vec(field, g, x):
        d = (field(g + h * x) - field(g - h * x)) / (2 * h)
        gam_x = np.einsum("ikm,k->im", christoffel(metric, g), x)
        return d + gam_x @ field(g)

    for _ in range(10):
        g = rng.uniform(-1, 1, 3)
        x = rng.normal(size=3)
        lhs = nabla_vec(lambda q: p(q) @ y(q), g, x)
        rhs = nabla_projector_tangent(metric, dist, g, x) @ y(g) + p(g) @ nabla_vec(y, g, x)
        assert np.allclose(lhs, rhs, atol=1e-5)


@pytest.mark.parametrize("which", ["robot", "curved"])
def test_projection_lemma(which, robot, rng):
    # I zeta in D*  =>  (nabla_zeta P_{D* perp}) I zeta in D* perp
    if which == "robot":
        metric, dist = robot.system.metric, robot.system.dist
    else:
        metric, dist = curved_metric(), curved_dist()
    n = 1000 if which == "robot" else 200
    for _ in range(n):
        g = random_robot_point(rng) if which == "robot" else rng.uniform(-1, 1, 3)
        zeta = random_in_d(dist(g), rng)
        v = nabla_projector(metric, dist, g, zeta) @ (metric(g) @ zeta)
        assert np.linalg.norm(projectors(metric, dist, g).p_dstar @ v) <= 1e-6


# -- constraint force -------------------------------------------------------------------


def test_centripetal_force_on_circle(circle):
    r, w, mass = 1.5, 2.0, 1.0
    g = np.array([r, 0.0])
    zeta = circle.system.dist(g) @ np.array([w])
    force = constraint_force(circle.system.metric, circle.system.dist, g, zeta)
    assert np.linalg.norm(force) == pytest.approx(mass * r * w**2, rel=1e-6)
    # points towards the centre
    assert force[0] < 0 and abs(force[1]) < 1e-6


def test_zero_velocity_zero_force(robot):
    f = constraint_force(robot.system.metric, robot.system.dist, [0.2, 0.1, 1.0], np.zeros(3), np.zeros(3))
    assert np.all(f == 0)


def test_robot_force_matches_projector_flow(robot):
    theta = np.pi / 4
    zeta = np.array([np.cos(theta), np.sin(theta), 1.0])
    got = constraint_force(robot.system.metric, robot.system.dist, [0.0, 0.0, theta], zeta, np.zeros(3))
    # d/dt P_{D perp}(theta(t)) zeta with theta' = 1, by finite differences
    h = 1e-6
    oracle = -((robot_perp(theta + h) - robot_perp(theta - h)) / (2 * h)) @ zeta
    assert np.allclose(got, oracle, atol=1e-8)
    assert np.allclose(got, [-np.sqrt(0.5), np.sqrt(0.5), 0.0], atol=1e-8)


def test_applied_force_component_cancelled(robot):
    g = np.array([0.0, 0.0, 0.0])
    gamma = np.array([0.0, 3.0, 0.0])  # pushes sideways, straight into the constraint
    f = constraint_force(robot.system.metric, robot.system.dist, g, np.zeros(3), gamma)
    assert np.allclose(f, [0.0, -3.0, 0.0])


def test_violating_velocity_raises_with_residual(robot):
    g = np.array([0.0, 0.0, 0.0])
    with pytest.raises(ConstraintViolation) as info:
        constraint_force(robot.system.metric, robot.system.dist, g, [0.0, 1.0, 0.0])
    assert info.value.residual == pytest.approx(1.0)


@pytest.mark.parametrize("which", ["robot", "curved"])
def test_constraint_force_in_dstar_perp(which, robot, rng):
    if which == "robot":
        metric, dist = robot.system.metric, robot.system.dist
    else:
        metric, dist = curved_metric(), curved_dist()
    n = 1000 if which == "robot" else 200
    for _ in range(n):
        g = random_robot_point(rng) if which == "robot" else rng.uniform(-1, 1, 3)
        zeta = random_in_d(dist(g), rng)
        gamma = rng.normal(size=3)
        f = constraint_force(metric, dist, g, zeta, gamma)
        assert np.linalg.norm(projectors(metric, dist, g).p_dstar @ f) <= 1e-6


def test_constraint_residual(robot):
    assert constraint_residual(robot.system.metric, robot.system.dist, [0, 0, 0.3], [np.cos(0.3), np.sin(0.3), 2.0]) < 1e-15
    assert constraint_residual(robot.system.metric, robot.system.dist, [0, 0, 0.0], [0.0, 2.0, 0.0]) == pytest.approx(2.0)
