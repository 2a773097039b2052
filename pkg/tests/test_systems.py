import numpy as np
import pytest

from geopid.config import build_model, builtin_config
from geopid.errors import ParameterError
from geopid.systems import BUILTINS, builtin


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_analytic_and_expression_models_agree(name, rng):
    cfg = builtin_config(name)
    fast = build_model(cfg, analytic=True)
    slow = build_model(cfg, analytic=False)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    for _ in range(20):
        g = rng.uniform(lo, hi)
        assert np.allclose(fast.system.metric(g), slow.system.metric(g), atol=1e-14)
        assert np.allclose(fast.system.dist(g), slow.system.dist(g), atol=1e-14)
        assert fast.morse.value(g) == pytest.approx(slow.morse.value(g), rel=1e-12, abs=1e-14)
        assert np.allclose(fast.morse.differential(g), slow.morse.differential(g), atol=1e-7)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_start_on_the_distribution_and_zero_at_minimum(name):
    m = builtin(name)
    m.system.validate_at(m.initial)
    assert m.morse.value(m.morse.minimum) == pytest.approx(0.0, abs=1e-14)


def test_unicycle_basis_derivative_matches_finite_difference(robot, rng):
    h = 1e-6
    for _ in range(10):
        g = rng.uniform(-2, 2, 3)
        x = rng.normal(size=3)
        fd = (robot.system.dist(g + h * x) - robot.system.dist(g - h * x)) / (2 * h)
        assert np.allclose(robot.system.dist.derivative(g, x), fd, atol=1e-8)


def test_circle_particle_parameters():
    m = builtin("circle-particle", radius=2.0, mass=3.0, theta_dot=0.5)
    assert np.allclose(m.initial, [2.0, 0.0])
    assert np.allclose(m.system.metric(m.initial), 3.0 * np.eye(2))
    assert m.u0 == (0.5,)


def test_builtin_errors():
    with pytest.raises(ParameterError):
        builtin("segway")
    with pytest.raises(ParameterError):
        builtin("euclidean", dim=0)
    with pytest.raises(ParameterError):
        builtin("unicycle", radius=1.0)
