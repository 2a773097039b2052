import numpy as np
import pytest

from geopid.config import (
    ConfigError,
    ConfigSyntaxError,
    DimensionMismatch,
    build_model,
    builtin_config,
    load_config,
    parse_config,
    serialize,
)
from geopid.errors import DegenerateConstraint, DegenerateMetric, StructuralError
from geopid.expr import ExprSyntaxError, UnknownFunction, UnknownName

ROBOT_TEXT = """\
[system]
name = robot
variables = x, y, theta
topology = linear, linear, angular
metric = 1, 0, 0; 0, 1, 0; 0, 0, 1
basis = 0, cos(theta); 0, sin(theta); 1, 0

[morse]
V = 0.5*(x^2 + y^2) + 1 - cos(theta)   # polar Morse function
minimum = 0, 0, 0
lambda = 4
mu = 1

[gains]
kp = 20
kd = 2
ki = 0.5

[sim]
initial = 1, -0.1, 0.6
t_end = 5

[region]
bounds = -2:2, -2:2, 0:2*pi
samples = 8, 8, 8
"""


def with_line(text, old, new):
    assert old in text
    return text.replace(old, new)


def test_parse_custom_robot():
    cfg = parse_config(ROBOT_TEXT)
    assert cfg.name == "robot"
    assert cfg.dimension == 3 and cfg.rank == 2
    assert cfg.bounds[2] == (0.0, 2 * np.pi)
    assert cfg.lam == 4.0 and cfg.mu == 1.0
    assert cfg.u0 == (0.0, 0.0)
    assert cfg.gains.kp == 20.0


def test_custom_robot_agrees_with_builtin(robot):
    custom = build_model(parse_config(ROBOT_TEXT))
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = rng.uniform(-2, 2, 3)
        assert np.allclose(custom.system.dist(g), robot.system.dist(g), atol=1e-15)
        assert np.allclose(custom.morse.differential(g), robot.morse.differential(g), atol=1e-8)


@pytest.mark.parametrize("name", ["unicycle", "circle-particle", "euclidean"])
def test_builtin_round_trip(name):
    cfg = builtin_config(name)
    assert parse_config(serialize(cfg)) == cfg


def test_custom_round_trip():
    cfg = parse_config(ROBOT_TEXT)
    assert parse_config(serialize(cfg)) == cfg


def test_builtin_params_round_trip():
    cfg = builtin_config("circle-particle", radius=2.0, theta_dot=3.0)
    back = parse_config(serialize(cfg))
    assert back == cfg
    assert dict(back.params)["radius"] == 2.0


def test_builtin_file_with_overrides(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("[system]\nbuiltin = euclidean\ndim = 2\n\n[gains]\nkp = 5\n")
    cfg = load_config(path)
    assert cfg.dimension == 2 and cfg.kp == 5.0 and cfg.kd == 2.0


def test_builtin_cannot_redefine_expressions():
    with pytest.raises(ConfigError) as info:
        parse_config("[system]\nbuiltin = unicycle\nmetric = 1\n")
    assert info.value.line == 3 and info.value.key == "metric"


@pytest.mark.parametrize(
    "old, new, kind, line, key",
    [
        ("[gains]", "[gainz]", ConfigSyntaxError, 14, None),
        ("kd = 2", "kd 2", ConfigSyntaxError, 16, None),
        ("kd = 2", "kd = ", ConfigSyntaxError, 16, "kd"),
        ("ki = 0.5", "ki = 0.5\nkq = 1", ConfigError, 18, "kq"),
        ("ki = 0.5", "ki = 0.5 +", ExprSyntaxError, 17, "ki"),
        ("1 - cos(theta)", "1 - cosh(theta)", UnknownFunction, 9, "V"),
        ("1 - cos(theta)", "1 - cos(phi)", UnknownName, 9, "V"),
        ("initial = 1, -0.1, 0.6", "initial = 1, -0.1", DimensionMismatch, 20, "initial"),
        ("samples = 8, 8, 8", "samples = 8, 8, 0", ConfigError, 25, "samples"),
    ],
)
def test_errors_name_line_and_key(old, new, kind, line, key):
    with pytest.raises(kind) as info:
        parse_config(with_line(ROBOT_TEXT, old, new))
    assert info.value.line == line
    assert info.value.key == key
    assert f"line {line}" in str(info.value)


def test_dimension_mismatch_is_structural():
    text = with_line(ROBOT_TEXT, "metric = 1, 0, 0; 0, 1, 0; 0, 0, 1", "metric = 1, 0; 0, 1")
    with pytest.raises(StructuralError):
        parse_config(text)


def test_rank_deficient_basis_rejected():
    text = with_line(ROBOT_TEXT, "basis = 0, cos(theta); 0, sin(theta); 1, 0", "basis = 1, 2; 2, 4; 0, 0")
    with pytest.raises(DegenerateConstraint) as info:
        parse_config(text)
    assert "line 6" in str(info.value) and "'basis'" in str(info.value)


def test_asymmetric_metric_rejected():
    text = with_line(ROBOT_TEXT, "metric = 1, 0, 0; 0, 1, 0; 0, 0, 1", "metric = 1, 0.5, 0; 0, 1, 0; 0, 0, 1")
    with pytest.raises(DegenerateMetric):
        parse_config(text)


def test_missing_required_keys():
    with pytest.raises(ConfigError):
        parse_config(with_line(ROBOT_TEXT, "kp = 20\n", ""))
    with pytest.raises(ConfigError):
        parse_config(with_line(ROBOT_TEXT, "minimum = 0, 0, 0\n", ""))


def test_bad_time_step():
    with pytest.raises(ConfigError):
        parse_config(with_line(ROBOT_TEXT, "t_end = 5", "t_end = 5\ndt = 0"))


def test_unknown_builtin():
    with pytest.raises(ConfigError) as info:
        parse_config("[system]\nbuiltin = segway\n")
    assert info.value.key == "builtin"
