import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geopid.errors import GeoPidError
from geopid.expr import (
    ExprError,
    ExprSyntaxError,
    UnknownFunction,
    UnknownName,
    compile_expr,
    compile_matrix,
    evaluate,
    parse,
)


@pytest.mark.parametrize(
    "text, value",
    [
        ("1 + 2*3", 7.0),
        ("(1 + 2)*3", 9.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("2*-3", -6.0),
        ("8/4/2", 1.0),
        ("10 - 4 - 3", 3.0),
        ("1e-3*1000", 1.0),
        (".5 + 2.", 2.5),
        ("sqrt(16)", 4.0),
        ("cos(pi)", -1.0),
        ("sin(0)", 0.0),
        ("e", math.e),
        ("+3", 3.0),
    ],
)
def test_evaluate_constant_expressions(text, value):
    assert evaluate(text) == pytest.approx(value, rel=1e-15, abs=1e-15)


def test_variables_by_position():
    f = compile_expr("0.5*(x^2 + y^2) + 1 - cos(theta)", ["x", "y", "theta"])
    assert f([1.0, -0.1, 0.6]) == pytest.approx(0.5 * 1.01 + 1 - math.cos(0.6), rel=1e-15)


def test_names_collected():
    assert parse("a*sin(b) + pi").names() == {"a", "b", "pi"}


@pytest.mark.parametrize(
    "text, kind, pos",
    [
        ("1 +", ExprSyntaxError, 3),
        ("(1 + 2", ExprSyntaxError, None),
        ("1 2", ExprSyntaxError, 2),
        ("tan(1)", UnknownFunction, 0),
        ("x + q", UnknownName, 4),
        ("3 $ 4", ExprSyntaxError, 2),
        ("", ExprSyntaxError, None),
    ],
)
def test_errors_carry_positions(text, kind, pos):
    with pytest.raises(kind) as info:
        compile_expr(text, ["x"])
    err = info.value
    assert isinstance(err, ExprError) and isinstance(err, GeoPidError)
    if pos is not None:
        assert err.position == pos
    assert err.text == text


def test_error_message_includes_location():
    err = UnknownName("unknown name 'q'", "q", 0)
    err.line, err.key = 7, "V"
    assert str(err) == "line 7, key 'V': unknown name 'q' at position 0"


def test_compiled_code_has_no_builtins():
    with pytest.raises(ExprError):
        compile_expr("__import__('os')", [])


def test_compile_matrix_constant_flag():
    f, const = compile_matrix([["1", "0"], ["0", "2*pi"]])
    assert const
    assert np.allclose(f([]), [[1.0, 0.0], [0.0, 2 * math.pi]])
    f, const = compile_matrix([["0", "cos(t)"], ["1", "sin(t)"]], ["t"])
    assert not const
    m = f([0.3])
    assert m.dtype == np.float64 and m.shape == (2, 2)
    assert np.allclose(m, [[0, math.cos(0.3)], [1, math.sin(0.3)]])


def test_domain_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        evaluate("sqrt(-1)")


numbers = st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 6))


@settings(max_examples=300, deadline=None)
@given(numbers, numbers, numbers)
def test_matches_python_arithmetic(a, b, c):
    text = f"({a}) + ({b})*({c}) - ({a})/(1 + ({b})^2)"
    assert evaluate(text) == pytest.approx(a + b * c - a / (1 + b**2), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
def test_variable_evaluation_matches_closed_form(x, y):
    f = compile_expr("sin(x)*cos(y) + sqrt(x^2 + y^2)", ["x", "y"])
    assert f([x, y]) == pytest.approx(math.sin(x) * math.cos(y) + math.hypot(x, y), rel=1e-12, abs=1e-12)
