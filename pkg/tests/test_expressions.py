import math

import numpy as np
import pytest

from netsde.errors import ExpressionParseError
from netsde.expressions import parse_expression


def test_arithmetic_and_precedence():
    e = parse_expression("1 + 2*3 - 4/2", variables=())
    assert e.constant_value() == 5.0


def test_power_binds_tighter_than_unary_minus():
    e = parse_expression("-2^2", variables=())
    assert e.constant_value() == -4.0


def test_power_right_associative():
    e = parse_expression("2^3^2", variables=())
    assert e.constant_value() == 512.0


def test_variables_and_functions():
    e = parse_expression("sin(t) + x^2", variables=("t", "x"))
    assert e(t=0.0, x=3.0) == 9.0
    assert abs(e(t=math.pi / 2, x=0.0) - 1.0) < 1e-15


def test_vectorized_evaluation():
    e = parse_expression("exp(-x) * u", variables=("x", "u"))
    x = np.linspace(0.0, 1.0, 5)
    u = np.ones(5)
    np.testing.assert_allclose(e(x=x, u=u), np.exp(-x))


def test_pi_constant_and_abs_tanh():
    e = parse_expression("abs(tanh(-pi))", variables=())
    assert abs(e.constant_value() - math.tanh(math.pi)) < 1e-15


def test_constant_detection():
    assert parse_expression("3*(1+1)", variables=("t", "x")).is_constant
    assert not parse_expression("3*x", variables=("t", "x")).is_constant


def test_double_caret_reports_position():
    with pytest.raises(ExpressionParseError) as err:
        parse_expression("u^^3", variables=("u",))
    assert err.value.position == 2


def test_unknown_identifier():
    with pytest.raises(ExpressionParseError):
        parse_expression("y + 1", variables=("t", "x"))


def test_unknown_function():
    with pytest.raises(ExpressionParseError):
        parse_expression("sinh(x)", variables=("x",))


def test_unbalanced_parenthesis():
    with pytest.raises(ExpressionParseError):
        parse_expression("(1 + 2", variables=())


def test_trailing_garbage():
    with pytest.raises(ExpressionParseError):
        parse_expression("1 + 2 )", variables=())


def test_scientific_literals():
    assert parse_expression("1e-3 + 2.5E+1", variables=()).constant_value() == 25.001


def test_nested_calls_and_unary():
    e = parse_expression("cos(-x) - cos(x)", variables=("x",))
    np.testing.assert_allclose(e(x=np.array([0.3, 1.2])), 0.0, atol=1e-15)
