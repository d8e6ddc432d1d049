import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curlforce.errors import DimensionMismatch, ParseError
from curlforce.expr import Integral, evaluate, lift, parse, variable_names

XP = ["x1", "p1"]


def test_precedence_and_associativity():
    assert evaluate(parse("2 + 3*4^2"), [], []) == 50.0
    assert evaluate(parse("2^3^2"), [], []) == 512.0
    assert evaluate(parse("-2^2"), [], []) == -4.0
    assert evaluate(parse("8/4/2"), [], []) == 1.0
    assert evaluate(parse("1.5e1 - .5"), [], []) == 14.5


def test_functions_evaluate():
    for name in ("exp", "log", "sqrt", "sinh", "cosh", "tanh", "asinh", "sin", "cos"):
        got = evaluate(parse(f"{name}(x1)"), [0.7], ["x1"])
        assert got == pytest.approx(getattr(math, name)(0.7), rel=1e-15)


@pytest.mark.parametrize(
    "text, column",
    [("0.5*p1^2 + (x1", 15), ("x1 +* p1", 5), ("cosh p1", 1), ("foo(x1)", 1), ("x1 $ 2", 4)],
)
def test_parse_errors_carry_position(text, column):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.line == 1
    assert info.value.column == column
    assert f"column {column}" in str(info.value)


def test_parse_error_on_second_line():
    with pytest.raises(ParseError) as info:
        parse("x1 +\n  * p1")
    assert info.value.line == 2


def test_dimension_and_allowed_variables():
    with pytest.raises(DimensionMismatch):
        parse("x3 + p1", dimension=2)
    with pytest.raises(ParseError):
        parse("x1 + y", allowed={"x1"})
    assert variable_names(2) == ["x1", "x2", "p1", "p2"]
    assert variable_names(1, time=True) == ["x1", "p1", "t"]


@given(st.sampled_from(["x1^3*p1", "cosh(p1)*sqrt(x1^2 + 1)", "exp(x1 - p1)/(2 + sin(p1))", "asinh(x1)*tanh(p1)"]),
       st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_symbolic_derivative_matches_jet(text, x, p):
    e = parse(text)
    jet = lift(e, [x, p], 3, XP)
    dx = lift(e.diff("x1"), [x, p], 2, XP)
    assert np.allclose(jet.diff(0).coeffs, dx.coeffs, rtol=1e-12, atol=1e-12)


@given(st.sampled_from(["x1^3*p1 - 2", "cosh(p1)*sqrt(x1^2 + 1)", "-(x1 - p1)^2/3"]),
       st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_printing_round_trips(text, x, p):
    e = parse(text)
    again = parse(str(e))
    assert evaluate(again, [x, p], XP) == pytest.approx(evaluate(e, [x, p], XP), rel=1e-14, abs=1e-14)


def test_integral_node_jets():
    # int_0^p1 cosh(x1*s) ds = sinh(x1*p1)/x1
    body = parse("cosh(x1*p1)")
    node = Integral(body, "p1", 1e-12)
    x, p = 0.8, 1.3
    jet = lift(node, [x, p], 3, XP)
    exact = lift(parse("sinh(x1*p1)/x1"), [x, p], 3, XP)
    assert np.allclose(jet.coeffs, exact.coeffs, rtol=1e-9, atol=1e-10)
