import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curlforce.errors import DimensionMismatch, DomainError, OrderExceeded
from curlforce.expr import lift, parse
from curlforce.jet import Jet, compose_taylor, embed, num_coefficients, table

from oracles import fd_gradient

XP = ["x1", "p1"]


# worked values ---------------------------------------------------------------------


def test_square_at_two():
    j = lift(parse("x1^2"), [2.0], 2, ["x1"])
    assert j.coeff((0,)) == 4.0
    assert j.coeff((1,)) == 4.0
    assert j.coeff((2,)) == 1.0
    assert j.partial((2,)) == 2.0


def test_cosh_series_at_zero():
    j = lift(parse("cosh(p1)"), [0.0], 3, ["p1"])
    assert [j.coeff((k,)) for k in range(4)] == pytest.approx([1.0, 0.0, 0.5, 0.0], abs=1e-15)
    assert j.partial((1,)) == 0.0


def test_cosh_sqrt_cross_term_against_differences():
    e = parse("cosh(p1)*sqrt(x1^2 + 1)")
    j = lift(e, [1.0, 1.0], 2, XP)
    assert j.value == pytest.approx(math.cosh(1) * math.sqrt(2), rel=1e-15)
    expected = math.sinh(1) / math.sqrt(2)
    assert j.partial((1, 1)) == pytest.approx(expected, rel=1e-14)

    def dx(z):
        return fd_gradient(lambda w: math.cosh(w[1]) * math.sqrt(w[0] ** 2 + 1), z, 1e-5)[0]

    h = 1e-5
    fd = (dx(np.array([1.0, 1.0 + h])) - dx(np.array([1.0, 1.0 - h]))) / (2 * h)
    assert abs(j.partial((1, 1)) - fd) < 1e-6


def test_third_derivative_of_exp():
    j = lift(parse("exp(p1)"), [1.0], 3, ["p1"])
    assert j.partial((3,)) == pytest.approx(math.e, rel=1e-15)


def test_coefficient_count():
    for n, k in itertools.product(range(1, 6), range(1, 4)):
        assert num_coefficients(n, k) == math.comb(n + k, k)
        assert Jet(n, k).coeffs.size == math.comb(n + k, k)


def test_partial_beyond_order():
    j = Jet.variable(1.0, 0, 2, 2)
    with pytest.raises(OrderExceeded):
        j.partial((3, 0))
    with pytest.raises(OrderExceeded):
        Jet(2, 4)


def test_mismatched_jets_rejected():
    a = Jet.variable(1.0, 0, 2, 2)
    with pytest.raises(DimensionMismatch):
        a + Jet.variable(1.0, 0, 3, 2)
    with pytest.raises(DimensionMismatch):
        a * Jet.variable(1.0, 0, 2, 3)


def test_domain_errors():
    with pytest.raises(DomainError):
        lift(parse("sqrt(x1)"), [-1.0], 2, ["x1"])
    with pytest.raises(DomainError):
        lift(parse("log(x1)"), [0.0], 1, ["x1"])
    with pytest.raises(DomainError):
        lift(parse("x1^0.5"), [-2.0], 1, ["x1"])


def test_point_dimension_checked():
    with pytest.raises(DimensionMismatch):
        lift(parse("x1*p1"), [1.0], 2, XP)


def test_value_is_degree_zero():
    j = lift(parse("sinh(x1)*p1 + 3"), [0.4, -1.2], 3, XP)
    assert j.value == j.coeff((0, 0)) == pytest.approx(math.sinh(0.4) * -1.2 + 3)


def test_compose_taylor_matches_direct_lift():
    inner = parse("x1*p1 + sin(x1)")
    outer = parse("exp(x1)*cosh(p1)")
    point = [0.3, -0.7]
    u = lift(inner, point, 3, XP)
    v = lift(parse("p1^2 - x1"), point, 3, XP)
    poly = lift(outer, [u.value, v.value], 3, XP)
    composed = compose_taylor(poly, [u, v])
    direct = lift(outer.substitute({"x1": inner, "p1": parse("p1^2 - x1")}), point, 3, XP)
    assert np.allclose(composed.coeffs, direct.coeffs, rtol=1e-13, atol=1e-13)


def test_embed_reindexes():
    j = lift(parse("x1^2*p1"), [1.5, 2.0], 3, XP)
    big = embed(j, [0, 2], 4)
    assert big.partial((2, 0, 1, 0)) == pytest.approx(j.partial((2, 1)))
    assert big.partial((0, 1, 0, 0)) == 0.0


def test_multiplication_table_is_exact():
    t = table(2, 3)
    assert len(t.indices) == 10


# properties --------------------------------------------------------------------------

POINTS = st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
SIMPLE = st.sampled_from(
    ["x1*p1", "sin(x1) + p1^3", "exp(0.3*p1)*x1", "cosh(p1)*sqrt(x1^2 + 1)", "tanh(x1 - p1)", "asinh(x1*p1)"]
)


@given(SIMPLE, SIMPLE, st.floats(-3, 3), st.floats(-3, 3), POINTS)
def test_linearity(e1, e2, a, b, point):
    combined = lift(parse(f"({a!r})*({e1}) + ({b!r})*({e2})"), list(point), 3, XP)
    parts = a * lift(parse(e1), list(point), 3, XP) + b * lift(parse(e2), list(point), 3, XP)
    scale = np.max(np.abs(parts.coeffs)) + 1.0
    assert np.max(np.abs(combined.coeffs - parts.coeffs)) <= 1e-12 * scale


@given(SIMPLE, SIMPLE, POINTS)
def test_product_rule(e1, e2, point):
    product = lift(parse(f"({e1})*({e2})"), list(point), 3, XP)
    jets = lift(parse(e1), list(point), 3, XP) * lift(parse(e2), list(point), 3, XP)
    scale = np.max(np.abs(jets.coeffs)) + 1.0
    assert np.max(np.abs(product.coeffs - jets.coeffs)) <= 1e-12 * scale


# random expression trees against a complex-contour oracle ---------------------------------
#
# Each tree is built twice: as source text for the parser and as a cmath
# closure. Taylor coefficients along a direction d come from the Cauchy
# integral on a small circle; mixed coefficients are recovered by solving
# sum_alpha c_alpha d^alpha = a_k(d) over many directions.

VARS = ["x1", "x2", "p1", "p2"]
UNARY = {
    "exp": lambda s: (f"exp(tanh({s[0]}))", lambda z, f=s[1]: cmath.exp(cmath.tanh(f(z)))),
    "log": lambda s: (f"log(1 + ({s[0]})^2)", lambda z, f=s[1]: cmath.log(1 + f(z) ** 2)),
    "sqrt": lambda s: (f"sqrt(2 + ({s[0]})^2)", lambda z, f=s[1]: cmath.sqrt(2 + f(z) ** 2)),
    "sinh": lambda s: (f"sinh(0.5*({s[0]}))", lambda z, f=s[1]: cmath.sinh(0.5 * f(z))),
    "cosh": lambda s: (f"cosh(0.5*({s[0]}))", lambda z, f=s[1]: cmath.cosh(0.5 * f(z))),
    "tanh": lambda s: (f"tanh({s[0]})", lambda z, f=s[1]: cmath.tanh(f(z))),
    "asinh": lambda s: (f"asinh({s[0]})", lambda z, f=s[1]: cmath.asinh(f(z))),
    "sin": lambda s: (f"sin({s[0]})", lambda z, f=s[1]: cmath.sin(f(z))),
    "cos": lambda s: (f"cos({s[0]})", lambda z, f=s[1]: cmath.cos(f(z))),
    "neg": lambda s: (f"-({s[0]})", lambda z, f=s[1]: -f(z)),
    "square": lambda s: (f"({s[0]})^2", lambda z, f=s[1]: f(z) ** 2),
    "cube": lambda s: (f"({s[0]})^3", lambda z, f=s[1]: f(z) ** 3),
    "root": lambda s: (f"(1.5 + ({s[0]})^2)^0.75", lambda z, f=s[1]: (1.5 + f(z) ** 2) ** 0.75),
}
BINARY = {
    "+": lambda a, b: (f"({a[0]}) + ({b[0]})", lambda z, f=a[1], g=b[1]: f(z) + g(z)),
    "-": lambda a, b: (f"({a[0]}) - ({b[0]})", lambda z, f=a[1], g=b[1]: f(z) - g(z)),
    "*": lambda a, b: (f"({a[0]})*({b[0]})", lambda z, f=a[1], g=b[1]: f(z) * g(z)),
    "/": lambda a, b: (f"({a[0]})/(1.5 + ({b[0]})^2)", lambda z, f=a[1], g=b[1]: f(z) / (1.5 + g(z) ** 2)),
}


def _leaf(draw_var, const):
    if draw_var is not None:
        k = VARS.index(draw_var)
        return draw_var, lambda z, k=k: z[k]
    return f"{const:.3f}", lambda z, c=round(const, 3): complex(c)


_VAR_LEAF = st.sampled_from(VARS).map(lambda v: _leaf(v, 0.0))
LEAVES = st.one_of(_VAR_LEAF, _VAR_LEAF, _VAR_LEAF, st.floats(-2, 2).map(lambda c: _leaf(None, c)))


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(sorted(UNARY)), children).map(lambda t: UNARY[t[0]](t[1])),
        st.tuples(st.sampled_from(sorted(BINARY)), children, children).map(lambda t: BINARY[t[0]](t[1], t[2])),
    )


def trees(depth=4):
    """Expression trees of depth at most ``depth``."""
    if depth == 0:
        return LEAVES
    sub = trees(depth - 1)
    return st.one_of(LEAVES, _extend(sub))


# the root is always an operator and the tree mixes at least two variables
TREES = _extend(trees(3)).filter(lambda t: sum(v in t[0] for v in VARS) >= 2)


DIRECTIONS = np.array(
    [d for d in itertools.product((-1, 0, 1), repeat=4) if any(d) and next(v for v in d if v) > 0], float
)


def contour_coefficients(f, z0, order=3, radius=0.05, nodes=32):
    """Jet coefficients of an analytic f at z0, keyed like Jet.indices()."""
    omega = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    directional = []
    for d in DIRECTIONS:
        g = np.array([f(z0 + radius * w * d) for w in omega])
        a = np.fft.fft(g) / nodes
        directional.append([(a[k] / radius**k).real for k in range(order + 1)])
    directional = np.array(directional)
    out = {}
    for k in range(order + 1):
        alphas = [a for a in itertools.product(range(k + 1), repeat=4) if sum(a) == k]
        A = np.array([[np.prod(d ** np.array(a)) for a in alphas] for d in DIRECTIONS])
        sol, *_ = np.linalg.lstsq(A, directional[:, k], rcond=None)
        out.update(dict(zip(alphas, sol)))
    return out


@given(TREES, st.tuples(*[st.floats(-1, 1)] * 4))
def test_random_trees_against_contour_oracle(tree, point):
    text, fn = tree
    z0 = np.array(point)
    jet = lift(parse(text), z0, 3, VARS)
    oracle = contour_coefficients(lambda z: fn(z), z0.astype(complex))
    for alpha in jet.indices:
        got, want = jet.coeff(alpha), oracle[alpha]
        assert abs(got - want) <= max(1e-6 * abs(want), 1e-9), (text, alpha, got, want)


@given(TREES, st.tuples(*[st.floats(-1, 1)] * 4))
def test_random_trees_gradient_against_differences(tree, point):
    text, fn = tree
    z0 = np.array(point)
    grad = lift(parse(text), z0, 1, VARS).gradient()
    fd = fd_gradient(lambda z: fn(z.astype(complex)).real, z0, 1e-5)
    for got, want in zip(grad, fd):
        assert abs(got - want) <= max(1e-6 * abs(want), 1e-9)
