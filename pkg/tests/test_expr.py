import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaction import expr
from qaction.errors import ExprSyntaxError, UnknownIdentifier


@pytest.mark.parametrize("source, params, x, expected", [
    ("x^2/2", {}, 1.0, 0.5),
    ("10*(abs(x)-3)^2", {}, 3.0, 0.0),
    ("-1/(1+exp(2*(x-r0)))", {"r0": 30.0}, 30.0, -0.5),
])
def test_documented_examples(source, params, x, expected):
    tree = expr.parse_potential(source, params)
    assert expr.evaluate(tree, x, params) == pytest.approx(expected, abs=1e-15)


def test_precedence():
    ev = lambda s: expr.evaluate(expr.parse_potential(s), 2.0)  # noqa: E731
    assert ev("-x^2") == -4.0
    assert ev("2^3^2") == 512.0
    assert ev("2^-1") == 0.5
    assert ev("1+2*x-3") == 2.0
    assert ev("8/2/2") == 2.0


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        expr.parse_potential("x + * 2")
    assert err.value.position == 4
    with pytest.raises(ExprSyntaxError):
        expr.parse_potential("   ")
    with pytest.raises(ExprSyntaxError):
        expr.parse_potential("(x + 1")


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as err:
        expr.parse_potential("x + k", {})
    assert err.value.name == "k"
    assert err.value.position == 4


def _tree(depth):
    leaf = st.one_of(st.just("x"), st.integers(1, 9).map(str), st.just("c"))
    if depth == 0:
        return leaf
    sub = _tree(depth - 1)
    return st.one_of(
        leaf,
        st.tuples(sub, st.sampled_from(["+", "-", "*"]), sub).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        sub.map(lambda s: f"-{s}"),
        sub.map(lambda s: f"cos({s})"),
        sub.map(lambda s: f"tanh({s})"),
    )


@given(_tree(3), st.floats(-3, 3))
def test_unparse_round_trip(source, x):
    params = {"c": 1.25}
    tree = expr.parse_potential(source, params)
    again = expr.parse_potential(expr.unparse(tree), params)
    assert again == tree
    assert expr.evaluate(again, x, params) == expr.evaluate(tree, x, params)


@given(_tree(2), st.lists(st.floats(-3, 3), min_size=1, max_size=20))
def test_vector_matches_scalar(source, xs):
    import numpy as np
    params = {"c": 0.5}
    scalar, vector = expr.compile_expr(expr.parse_potential(source, params), params)
    got = vector(np.array(xs))
    for xi, gi in zip(xs, np.broadcast_to(got, (len(xs),))):
        assert math.isclose(gi, scalar(xi), rel_tol=1e-14, abs_tol=1e-14)
