import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaction import potential as P
from qaction.errors import InvalidParam, UnknownBuiltin


def test_eval_examples():
    assert P.eval(P.builtin("harmonic_1d"), 1.0) == pytest.approx(0.5)
    ws = P.builtin("woods_saxon", {"l": 1})
    assert P.eval(ws, 30.0) == pytest.approx(-0.5 + 2 / (2 * 900), rel=1e-14)
    assert P.eval(P.builtin("coulomb_radial", {"l": 1}), 1.0) == pytest.approx(0.0, abs=1e-15)


def test_builtin_examples():
    assert P.builtin("double_oscillator").eval(0.0) == pytest.approx(90.0)
    assert P.builtin("infinite_well", {"L": 1}).eval(0.5) == 0.0
    ws = P.builtin("woods_saxon", {"l": 1})
    for r in (200.0, 400.0, 800.0):
        # the well has died off; only l(l+1)/(2 r^2) is left
        assert ws.eval(r) == pytest.approx(1.0 / r**2, rel=1e-12)


def test_centrifugal_term_uses_mass_and_hbar():
    p = P.builtin("harmonic_radial", {"l": 2}, mass=0.5, hbar=1.0)
    r = 1.7
    base = 0.5 * 0.5 * r * r  # m omega^2 r^2 / 2
    assert p.eval(r) == pytest.approx(base + 6 / r**2, rel=1e-14)


def test_expression_matches_builtin():
    q = P.from_spec("expr:10*(abs(x)-a)^2", {"a": 3})
    b = P.builtin("double_oscillator")
    xs = np.linspace(-8, 8, 101)
    assert np.allclose(q.eval_array(xs), b.eval_array(xs), rtol=1e-15, atol=0)


@pytest.mark.parametrize("name", ["harmonic_1d", "double_oscillator"])
@given(x=st.floats(-50, 50))
def test_symmetric_builtins(name, x):
    p = P.builtin(name)
    assert p.eval(x) == p.eval(-x)


def test_symmetry_on_1000_random_points():
    rng = np.random.default_rng(7)
    xs = rng.uniform(-20, 20, 1000)
    for name in ("harmonic_1d", "double_oscillator"):
        p = P.builtin(name)
        assert np.array_equal(p.eval_array(xs), p.eval_array(-xs))


def test_invalid():
    with pytest.raises(UnknownBuiltin):
        P.builtin("morse")
    with pytest.raises(InvalidParam):
        P.builtin("woods_saxon", {"l": -1})
    with pytest.raises(InvalidParam):
        P.builtin("harmonic_1d", mass=0)
    with pytest.raises(UnknownBuiltin):
        P.from_spec("harmonic")


def test_with_l_changes_only_centrifugal_part():
    p0 = P.builtin("coulomb_radial", {"l": 0})
    p3 = p0.with_l(3)
    r = 2.5
    assert p3.eval(r) - p0.eval(r) == pytest.approx(12 / (2 * r * r), rel=1e-14)
    assert math.isclose(p3.l, 3)
