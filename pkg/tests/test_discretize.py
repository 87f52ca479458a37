import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from qaction import builtin
from qaction import discretize as D
from qaction.errors import NoTurningPoints


def test_turning_points_examples():
    assert D.locate_turning_points(builtin("harmonic_1d"), 0.5) == pytest.approx([-1, 1], abs=1e-12)
    assert D.locate_turning_points(builtin("coulomb_1d"), -0.5) == pytest.approx([2.0], abs=1e-12)
    E = 14.31247
    r = math.sqrt(E / 10)
    want = [-3 - r, -3 + r, 3 - r, 3 + r]
    got = D.locate_turning_points(builtin("double_oscillator"), E)
    assert got == pytest.approx(want, abs=1e-11)


def test_no_turning_points_below_minimum():
    with pytest.raises(NoTurningPoints):
        D.allowed_span_edges(builtin("harmonic_1d"), -1.0)


def _x_D_closed_form(budget):
    # integral_1^X sqrt(x^2 - 1) dx = (X sqrt(X^2 - 1) - acosh X) / 2
    f = lambda X: 0.5 * (X * math.sqrt(X * X - 1) - math.acosh(X)) - budget  # noqa: E731
    return optimize.brentq(f, 1.0, 100.0, xtol=1e-14)


def test_truncation_harmonic():
    x_C, x_D = D.truncate_domain(builtin("harmonic_1d"), 0.5, 20)
    X = _x_D_closed_form(20)
    assert X == pytest.approx(6.5629003, abs=1e-6)
    assert x_D == pytest.approx(X, rel=1e-9)
    assert x_C == pytest.approx(-X, rel=1e-9)


@given(st.floats(2.0, 40.0))
def test_truncation_meets_budget(budget):
    _, x_D = D.truncate_domain(builtin("harmonic_1d"), 0.5, budget)
    assert x_D == pytest.approx(_x_D_closed_form(budget), rel=1e-8)


def test_truncation_walls_and_tails():
    assert D.truncate_domain(builtin("infinite_well", {"L": 1}), 3.0, 20) == (0.0, 1.0)
    assert D.truncate_domain(builtin("infinite_well", {"L": 1}), 3.0, 50) == (0.0, 1.0)
    _, x_D = D.truncate_domain(builtin("woods_saxon", {"l": 1}), -0.97815416, 20)
    assert x_D > 30


def test_layers_constant_well():
    d = D.build_layers(builtin("infinite_well", {"L": 1}), math.pi**2 / 2, 0.0, 1.0, 10,
                       left_wall=True, right_wall=True)
    assert np.allclose(d.kappa_sq, math.pi**2, rtol=1e-15)


def test_layers_sign_matches_midpoint():
    d = D.build_layers(builtin("harmonic_1d"), 0.5, -6.0, 6.0, 240)
    inside = np.abs(d.midpoints) < 1
    assert np.array_equal(d.kappa_sq > 0, inside)


@given(st.sampled_from(["harmonic_1d", "double_oscillator", "woods_saxon", "coulomb_radial"]),
       st.integers(16, 3000))
def test_layer_widths_sum_to_span(name, count):
    p = builtin(name, {"l": 1} if name in ("woods_saxon", "coulomb_radial") else None)
    E = {"harmonic_1d": 2.0, "double_oscillator": 20.0, "woods_saxon": -0.5,
         "coulomb_radial": -0.1}[name]
    d = D.discretize(p, E, count)
    assert d.layer_count == count
    assert d.edges[-1] == pytest.approx(d.x_D, rel=1e-14, abs=1e-14)
    assert d.h * count == pytest.approx(d.x_D - d.x_C, rel=1e-14)


def test_midpoint_values_converge_second_order():
    # cell-average of V vs midpoint value shrinks by ~4 per halving
    p = builtin("harmonic_1d")
    errs = []
    for n in (100, 200, 400):
        d = D.build_layers(p, 2.0, -4.0, 4.0, n)
        edges = d.edges
        avg = (edges[1:] ** 3 - edges[:-1] ** 3) / (6 * d.h)  # exact cell mean of x^2/2
        errs.append(np.max(np.abs((2.0 - 0.5 * d.kappa_sq) - avg)))
    assert errs[0] / errs[1] == pytest.approx(4, rel=1e-6)
    assert errs[1] / errs[2] == pytest.approx(4, rel=1e-6)


def test_doubling_keeps_signs_away_from_turning_points():
    p = builtin("double_oscillator")
    E = 30.0
    coarse = D.build_layers(p, E, -8.0, 8.0, 400)
    fine = D.build_layers(p, E, -8.0, 8.0, 800)
    tps = np.array(D.locate_turning_points(p, E))
    for j, x in enumerate(coarse.midpoints):
        if np.min(np.abs(tps - x)) > coarse.h:
            assert (fine.kappa_sq[2 * j] > 0) == (coarse.kappa_sq[j] > 0)
