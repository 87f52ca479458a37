import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from qaction import builtin, quantize
from qaction import discretize as D
from qaction import phaseflow as F
from qaction.errors import NotAnEigenvalue


@pytest.mark.parametrize("P, ksq, want", [(0.0, 1.0, 1.0), (2.0, -4.0, 0.0), (2.0, 3.0, 7.0)])
def test_riccati_rhs(P, ksq, want):
    assert F.riccati_rhs(P, ksq) == want


@given(st.floats(-1e3, 1e3), st.floats(-1e6, 1e6))
def test_riccati_rhs_property(P, ksq):
    assert F.riccati_rhs(P, ksq) == ksq + P * P


def _trace(name, E, params=None, **kw):
    p = builtin(name, params)
    d = D.discretize(p, E, 16)
    return p, d, F.integrate_phase(p, E, d, **kw)


def test_infinite_well_phase():
    _, d, tr = _trace("infinite_well", math.pi**2 / 2, {"L": 1})
    assert tr.total_phase == pytest.approx(math.pi, abs=1e-9)
    assert F.delta_integral(tr, d) == pytest.approx(0.0, abs=1e-9)


def test_harmonic_ground_state_phase():
    _, d, tr = _trace("harmonic_1d", 0.5)
    assert tr.J == pytest.approx(1.0, abs=1e-10)
    assert tr.kappa_integral == pytest.approx(math.pi / 2, abs=1e-12)
    assert F.delta_integral(tr, d) == pytest.approx(math.pi / 2, abs=1e-9)


def test_between_levels():
    _, _, tr = _trace("harmonic_1d", 0.4)
    assert 0.0 < tr.J < 1.0
    _, _, tr = _trace("harmonic_1d", 1.0)
    assert 1.0 < tr.J < 2.0


def test_radial_oscillator_delta():
    _, d, tr = _trace("harmonic_radial", 2.5, {"l": 1})
    assert F.delta_integral(tr, d) == pytest.approx((2 * math.sqrt(2) - 1) * math.pi / 4, abs=1e-9)


def test_coulomb_1d_delta():
    sol = quantize.solve_eigenvalue(builtin("coulomb_1d"), 1)
    assert sol.delta == pytest.approx(math.pi, abs=1e-6)


def test_states_switch_representation():
    _, _, tr = _trace("harmonic_1d", 1.5)
    states = tr.states()
    reps = {s.representation for s in states}
    assert reps == {"phase", "logderivative"}
    for s in states:
        assert (s.representation == "phase") == (abs(s.x) < 1.7320508)
    acc = np.array([s.accumulated_phase for s in states])
    assert np.all(np.isfinite(acc))


def test_rescale_angle_round_trip():
    th = 7.3
    assert F.rescale_angle(F.rescale_angle(th, 1.0, 3.0), 3.0, 1.0) == pytest.approx(th, abs=1e-14)
    # multiples of pi/2 are fixed points
    assert F.rescale_angle(1.5 * math.pi, 1.0, 5.0) == pytest.approx(1.5 * math.pi, abs=1e-14)


# ------------------------------------------------------------- wavefunctions

x = sp.symbols("x", real=True)
CLOSED = {
    0: (sp.pi ** sp.Rational(-1, 4) * sp.exp(-x**2 / 2), sp.Rational(1, 2)),
    1: (sp.sqrt(2) * sp.pi ** sp.Rational(-1, 4) * x * sp.exp(-x**2 / 2), sp.Rational(3, 2)),
}


@pytest.mark.parametrize("n", [0, 1])
def test_closed_form_states_solve_riccati(n):
    psi, E = CLOSED[n]
    P = sp.simplify(-sp.diff(psi, x) / psi)
    ksq = 2 * (E - x**2 / 2)
    dP = sp.lambdify(x, sp.diff(P, x))
    Pf, kf = sp.lambdify(x, P), sp.lambdify(x, ksq)
    for xv in np.linspace(-4, 4, 401):
        if n == 1 and abs(xv) < 1e-3:
            continue  # pole of P at the node
        assert abs(dP(xv) - F.riccati_rhs(Pf(xv), kf(xv))) < 1e-9


@pytest.mark.parametrize("n", [0, 1])
def test_reconstructed_oscillator_states(n):
    p = builtin("harmonic_1d")
    xs = np.linspace(-5, 5, 401)
    sol = quantize.solve_eigenvalue(p, n, wavefunction_samples=xs)
    wf = sol.wavefunction
    exact = sp.lambdify(x, CLOSED[n][0])(xs)
    exact *= np.sign(np.dot(exact, wf.psi))  # eigenvectors are fixed only up to sign
    assert wf.node_count == n
    big = np.abs(exact) > 1e-3
    assert np.max(np.abs(wf.psi[big] / exact[big] - 1)) < 1e-6
    assert np.max(np.abs(wf.psi - exact)) < 1e-8


def test_reconstructed_well_state():
    p = builtin("infinite_well", {"L": 1})
    xs = np.linspace(0, 1, 201)
    wf = quantize.solve_eigenvalue(p, 0, wavefunction_samples=xs).wavefunction
    assert np.allclose(wf.psi, math.sqrt(2) * np.sin(math.pi * xs), atol=1e-8)
    assert wf.node_count == 0


def _sign_changes(psi):
    s = np.sign(psi[np.abs(psi) > 1e-12 * np.max(np.abs(psi))])
    return int(np.sum(s[1:] != s[:-1]))


@pytest.mark.parametrize("name, params, n", [
    # a shallow double well: the default one has pairs degenerate below double precision
    ("harmonic_1d", None, 3), ("double_oscillator", {"k": 1, "a": 2}, 2), ("woods_saxon", {"l": 1}, 4),
    ("harmonic_radial", {"l": 2}, 1), ("coulomb_radial", {"l": 1}, 2),
])
def test_normalization_and_nodes(name, params, n):
    sol = quantize.eigenfunction(builtin(name, params), n, points=40001)
    wf = sol.wavefunction
    norm = integrate.simpson(wf.psi**2, x=wf.x)
    assert norm == pytest.approx(1.0, abs=1e-8)
    assert wf.node_count == n
    assert _sign_changes(wf.psi) == n


def test_reconstruct_rejects_non_eigenvalue():
    _, _, tr = _trace("harmonic_1d", 0.7)
    with pytest.raises(NotAnEigenvalue):
        F.reconstruct_wavefunction(tr, [0.0])
