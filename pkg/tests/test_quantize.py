import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qaction import builtin, quantize
from qaction.errors import NoSuchBoundState
from qaction.quantize import SolveOptions

E0 = math.pi**2 / 2
RIC = SolveOptions(engine="riccati")
TMX = SolveOptions(engine="tmatrix")


@pytest.mark.parametrize("name, E, want", [
    ("harmonic_1d", 0.5, 1.0), ("infinite_well", E0, 1.0), ("harmonic_1d", 1.5, 2.0),
    ("infinite_well", 2.25 * E0, 1.5),
])
@pytest.mark.parametrize("opts", [RIC, TMX], ids=["riccati", "tmatrix"])
def test_action_examples(name, E, want, opts):
    assert quantize.action(builtin(name), E, opts) == pytest.approx(want, abs=1e-9)


@given(st.floats(0.05, 9.0), st.floats(0.01, 1.0))
def test_action_increases(E, dE):
    p = builtin("harmonic_1d")
    assert quantize.action(p, E + dE) > quantize.action(p, E)


@pytest.mark.parametrize("name, params, E", [
    ("harmonic_1d", None, 2.1), ("woods_saxon", {"l": 1}, -0.7), ("double_oscillator", None, 30.0),
    ("harmonic_radial", {"l": 1}, 5.3), ("infinite_well", None, 30.0),
    ("coulomb_radial", {"l": 1}, -0.1),
])
def test_engines_agree_off_eigenvalue(name, params, E):
    p = builtin(name, params)
    a, b = quantize.action_point(p, E, RIC), quantize.action_point(p, E, TMX)
    assert a.J == pytest.approx(b.J, abs=1e-8)
    assert a.delta == pytest.approx(b.delta, abs=1e-7)


def test_solve_examples():
    ws = builtin("woods_saxon", {"l": 1}, mass=0.5)
    assert quantize.solve_eigenvalue(ws, 0).E == pytest.approx(-0.97815416, abs=5e-8)
    c = quantize.solve_eigenvalue(builtin("coulomb_radial", {"l": 2}), 1)
    assert c.E == pytest.approx(-1 / 32, rel=1e-9)
    assert c.label == 1 and c.node_count == 1


def test_spectrum_examples():
    well = quantize.solve_spectrum(builtin("infinite_well", {"L": 1}), 2)
    assert [s.E / E0 for s in well] == pytest.approx([1, 4, 9], rel=1e-10)
    osc = quantize.solve_spectrum(builtin("harmonic_radial", {"l": 1}), 1)
    assert [s.E for s in osc] == pytest.approx([2.5, 4.5], rel=1e-10)
    coul = quantize.solve_spectrum(builtin("coulomb_1d"), 2)
    assert [s.E for s in coul] == pytest.approx([-1 / 2, -1 / 8, -1 / 18], rel=1e-9)
    assert [s.label for s in coul] == [1, 2, 3]
    assert [s.node_count for s in coul] == [0, 1, 2]
    assert not coul.failures


def test_bound_state_count_exceeded():
    p = builtin("woods_saxon", {"V0": 1, "r0": 2, "a": 0.5, "l": 0})
    spec = quantize.solve_spectrum(p, 6)
    assert len(spec) >= 1
    (n, msg), = spec.failures.items()
    assert n == len(spec) and msg.startswith("BoundStateCountExceeded")
    with pytest.raises(NoSuchBoundState):
        quantize.solve_eigenvalue(p, 6)


def test_extrapolate_removes_h2_and_h4():
    h = np.array([0.1, 0.05, 0.025])
    assert quantize.extrapolate(h, 3 + 2 * h**2 - 5 * h**4) == pytest.approx(3, abs=1e-13)
    vals = 3 + 2 * h**2 + 0.7 * h**2 * np.log(h)
    assert quantize.extrapolate(h, vals, singular=True) == pytest.approx(3, abs=1e-13)


def test_scan_reports_monotone():
    curve = quantize.scan(builtin("harmonic_1d"), [0.5, 1.0, 1.5, 2.5])
    assert curve.monotone
    assert curve.values == pytest.approx([1.0, 1.5143257279091129, 2.0, 3.0], abs=1e-9)


def test_langer_residuals_vanish_for_coulomb():
    p = builtin("coulomb_radial", {"l": 1})
    exact, langer = quantize.langer_residuals(p, 0, -1 / 8)
    assert abs(exact) < 1e-9 and abs(langer) < 1e-12


def test_shallow_state_flag():
    # V0 tuned so the only level sits about 3e-7 below the threshold
    p = builtin("woods_saxon", {"V0": 0.2739, "r0": 2.0, "a": 0.5, "l": 0})
    sol = quantize.solve_eigenvalue(p, 0)
    assert -1e-6 < sol.E < 0
    assert sol.diagnostics.get("shallow_state") is True
    deep = quantize.solve_eigenvalue(builtin("woods_saxon", {"V0": 1.0, "r0": 2.0, "a": 0.5, "l": 0}), 0)
    assert "shallow_state" not in deep.diagnostics


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(engine="shooting")
    with pytest.raises(ValueError):
        SolveOptions(layers=4)
