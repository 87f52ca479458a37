"""Continuum engine: the Riccati flow in a pole-free angle variable.

With a fixed scale ``s`` the substitution ``psi = rho cos(theta)``,
``psi' = -s rho sin(theta)`` turns the Schrodinger equation into::

    theta'    = (kappa^2 / s) cos^2(theta) + s sin^2(theta)
    (ln rho)' = (kappa^2 / s - s) sin(theta) cos(theta)

so ``tan(theta) = P / s`` with ``P = -psi'/psi`` obeying ``P' = kappa^2 + P^2``.
Nodes of psi are the crossings of odd multiples of pi/2; nothing diverges
there, and no derivative of V is needed.  As in the transfer-matrix engine
two decaying solutions are swept inward from the truncation points and
joined at a fixed edge; their angle mismatch gives ``J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .discretize import Discretization
from .errors import NotAnEigenvalue, ToleranceNotMet
from .potential import Potential

DEFAULT_TOL = 1e-10


def riccati_rhs(P: float, kappa_sq: float) -> float:
    """Right-hand side of ``dP/dx = kappa^2 + P^2``."""
    return kappa_sq + P * P


@dataclass(frozen=True)
class RiccatiState:
    """One sample of the flow.

    ``representation`` is ``"phase"`` where the region is classically
    allowed (``value`` is the angle measured against the local kappa) and
    ``"logderivative"`` elsewhere (``value`` is P).  ``accumulated_phase`` is
    the continuous angle of the sweep.
    """

    x: float
    representation: str
    value: float
    accumulated_phase: float


@dataclass(frozen=True)
class WavefunctionTable:
    x: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    normalization: float
    node_count: int


@dataclass(frozen=True)
class _Branch:
    # solutions of successive segments between breakpoints, in sweep order
    pieces: tuple
    x: np.ndarray
    y: np.ndarray

    def at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((3, x.size))
        done = np.zeros(x.size, dtype=bool)
        for sol in self.pieces:
            if sol.sol is None:
                raise ValueError("trace was integrated without dense output")
            lo, hi = sorted((sol.t[0], sol.t[-1]))
            sel = ~done & (x >= lo) & (x <= hi)
            if np.any(sel):
                out[:, sel] = sol.sol(x[sel])
                done |= sel
        if not np.all(done):
            raise ValueError("sample outside the swept interval")
        return out


@dataclass(frozen=True)
class PhaseFlowTrace:
    """Both sweeps at one trial energy plus the derived quantities.

    ``theta``/``log_rho`` are the joined samples on ``x`` (the right branch is
    shifted by ``mismatch`` and rescaled to meet the left one).
    ``total_phase`` is ``pi * J``; ``kappa_integral`` is the quadrature of
    kappa over the classically allowed span and ``delta`` their difference.
    """

    E: float
    x_C: float
    x_D: float
    x_match: float
    scale: float
    x: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    log_rho: np.ndarray = field(repr=False)
    mismatch: float
    J: float
    total_phase: float
    kappa_integral: float
    delta: float
    node_count: int
    tol: float
    kappa_sq: object = field(repr=False, default=None)
    left: _Branch = field(repr=False, default=None)
    right: _Branch = field(repr=False, default=None)
    norm_left: float = 0.0
    norm_right: float = 0.0
    rho_shift: float = 0.0

    def states(self):
        """The trace as a list of ``RiccatiState`` records."""
        out = []
        ksq = self.kappa_sq(self.x)
        with np.errstate(divide="ignore", invalid="ignore"):
            P = self.scale * np.tan(self.theta)
        for x, k2, th, p in zip(self.x, ksq, self.theta, P):
            if k2 > 0:
                k = math.sqrt(k2)
                local = math.atan2(math.sin(th) * self.scale / k, math.cos(th))
                # keep the local angle on the same branch as the sweep angle
                local += round((th - local) / math.pi) * math.pi
                out.append(RiccatiState(float(x), "phase", local, float(th)))
            else:
                out.append(RiccatiState(float(x), "logderivative", float(p), float(th)))
        return out


def _kappa_sq_fn(p: Potential, E: float):
    c = 2.0 * p.mass / p.hbar**2

    def scalar(x):
        return c * (E - p.eval(x))

    def vector(x):
        return c * (E - p.eval_array(np.asarray(x, dtype=float)))

    return scalar, vector


def kappa_integral(p: Potential, E: float, turning_points, left: float, right: float,
                   *, singular_left: bool = False) -> float:
    """Integral of kappa over the classically allowed parts of ``[left, right]``.

    Turning-point ends carry a square-root zero of kappa, handled by the
    algebraic weight of QUADPACK's QAWS rule.  ``singular_left`` marks a
    ``1/x`` divergence of V at ``left`` (kappa ~ x**-0.5 there).
    """
    k2, _ = _kappa_sq_fn(p, E)
    cuts = sorted({left, right, *[t for t in turning_points if left < t < right]})
    tps = set(turning_points)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        if k2(mid) <= 0:
            continue
        wa = 0.5 if a in tps else (-0.5 if singular_left and a == left else 0.0)
        wb = 0.5 if b in tps else 0.0
        if wa == 0.0 and wb == 0.0:
            val, _ = integrate.quad(lambda x: math.sqrt(max(k2(x), 0.0)), a, b,
                                    limit=400, epsabs=1e-13, epsrel=1e-13)
        else:
            def g(x, a=a, b=b, wa=wa, wb=wb):
                if not a < x < b:
                    return 0.0
                return math.sqrt(max(k2(x), 0.0)) / ((x - a) ** wa * (b - x) ** wb)

            val, _ = integrate.quad(g, a, b, weight="alg", wvar=(wa, wb),
                                    limit=400, epsabs=1e-13, epsrel=1e-13)
        total += val
    return total


def rescale_angle(theta: float, s_from: float, s_to: float) -> float:
    """Re-express an unwrapped angle measured with scale ``s_from`` in ``s_to``.

    Both angles share the same multiple of pi, so differences keep their
    winding.
    """
    c, sn = math.cos(theta), math.sin(theta)
    new = math.atan2(sn * s_from / s_to, c)
    return new + round((theta - new) / math.pi) * math.pi


def _sweep(k2, s, x0, x1, theta0, breaks, tol, max_step, dense=True, fine=None):
    # max_step applies inside ``fine`` = (left, right); the forbidden tails
    # vary on the decay length and are left to the step controller
    def rhs(x, y):
        c, sn = math.cos(y[0]), math.sin(y[0])
        q = k2(x) / s
        return (q * c * c + s * sn * sn, (q - s) * sn * c, math.exp(2.0 * y[1]) * c * c)

    direction = 1.0 if x1 > x0 else -1.0
    lo_f, hi_f = fine if fine is not None else (-math.inf, math.inf)
    cuts = [*breaks, *(c for c in (lo_f, hi_f) if math.isfinite(c))]
    stops = sorted(set(b for b in cuts if min(x0, x1) < b < max(x0, x1)))
    if direction < 0:
        stops = stops[::-1]
    y = np.array([theta0, 0.0, 0.0])
    a = x0
    pieces, xs, ys = [], [], []
    for b in [*stops, x1]:
        inside = min(a, b) < hi_f and max(a, b) > lo_f
        sol = integrate.solve_ivp(rhs, (a, b), y, method="DOP853", rtol=tol, atol=tol,
                                  max_step=max_step if inside else np.inf, dense_output=dense)
        if sol.status != 0:
            raise ToleranceNotMet(f"phase flow integration failed on [{a}, {b}]: {sol.message}")
        pieces.append(sol)
        xs.append(sol.t if not xs else sol.t[1:])
        ys.append(sol.y if not ys else sol.y[:, 1:])
        y = sol.y[:, -1].copy()
        a = b
    return _Branch(tuple(pieces), np.concatenate(xs), np.concatenate(ys, axis=1))


def integrate_phase(p: Potential, E: float, d: Discretization, tol: float = DEFAULT_TOL, *,
                    allowed_span: tuple | None = None, singular_left: bool = False,
                    dense: bool = True, x_match: float | None = None) -> PhaseFlowTrace:
    """Sweep the angle inward from ``d.x_D`` and ``d.x_C`` and join at ``x_match``.

    A decaying tail starts at ``tan(theta) = -/+ alpha / s`` with alpha the
    local decay constant, a hard wall at ``theta = +/- pi/2``.  Step control
    is DOP853 with local relative tolerance ``tol``.

    ``allowed_span`` is ``(left, right)`` for the kappa quadrature; it
    defaults to the outermost turning points of ``d`` or its walls.  Without
    ``dense`` the trace cannot be sampled between steps, which saves time
    when only J is wanted.  ``x_match`` defaults to the layer edge
    ``d.x_match``; pass the exact point to avoid snapping it to a coarse grid.
    """
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    k2, k2v = _kappa_sq_fn(p, E)
    tps = tuple(d.turning_points)
    if allowed_span is None:
        left = d.x_C if d.left_wall else min(tps)
        right = d.x_D if d.right_wall else max(tps)
    else:
        left, right = allowed_span
    kint = kappa_integral(p, E, tps, left, right, singular_left=singular_left)
    width = right - left
    s = kint / width if kint > 0 else 1.0
    max_step = width / 200.0
    breaks = tuple(b for b in p.breakpoints if d.x_C < b < d.x_D)
    xm = d.x_match if x_match is None else float(x_match)
    if not d.x_C < xm < d.x_D:
        raise ValueError(f"match point {xm} lies outside ({d.x_C}, {d.x_D})")

    if d.right_wall:
        th_D = 0.5 * math.pi
    else:
        th_D = math.atan(math.sqrt(max(-k2(d.x_D), 0.0)) / s)
    if d.left_wall:
        th_C = -0.5 * math.pi
    else:
        th_C = -math.atan(math.sqrt(max(-k2(d.x_C), 0.0)) / s)

    R = _sweep(k2, s, d.x_D, xm, th_D, breaks, tol, max_step, dense, (left, right))
    L = _sweep(k2, s, d.x_C, xm, th_C, breaks, tol, max_step, dense, (left, right))
    thL, lrL, nL = L.y[:, -1]
    thR, lrR, nR = R.y[:, -1]
    # compare the angles in the local scale at the match point, as the
    # transfer-matrix engine does, so J agrees between engines off-eigenvalue
    km = math.sqrt(abs(k2(xm))) or s
    mismatch = float(rescale_angle(thL, s, km) - rescale_angle(thR, s, km))
    J = 1.0 + mismatch / math.pi
    shift = lrL - lrR

    x = np.concatenate([L.x, R.x[::-1][1:]])
    theta = np.concatenate([L.y[0], (R.y[0] + mismatch)[::-1][1:]])
    log_rho = np.concatenate([L.y[1], (R.y[1] + shift)[::-1][1:]])
    from .tmatrix import count_half_turns

    nodes = count_half_turns(theta[0], theta[-1])
    return PhaseFlowTrace(float(E), d.x_C, d.x_D, xm, s, x, theta, log_rho, mismatch, J,
                          math.pi * J, kint, math.pi * J - kint, nodes, tol, k2v, L, R,
                          float(nL), float(-nR), float(shift))


def delta_integral(trace: PhaseFlowTrace, d: Discretization | None = None) -> float:
    """Accumulated phase minus the kappa quadrature over the allowed span."""
    return trace.total_phase - trace.kappa_integral


def reconstruct_wavefunction(trace: PhaseFlowTrace, samples, *, tol_phase: float = 1e-6) -> WavefunctionTable:
    """Normalized psi at ``samples`` from the amplitude and angle of the two sweeps.

    ``psi = rho cos(theta)`` is the same function as ``exp(-integral P)``
    with a sign flip at every pole of P, without dividing by zero there.

    Raises ``NotAnEigenvalue`` when the two sweeps do not meet within
    ``tol_phase`` radians modulo pi.
    """
    k = round(trace.mismatch / math.pi)
    if abs(trace.mismatch - k * math.pi) > tol_phase:
        raise NotAnEigenvalue(
            f"sweeps mismatch by {trace.mismatch - k * math.pi:.3g} rad at E = {trace.E}")
    xs = np.asarray(samples, dtype=float)
    psi = np.zeros_like(xs)
    left = xs <= trace.x_match
    right = ~left & (xs <= trace.x_D)
    left &= xs >= trace.x_C
    if np.any(left):
        y = trace.left.at(xs[left])
        psi[left] = np.exp(y[1]) * np.cos(y[0])
    if np.any(right):
        y = trace.right.at(xs[right])
        psi[right] = np.exp(y[1] + trace.rho_shift) * np.cos(y[0] + trace.mismatch)
    norm_sq = trace.norm_left + trace.norm_right * math.exp(2.0 * trace.rho_shift)
    c = 1.0 / math.sqrt(norm_sq)
    psi *= c
    # orient so psi is positive just right of the left end
    first = trace.left.at([trace.x_C])[:, 0]
    probe = math.cos(first[0]) if abs(math.cos(first[0])) > 1e-3 else -math.sin(first[0])
    if probe < 0:
        psi = -psi
    return WavefunctionTable(xs, psi, c, trace.node_count)
