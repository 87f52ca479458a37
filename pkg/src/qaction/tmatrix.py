"""Layer transfer matrices and the backward log-derivative phase recursion.

The state carried from layer to layer is the column ``(psi, psi')`` together
with an unwrapped angle.  Inside layer j the angle is measured in that
layer's own scale ``s_j = sqrt(|kappa_sq_j|)``::

    tan(theta) = P / s_j,   P = -psi' / psi

In an allowed layer this is exactly ``arctan(P / kappa_j)`` and the recursion
``P_j = kappa_j tan(arctan(P_{j+1} / kappa_j) - kappa_j h)`` lowers theta by
``kappa_j h``.  At each interface the angle is re-expressed in the next
layer's scale; those re-expression jumps are the discrete phase shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .discretize import Discretization
from .errors import PoleAtBoundary, StepTooCoarse

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class LayerMatrix:
    m11: float
    m12: float
    m21: float
    m22: float

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def __matmul__(self, other):
        if isinstance(other, LayerMatrix):
            return LayerMatrix(*(self.as_array() @ other.as_array()).ravel())
        return self.as_array() @ np.asarray(other)


@numba.njit(cache=True)
def _matrix(kappa_sq, h):
    if kappa_sq > 0.0:
        k = math.sqrt(kappa_sq)
        c = math.cos(k * h)
        s = math.sin(k * h)
        return c, -s / k, k * s, c
    if kappa_sq < 0.0:
        a = math.sqrt(-kappa_sq)
        c = math.cosh(a * h)
        s = math.sinh(a * h)
        return c, -s / a, -a * s, c
    return 1.0, -h, 0.0, 1.0


def layer_matrix(kappa_sq: float, h: float) -> LayerMatrix:
    """Transfer matrix carrying ``(psi, psi')`` from a layer's right edge to its left.

    Trigonometric for ``kappa_sq > 0``; its continuation ``kappa -> i alpha``
    (cosh/sinh) for ``kappa_sq < 0``; ``[[1, -h], [0, 1]]`` at zero.
    """
    if h < 0:
        raise ValueError("layer width must be nonnegative")
    return LayerMatrix(*_matrix(float(kappa_sq), float(h)))


@dataclass(frozen=True)
class PhaseTrace:
    """Record of the two decaying sweeps at a fixed trial energy.

    Arrays are indexed by layer edge, ``x[0] = x_C`` to ``x[-1] = x_D``.  Left
    of the match edge the values come from the solution that decays into the
    left tail, right of it from the one decaying into the right tail; the
    right branch of ``theta`` is shifted so the angle is continuous.
    ``theta`` is measured in the scale of the layer left of each edge,
    ``theta_right`` in the scale of the layer to its right.  ``psi`` and
    ``dpsi`` are unit-norm columns, ``log_scale`` the discarded log norms.
    ``total_phase`` is ``pi * J``, the allowed-region phase sum plus delta.
    """

    x: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    theta_right: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    dpsi: np.ndarray = field(repr=False)
    log_scale: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)
    match_index: int
    mismatch: float
    total_phase: float
    J: float
    allowed_kappa_sum: float
    delta: float
    node_count: int


def count_half_turns(theta_lo: float, theta_hi: float, margin: float = 1e-6) -> int:
    """Number of odd multiples of pi/2 inside ``(theta_lo, theta_hi)``.

    Multiples within ``margin`` of either end are left out, so a node sitting
    on a wall is not counted.
    """
    theta_lo, theta_hi = theta_lo + margin, theta_hi - margin
    if theta_hi <= theta_lo:
        return 0
    return int(math.ceil(theta_hi / math.pi - 0.5) - math.floor(theta_lo / math.pi - 0.5) - 1)


@numba.njit(cache=True)
def _wrap(d):
    # into (-pi, pi]
    while d > math.pi:
        d -= 2.0 * math.pi
    while d <= -math.pi:
        d += 2.0 * math.pi
    return d


@numba.njit(cache=True)
def _sweep(kappa_sq, h, psi_D, dpsi_D, step_limit):
    n = kappa_sq.shape[0]
    # edge j separates layer j-1 (left) from layer j (right)
    theta_left = np.empty(n + 1)
    theta_right = np.empty(n + 1)
    psi = np.empty(n + 1)
    dpsi = np.empty(n + 1)
    logs = np.empty(n + 1)
    scale = np.empty(n)
    for j in range(n):
        s = math.sqrt(abs(kappa_sq[j]))
        scale[j] = s if s > 0.0 else 1.0 / h
    u = psi_D
    v = dpsi_D
    nrm = math.hypot(u, v)
    u /= nrm
    v /= nrm
    lg = math.log(nrm)
    s = scale[n - 1]
    th = math.atan2(-v / s, u)
    psi[n] = u
    dpsi[n] = v
    logs[n] = lg
    theta_right[n] = th
    theta_left[n] = th
    bad = -1
    for j in range(n - 1, -1, -1):
        s = scale[j]
        if j < n - 1:
            # re-express the edge angle in this layer's scale
            th += _wrap(math.atan2(-v / s, u) - math.atan2(-v / scale[j + 1], u))
            theta_left[j + 1] = th
        ksq = kappa_sq[j]
        m11, m12, m21, m22 = _matrix(ksq, h)
        un = m11 * u + m12 * v
        vn = m21 * u + m22 * v
        if ksq > 0.0:
            step = math.sqrt(ksq) * h
            if step >= step_limit and bad < 0:
                bad = j
            th -= step
        else:
            th += _wrap(math.atan2(-vn / s, un) - math.atan2(-v / s, u))
        nrm = math.hypot(un, vn)
        u = un / nrm
        v = vn / nrm
        lg += math.log(nrm)
        psi[j] = u
        dpsi[j] = v
        logs[j] = lg
        theta_right[j] = th
    theta_left[0] = th
    return theta_left, theta_right, psi, dpsi, logs, scale, bad


def _tail(ksq_edge, wall, P):
    if wall:
        return 0.0, -1.0
    if P is None:
        if ksq_edge >= 0:
            raise PoleAtBoundary("truncation point lies in an allowed layer; no decaying tail")
        P = math.sqrt(-ksq_edge)
    if not P > 0:
        raise ValueError("tail log-derivative must be positive for a decaying solution")
    return 1.0, -float(P)


def propagate_logderivative(d: Discretization, P_D: float | None = None, *,
                            alpha_C: float | None = None, match_index: int | None = None,
                            step_limit: float = HALF_PI) -> PhaseTrace:
    """Run the log-derivative recursion inward from both truncation points.

    The right branch starts at ``x_D`` with ``P = P_D`` (default: the last
    layer's decay constant; a node if ``d.right_wall``) and runs leftward;
    the left branch starts at ``x_C`` decaying with ``alpha_C`` (or a node at
    a wall) and runs rightward.  They meet at ``match_index`` (default: the
    discretization's match edge).  The quantization function is
    ``J = 1 + mismatch / pi`` with ``mismatch`` the left-minus-right angle
    at the match edge.

    Raises ``StepTooCoarse`` when an allowed layer turns the phase by
    ``step_limit`` or more.
    """
    ksq = np.ascontiguousarray(d.kappa_sq, dtype=float)
    n = ksq.shape[0]
    h = d.h
    m = d.match_index if match_index is None else int(match_index)
    if not 0 < m < n:
        raise ValueError(f"match edge {m} must be interior to 0..{n}")

    u0, v0 = _tail(ksq[-1], d.right_wall, P_D)
    R_th, R_thr, R_psi, R_dpsi, R_log, scale, bad = _sweep(ksq, h, u0, v0, step_limit)
    u0, v0 = _tail(ksq[0], d.left_wall, alpha_C)
    mksq = np.ascontiguousarray(ksq[::-1])
    L_th, L_thr, L_psi, L_dpsi, L_log, _, bad_l = _sweep(mksq, h, u0, v0, step_limit)
    bad = max(bad, n - 1 - bad_l if bad_l >= 0 else -1)
    if bad >= 0:
        raise StepTooCoarse(
            f"layer {bad} turns the phase by {math.sqrt(ksq[bad]) * h:.3g} rad; refine the grid")

    # mirror the left branch back: x -> -x flips psi' and the angle
    L_theta = -L_thr[::-1]
    L_theta_right = -L_th[::-1]
    L_psi = L_psi[::-1]
    L_dpsi = -L_dpsi[::-1]
    L_log = L_log[::-1]

    # both angles re-expressed in the scale at the match edge itself
    s_m, s_e = scale[m], math.sqrt(scale[m - 1] * scale[m])
    at_edge = lambda th, u, v: th + _wrap(math.atan2(-v / s_e, u) - math.atan2(-v / s_m, u))  # noqa: E731
    mismatch = float(at_edge(L_theta_right[m], L_psi[m], L_dpsi[m])
                     - at_edge(R_thr[m], R_psi[m], R_dpsi[m]))
    theta = np.concatenate([L_theta[:m + 1], R_th[m + 1:] + mismatch])
    theta_right = np.concatenate([L_theta_right[:m + 1], R_thr[m + 1:] + mismatch])
    psi = np.concatenate([L_psi[:m + 1], R_psi[m + 1:]])
    dpsi = np.concatenate([L_dpsi[:m + 1], R_dpsi[m + 1:]])
    log_scale = np.concatenate([L_log[:m + 1], R_log[m + 1:]])
    with np.errstate(divide="ignore"):
        P = -dpsi / psi

    J = 1.0 + mismatch / math.pi
    total = math.pi * J
    kappa_sum = float(np.sum(np.sqrt(ksq[ksq > 0]))) * h
    nodes = count_half_turns(theta[0], theta[-1])
    return PhaseTrace(d.edges, P, theta, theta_right, psi, dpsi, log_scale, scale, m,
                      mismatch, total, float(J), kappa_sum, float(math.pi * J - kappa_sum), nodes)


def interface_jumps(trace: PhaseTrace) -> np.ndarray:
    """Per interior edge: angle in the right layer's scale minus the left layer's."""
    return trace.theta_right[1:-1] - trace.theta[1:-1]


def discrete_delta(trace: PhaseTrace, d: Discretization) -> float:
    """Sum of interface jumps over the allowed region.

    Each term is ``arctan(P_{i+1}/kappa_{i+1}) - arctan(P_{i+1}/kappa_i)`` for
    a pair of adjacent allowed layers, summed across the span from the first
    to the last allowed layer (forbidden gaps inside the span included).
    """
    allowed = np.nonzero(d.kappa_sq > 0)[0]
    if len(allowed) == 0:
        return 0.0
    first, last = allowed[0], allowed[-1]
    jumps = interface_jumps(trace)  # jumps[k] is at edge k+1, between layers k and k+1
    inner = jumps[first:last]
    forb = np.nonzero(d.kappa_sq[first:last + 1] <= 0)[0]
    if len(forb):
        # layers of a barrier inside the span turn the phase too
        turn = (trace.theta[1:] - trace.theta_right[:-1])[first:last + 1]
        return float(np.sum(inner) + np.sum(turn[forb]))
    return float(np.sum(inner))
