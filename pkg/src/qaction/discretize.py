"""Turning points, truncation of the domain, and the uniform layer grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import BracketTooNarrow, NoTurningPoints, UnboundedDirection
from .potential import Potential

DEFAULT_DECAY_BUDGET = 20.0
DEFAULT_SCAN_POINTS = 10_000
DEFAULT_TOL_ROOT = 1e-12
DEFAULT_ORIGIN_EPS = 1e-8


@dataclass(frozen=True)
class Discretization:
    """Uniform layering of ``[x_C, x_D]`` at trial energy ``E``.

    ``kappa_sq[j]`` is ``2 m (E - V) / hbar**2`` at the midpoint of layer j;
    it is negative in classically forbidden layers.  ``left_wall`` and
    ``right_wall`` flag hard edges where psi vanishes.
    """

    x_C: float
    x_D: float
    layer_count: int
    kappa_sq: np.ndarray = field(repr=False)
    turning_points: tuple
    E: float
    left_wall: bool = False
    right_wall: bool = False
    match_index: int = -1

    @property
    def x_match(self) -> float:
        return self.x_C + self.h * self.match_index

    @property
    def h(self) -> float:
        return (self.x_D - self.x_C) / self.layer_count

    @property
    def edges(self) -> np.ndarray:
        return self.x_C + self.h * np.arange(self.layer_count + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.x_C + self.h * (np.arange(self.layer_count) + 0.5)


@dataclass(frozen=True)
class Span:
    """Classically allowed span at energy E plus the truncated domain.

    ``left``/``right`` bound the span from the smallest to the biggest
    turning point; a hard wall replaces a turning point when V < E right up
    to the wall.  ``x_C``/``x_D`` are the truncation points.
    """

    left: float
    right: float
    left_is_wall: bool
    right_is_wall: bool
    x_C: float
    x_D: float
    turning_points: tuple
    left_bc_wall: bool = False
    right_bc_wall: bool = False
    x_match: float = math.nan


def _alpha(p: Potential, E: float):
    c = 2.0 * p.mass / p.hbar**2

    def alpha(x):
        d = p.eval(x) - E
        return math.sqrt(c * d) if d > 0.0 else 0.0

    return alpha


def _sign_changes(p, E, lo, hi, scan_points):
    xs = np.linspace(lo, hi, int(scan_points) + 1)
    with np.errstate(invalid="ignore"):
        f = p.eval_array(xs) - E
    # V = E exactly on a grid point counts as forbidden, so the root is
    # still seen as one sign change
    s = np.where(f >= 0, 1, np.where(f < 0, -1, 0))
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return xs, f, idx


def locate_turning_points(p: Potential, E: float, bracket=None, *,
                          scan_points: int = DEFAULT_SCAN_POINTS,
                          tol_root: float = DEFAULT_TOL_ROOT) -> list[float]:
    """Sorted positions in ``bracket`` where V(x) = E.

    Sign changes of V - E are found on a uniform scan grid and each is
    refined by a bracketing root solve.  Raises ``NoTurningPoints`` when V - E
    never changes sign.
    """
    if bracket is None:
        bracket = search_bracket(p, E)
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise BracketTooNarrow(f"empty bracket [{lo}, {hi}]")
    xs, f, idx = _sign_changes(p, E, lo, hi, scan_points)
    if len(idx) == 0:
        raise NoTurningPoints(f"V(x) - E has no sign change on [{lo}, {hi}] at E = {E}")
    roots = []
    for i in idx:
        a, b = xs[i], xs[i + 1]
        if not (np.isfinite(f[i]) and np.isfinite(f[i + 1])):
            # jump to infinity (wall) is not a turning point
            continue
        r = optimize.brentq(lambda x: p.eval(x) - E, a, b,
                            xtol=tol_root * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps)
        roots.append(r)
    if not roots:
        raise NoTurningPoints(f"no finite turning points on [{lo}, {hi}] at E = {E}")
    return sorted(roots)


def search_bracket(p: Potential, E: float, *, origin_eps: float = DEFAULT_ORIGIN_EPS,
                   scan_points: int = DEFAULT_SCAN_POINTS) -> tuple[float, float]:
    """An interval that contains the allowed region and whose open ends are forbidden."""
    lw, rw = _wall_positions(p, origin_eps)
    if p.radial and lw is None:
        lo = 1.0
        while not p.eval(lo) > E:
            lo *= 0.5
            if lo < 1e-300:
                raise UnboundedDirection("potential never exceeds E near the origin")
        hi = 2.0
    else:
        lo = lw if lw is not None else -1.0
        hi = rw if rw is not None else (lo + 2.0 if lw is not None else 1.0)
    for _ in range(200):
        lo_ok = lw is not None or p.eval(lo) > E
        hi_ok = rw is not None or p.eval(hi) > E
        if lo_ok and hi_ok:
            xs = np.linspace(lo, hi, int(scan_points) + 1)[1:-1]
            with np.errstate(invalid="ignore"):
                if np.any(p.eval_array(xs) < E):
                    return lo, hi
        width = hi - lo
        if lw is None and not (p.radial):
            lo -= width
        if rw is None:
            hi += width
        if width > 1e9 or (lw is not None and rw is not None):
            break
    if lo_ok and hi_ok:
        # both ends forbidden and nothing allowed in between
        raise NoTurningPoints(f"E = {E} lies below the potential minimum")
    raise UnboundedDirection(f"could not enclose the allowed region at E = {E}")


def allowed_span_edges(p: Potential, E: float, *, scan_points: int = DEFAULT_SCAN_POINTS,
                       tol_root: float = DEFAULT_TOL_ROOT, origin_eps: float = DEFAULT_ORIGIN_EPS):
    """(left, right, left_is_wall, right_is_wall, turning_points) at energy E."""
    lw, rw = _wall_positions(p, origin_eps)
    if lw is not None and rw is not None:
        lo, hi = lw, rw
    else:
        lo, hi = search_bracket(p, E, origin_eps=origin_eps, scan_points=scan_points)
    # keep the scan off the walls themselves, where V may be infinite
    scan_lo = lo if lw is None else lo + (hi - lo) * 1e-9
    scan_hi = hi if rw is None else hi - (hi - lo) * 1e-9
    try:
        tps = locate_turning_points(p, E, (scan_lo, scan_hi), scan_points=scan_points,
                                    tol_root=tol_root)
    except NoTurningPoints:
        tps = []
    left_is_wall = lw is not None and p.eval(scan_lo) < E
    right_is_wall = rw is not None and p.eval(scan_hi) < E
    if not tps and not (left_is_wall and right_is_wall):
        if left_is_wall or right_is_wall:
            raise NoTurningPoints(f"no turning point on the open side at E = {E}")
        raise NoTurningPoints(f"E = {E} lies below the potential minimum")
    left = lo if left_is_wall else tps[0]
    right = hi if right_is_wall else tps[-1]
    return left, right, left_is_wall, right_is_wall, tuple(tps)


def _march(alpha, start, budget, direction, radial_left=False, first_step=1.0):
    """Walk from ``start`` until the accumulated decay integral reaches ``budget``."""
    acc = 0.0
    a = start
    step = first_step
    for _ in range(400):
        if radial_left:
            b = a - step if a - step > 0.5 * a else 0.5 * a
        else:
            b = a + direction * step
        lo_, hi_ = (a, b) if b > a else (b, a)
        seg, _ = integrate.quad(alpha, lo_, hi_, limit=200, epsabs=1e-12, epsrel=1e-12)
        if acc + seg >= budget:
            need = budget - acc

            def g(x):
                l2, h2 = (a, x) if x > a else (x, a)
                return integrate.quad(alpha, l2, h2, limit=200, epsabs=1e-12, epsrel=1e-12)[0] - need

            return optimize.brentq(g, a, b, xtol=1e-12 * max(1.0, abs(b)))
        acc += seg
        a = b
        step *= 1.6
        if abs(a) > 1e9:
            break
    raise UnboundedDirection("decay budget never reached: no bound state at this energy")


def _wall_positions(p: Potential, origin_eps: float):
    lw, rw = p.walls
    if lw is not None and p.singular_origin:
        lw = lw + origin_eps
    return lw, rw


def truncate_domain(p: Potential, E: float, decay_budget: float = DEFAULT_DECAY_BUDGET, *,
                    span=None, origin_eps: float = DEFAULT_ORIGIN_EPS) -> tuple[float, float]:
    """Truncation points ``(x_C, x_D)`` for trial energy E.

    Each open side is cut where the forbidden-region decay integral of
    ``alpha = sqrt(2 m (V - E)) / hbar`` measured from the outermost turning
    point reaches ``decay_budget``.  Walls truncate exactly, and a wall that
    sits inside the forbidden region is used if the budget is not reached
    before it.
    """
    if span is None:
        span = allowed_span_edges(p, E, origin_eps=origin_eps)
    left, right, lwall, rwall, _ = span
    alpha = _alpha(p, E)
    width = right - left
    first = 0.05 * width if width > 0 else 0.1
    lw, rw = _wall_positions(p, origin_eps)

    if lwall:
        x_C = left
    else:
        x_C = _march_or_none(alpha, left, decay_budget, -1, first, p.radial)
        if lw is not None and (x_C is None or x_C < lw):
            x_C = lw
        elif x_C is None:
            raise UnboundedDirection(f"decay budget never reached to the left at E = {E}")
    if rwall:
        x_D = right
    else:
        x_D = _march_or_none(alpha, right, decay_budget, +1, first, False)
        if rw is not None and (x_D is None or x_D > rw):
            x_D = rw
        elif x_D is None:
            raise UnboundedDirection(f"decay budget never reached to the right at E = {E}")

    if p.symmetric and lw is None and rw is None:
        # keeps x = 0 on a layer edge for even layer counts
        r = max(-x_C, x_D)
        x_C, x_D = -r, r
    return x_C, x_D


def _march_or_none(alpha, start, budget, direction, first_step, radial):
    try:
        return _march(alpha, start, budget, direction, radial_left=radial and direction < 0,
                      first_step=first_step)
    except UnboundedDirection:
        return None


def make_span(p: Potential, E: float, decay_budget: float = DEFAULT_DECAY_BUDGET, *,
              origin_eps: float = DEFAULT_ORIGIN_EPS, scan_points: int = DEFAULT_SCAN_POINTS) -> Span:
    edges = allowed_span_edges(p, E, origin_eps=origin_eps, scan_points=scan_points)
    x_C, x_D = truncate_domain(p, E, decay_budget, span=edges, origin_eps=origin_eps)
    left, right, lwall, rwall, tps = edges
    lw, rw = _wall_positions(p, origin_eps)
    return Span(left, right, lwall, rwall, x_C, x_D, tps,
                left_bc_wall=lw is not None and x_C == lw,
                right_bc_wall=rw is not None and x_D == rw,
                x_match=match_point(p, left, right, lwall, rwall))


def match_point(p: Potential, left: float, right: float, left_is_wall: bool = False,
                right_is_wall: bool = False, grid_points: int = 2001) -> float:
    """Interior point where the two inward sweeps are joined.

    The deepest point of V inside the allowed span, keeping a tenth of the
    span clear of hard walls.  Being a property of V alone, it does not move
    with the trial energy.
    """
    width = right - left
    lo = left + (0.1 * width if left_is_wall else 0.0)
    hi = right - (0.1 * width if right_is_wall else 0.0)
    xs = np.linspace(lo, hi, grid_points)[1:-1]
    v = p.eval_array(xs)
    i = int(np.argmin(v))
    if v[i] == v.max():
        return 0.5 * (lo + hi)
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(p.eval, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-10 * max(1.0, abs(xs[i]))})
    x = float(res.x) if res.fun <= v[i] else float(xs[i])
    # round so the choice is stable against the scan grid moving with E
    return float(np.round(x, 6))


def build_layers(p: Potential, E: float, x_C: float, x_D: float, layer_count: int, *,
                 left_wall: bool = False, right_wall: bool = False,
                 turning_points=(), x_match: float | None = None) -> Discretization:
    """Sample ``kappa_sq`` at the midpoints of ``layer_count`` equal layers.

    ``x_match`` is snapped to the nearest interior layer edge (default: the
    middle edge).
    """
    if layer_count < 3:
        raise ValueError("layer_count must be at least 3")
    if not x_C < x_D:
        raise ValueError("need x_C < x_D")
    h = (x_D - x_C) / layer_count
    mids = x_C + h * (np.arange(layer_count) + 0.5)
    kappa_sq = 2.0 * p.mass * (E - p.eval_array(mids)) / p.hbar**2
    if x_match is None or not math.isfinite(x_match):
        m = layer_count // 2
    else:
        m = int(round((x_match - x_C) / h))
    m = min(max(m, 1), layer_count - 1)
    return Discretization(x_C, x_D, int(layer_count), kappa_sq, tuple(turning_points), float(E),
                          left_wall, right_wall, m)


def discretize(p: Potential, E: float, layer_count: int, decay_budget: float = DEFAULT_DECAY_BUDGET,
               *, origin_eps: float = DEFAULT_ORIGIN_EPS, span: Span | None = None) -> Discretization:
    """Turning points, truncation and layering in one call."""
    if span is None:
        span = make_span(p, E, decay_budget, origin_eps=origin_eps)
    return build_layers(p, E, span.x_C, span.x_D, layer_count, left_wall=span.left_bc_wall,
                        right_wall=span.right_bc_wall, turning_points=span.turning_points,
                        x_match=span.x_match)
