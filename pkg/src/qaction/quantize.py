"""The action variable J(E) and the eigenvalue condition J(E) = n + 1.

``J`` is ``1 + mismatch / pi`` where ``mismatch`` is the angle between the
solution decaying into the left tail and the one decaying into the right
tail, measured at a fixed interior edge.  It equals the allowed-region phase
``integral kappa + delta`` divided by pi, is smooth and increasing in E, and
takes integer values exactly at the eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from . import discretize as _disc
from . import phaseflow, tmatrix
from .errors import (MonotonicityViolation, NonConvergence, NoSuchBoundState, NoTurningPoints,
                     QActionError, ToleranceNotMet, UnboundedDirection)
from .potential import Potential

ENGINES = ("riccati", "tmatrix")
SHALLOW_MARGIN = 1e-6


@dataclass(frozen=True)
class SolveOptions:
    """Knobs shared by every engine.

    ``layers`` is the coarsest layer count of the tmatrix extrapolation
    (``layers``, ``2 layers``, ``4 layers``).  ``origin_eps`` is the radius of
    the wall replacing a singular origin; with ``eps_richardson`` the
    eigenvalue is extrapolated from ``origin_eps`` and ``origin_eps / 10``.
    """

    engine: str = "riccati"
    tol_J: float = 1e-10
    tol: float = phaseflow.DEFAULT_TOL
    layers: int = 16000
    decay_budget: float = _disc.DEFAULT_DECAY_BUDGET
    origin_eps: float = _disc.DEFAULT_ORIGIN_EPS
    eps_richardson: bool = True
    scan_points: int = _disc.DEFAULT_SCAN_POINTS
    e_max: float | None = None

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}; choose from {', '.join(ENGINES)}")
        if self.layers < 16:
            raise ValueError("layers must be at least 16")


@dataclass(frozen=True)
class ActionPoint:
    E: float
    J: float
    delta: float
    node_count: int
    kappa_integral: float


@dataclass(frozen=True)
class ActionCurve:
    samples: tuple
    engine: str
    tol: float
    monotone: bool

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.E for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s.J for s in self.samples])


@dataclass(frozen=True)
class Eigensolution:
    """One bound level.

    ``n`` counts nodes; ``label`` is the conventional quantum number, which
    is ``n + 1`` when psi is pinned to zero at a singular origin (1D Coulomb).
    ``J`` and ``delta`` include the pi of that origin node in that case.
    """

    n: int
    E: float
    delta: float
    node_count: int
    engine: str
    J: float
    label: int
    diagnostics: dict = field(default_factory=dict, compare=False)
    wavefunction: object = field(default=None, repr=False, compare=False)


class Spectrum(list):
    """Eigensolutions by n, plus the levels that failed (``failures[n] = message``)."""

    def __init__(self, levels=(), failures=None):
        super().__init__(levels)
        self.failures = dict(failures or {})


def potential_minimum(p: Potential) -> tuple[float, float]:
    """(x, V) at the global minimum, from a dense scan plus bounded refinement."""
    lw, rw = p.walls
    if lw is not None and rw is not None:
        xs = np.linspace(lw, rw, 20001)[1:-1]
    elif p.radial or lw is not None:
        base = lw if lw is not None else 0.0
        xs = base + np.geomspace(1e-6, 1e4, 40001)
    else:
        xs = np.concatenate([-np.geomspace(1e4, 1e-6, 20001), [0.0], np.geomspace(1e-6, 1e4, 20001)])
    with np.errstate(all="ignore"):
        v = p.eval_array(xs)
    v = np.where(np.isfinite(v), v, np.inf)
    i = int(np.argmin(v))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if b > a:
        res = optimize.minimize_scalar(p.eval, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, abs(xs[i]))})
        if res.fun < v[i]:
            return float(res.x), float(res.fun)
    return float(xs[i]), float(v[i])


def spectrum_floor(p: Potential) -> float:
    """An energy below every bound level of p."""
    if p.singular_origin:
        # V is unbounded below; with psi(0) = 0 the Hardy inequality bounds
        # the spectrum below by the minimum of V + hbar^2 / (8 m x^2)
        xs = np.geomspace(1e-8, 1e4, 20001)
        return float(np.min(p.eval_array(xs) + p.hbar**2 / (8.0 * p.mass * xs * xs)))
    return potential_minimum(p)[1]


def _allowed(p: Potential, span: _disc.Span):
    left = 0.0 if p.singular_origin and span.left_is_wall else span.left
    return left, span.right


class _Evaluator:
    """J(E) for one potential, engine and (optionally frozen) span."""

    def __init__(self, p: Potential, opts: SolveOptions, span: _disc.Span | None = None,
                 origin_eps: float | None = None, layers: int | None = None):
        self.p = p
        self.opts = opts
        self.span = span
        self.eps = opts.origin_eps if origin_eps is None else origin_eps
        # a fixed layer count switches the tmatrix engine off extrapolation
        self.layers = layers

    def span_at(self, E):
        if self.span is not None:
            return self.span
        return _disc.make_span(self.p, E, self.opts.decay_budget, origin_eps=self.eps,
                               scan_points=self.opts.scan_points)

    def __call__(self, E: float, *, keep_trace: bool = False):
        p, opts = self.p, self.opts
        sp = self.span_at(E)
        if self.span is not None:
            # turning points move with E even when the truncation is frozen
            edges = _disc.allowed_span_edges(p, E, origin_eps=self.eps, scan_points=opts.scan_points)
            sp = replace(sp, left=edges[0], right=edges[1], left_is_wall=edges[2],
                         right_is_wall=edges[3], turning_points=edges[4])
        left, right = _allowed(p, sp)
        singular = p.singular_origin and sp.left_is_wall
        kint = phaseflow.kappa_integral(p, E, sp.turning_points, left, right, singular_left=singular)
        if opts.engine == "riccati":
            d = self._layers(sp, E, 16)
            xm = sp.x_match if math.isfinite(sp.x_match) else None
            tr = phaseflow.integrate_phase(p, E, d, opts.tol, allowed_span=(left, right),
                                           singular_left=singular, dense=keep_trace, x_match=xm)
            J, nodes = tr.J, tr.node_count
        elif self.layers is not None:
            tr = tmatrix.propagate_logderivative(self._layers(sp, E, self.layers))
            J, nodes = tr.J, tr.node_count
        else:
            Js, tr = [], None
            for k in range(3):
                d = self._layers(sp, E, opts.layers * 2**k)
                tr = tmatrix.propagate_logderivative(d)
                Js.append(tr.J)
            h = np.array([(sp.x_D - sp.x_C) / (opts.layers * 2**k) for k in range(3)])
            J = extrapolate(h, np.array(Js), singular=p.singular_origin)
            nodes = tr.node_count
        point = ActionPoint(float(E), float(J), float(math.pi * J - kint), int(nodes), float(kint))
        return (point, tr) if keep_trace else point

    def _layers(self, sp, E, count):
        return _disc.build_layers(self.p, E, sp.x_C, sp.x_D, count, left_wall=sp.left_bc_wall,
                                  right_wall=sp.right_bc_wall, turning_points=sp.turning_points,
                                  x_match=sp.x_match)


def extrapolate(h: np.ndarray, values: np.ndarray, *, singular: bool = False) -> float:
    """Limit h -> 0 of three samples at h, h/2, h/4.

    Smooth potentials sampled at layer midpoints have errors in even powers
    of h, so the basis is (1, h^2, h^4).  A 1/x singularity at an edge adds an
    ``h^2 log h`` term, and the basis becomes (1, h^2, h^2 log h).
    """
    h = np.asarray(h, dtype=float)
    if singular:
        A = np.column_stack([np.ones(3), h**2, h**2 * np.log(h)])
    else:
        A = np.column_stack([np.ones(3), h**2, h**4])
    return float(np.linalg.solve(A, np.asarray(values, dtype=float))[0])


def _origin_shift(p: Potential) -> int:
    return 1 if p.origin_node else 0


def action(p: Potential, E: float, opts: SolveOptions | None = None) -> float:
    """J(E), the phase accumulated over the allowed span divided by pi.

    For the 1D Coulomb problem the node that psi has at x = 0 adds one.
    """
    opts = opts or SolveOptions()
    return _Evaluator(p, opts)(E).J + _origin_shift(p)


def action_point(p: Potential, E: float, opts: SolveOptions | None = None) -> ActionPoint:
    opts = opts or SolveOptions()
    pt = _Evaluator(p, opts)(E)
    k = _origin_shift(p)
    return replace(pt, J=pt.J + k, delta=pt.delta + k * math.pi)


def scan(p: Potential, energies, opts: SolveOptions | None = None, *,
         noise: float = 1e-9, strict: bool = True) -> ActionCurve:
    """Sample J on ``energies`` (sorted ascending).

    Raises ``MonotonicityViolation`` when ``strict`` and J drops by more than
    ``noise`` between consecutive samples.
    """
    opts = opts or SolveOptions()
    energies = sorted(float(e) for e in energies)
    pts = tuple(action_point(p, E, opts) for E in energies)
    J = np.array([s.J for s in pts])
    monotone = bool(np.all(np.diff(J) > -noise))
    if strict and not monotone:
        i = int(np.argmin(np.diff(J)))
        raise MonotonicityViolation(
            f"J decreases from {J[i]!r} to {J[i + 1]!r} between E = {energies[i]} and {energies[i + 1]}")
    return ActionCurve(pts, opts.engine, opts.tol if opts.engine == "riccati" else 0.0, monotone)


def semiclassical_action(p: Potential, E: float, *, origin_eps: float = _disc.DEFAULT_ORIGIN_EPS) -> float:
    """Integral of kappa over the allowed span at E, divided by pi."""
    left, right, lwall, rwall, tps = _disc.allowed_span_edges(p, E, origin_eps=origin_eps)
    singular = p.singular_origin and lwall
    if singular:
        left = 0.0
    return phaseflow.kappa_integral(p, E, tps, left, right, singular_left=singular) / math.pi


def find_level(f, target: float, guess: float, floor: float, ceiling: float | None):
    """Bracket the root of the increasing function ``f(E) = target`` above ``floor``.

    Steps away from ``guess``, bisecting toward ``floor`` or ``ceiling``
    instead of crossing them.  Returns ``(lo, hi)`` with ``f(lo) < target <=
    f(hi)``; raises ``NoSuchBoundState`` when ``f`` stays below ``target`` all
    the way up to ``ceiling``.
    """
    lo = hi = None
    E = guess
    # the guess is usually semiclassical and close, so start with small steps
    gap = abs(guess - floor)
    if ceiling is not None:
        # shallow levels: stay well clear of the threshold, where spans explode
        gap = min(gap, abs(ceiling - guess))
    step = 0.02 * gap if gap > 0 else 1e-3
    for _ in range(200):
        try:
            below = f(E) < target
        except (NoTurningPoints, UnboundedDirection):
            # so deep that the allowed region is not resolved by the scan
            below = True
        if below:
            lo = E
            if hi is not None:
                return lo, hi
            nxt = E + step
            if ceiling is not None and nxt >= ceiling:
                if ceiling - E < 1e-13 * max(1.0, abs(ceiling)):
                    raise NoSuchBoundState(f"action stays below {target} up to the threshold {ceiling}")
                nxt = E + 0.5 * (ceiling - E)
            step *= 2.0
        else:
            hi = E
            if lo is not None:
                return lo, hi
            nxt = max(E - step, floor + 0.5 * (E - floor))
            step *= 2.0
        E = nxt
    raise NonConvergence(f"could not bracket the level with J = {target}")


def _refine(f, target, lo, hi, xtol):
    root = optimize.brentq(lambda E: f(E) - target, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                           maxiter=200)
    return root


def _wkb_guess(p: Potential, n: int, floor: float, ceiling: float | None, eps: float) -> float:
    target = n + 0.5
    lo, hi = find_level(lambda E: semiclassical_action(p, E, origin_eps=eps), target,
                        _start_energy(p, floor, ceiling), floor, ceiling)
    try:
        return _refine(lambda E: semiclassical_action(p, E, origin_eps=eps), target, lo, hi, 1e-6)
    except ValueError:
        return 0.5 * (lo + hi)


def _start_energy(p, floor, ceiling):
    if ceiling is not None:
        return floor + 0.5 * (ceiling - floor)
    return floor + max(1.0, abs(floor))


def _root(ev: _Evaluator, target: float, lo: float, hi: float, floor: float, ceiling):
    f = lambda E: ev(E).J  # noqa: E731
    for _ in range(10):
        # a bracket end sitting on the root can flip sign under another grid
        below, above = f(lo) <= target, f(hi) >= target
        if below and above:
            break
        width = hi - lo
        if not below:
            lo = max(lo - width, floor + 0.5 * (lo - floor))
        if not above:
            hi = hi + width if ceiling is None else min(hi + width, hi + 0.5 * (ceiling - hi))
    else:
        raise NonConvergence(f"bracket [{lo}, {hi}] lost its sign change")
    return _refine(f, target, lo, hi, 1e-15 * max(1.0, abs(lo)))


def _solve_at_eps(p: Potential, n: int, opts: SolveOptions, eps: float, floor: float):
    """(E, ActionPoint, trace, evaluator, residual of J at the root) for one radius."""
    ceiling = p.threshold if p.threshold is not None else opts.e_max
    try:
        guess = _wkb_guess(p, n, floor, ceiling, eps)
    except (NoSuchBoundState, NonConvergence):
        guess = _start_energy(p, floor, ceiling)
    if ceiling is not None and guess >= ceiling:
        guess = floor + 0.99 * (ceiling - floor)
    target = n + 1.0
    if opts.engine == "riccati":
        free = _Evaluator(p, opts, origin_eps=eps)
        lo, hi = find_level(lambda E: free(E).J, target, guess, floor, ceiling)
        # freeze the truncation at the upper end so J is smooth across the bracket
        fixed = _Evaluator(p, opts, free.span_at(hi), origin_eps=eps)
        E = _root(fixed, target, lo, hi, floor, ceiling)
        pt, trace = fixed(E, keep_trace=True)
        return E, pt, trace, fixed, abs(pt.J - target)

    # tmatrix: solve on each grid, then extrapolate the eigenvalue in h
    counts = [opts.layers * 2**k for k in range(3)]
    free = _Evaluator(p, opts, origin_eps=eps, layers=counts[-1])
    lo, hi = find_level(lambda E: free(E).J, target, guess, floor, ceiling)
    span = free.span_at(hi)
    roots = []
    for count in counts:
        ev = _Evaluator(p, opts, span, origin_eps=eps, layers=count)
        roots.append(_root(ev, target, lo, hi, floor, ceiling))
    h = np.array([(span.x_D - span.x_C) / c for c in counts])
    E = extrapolate(h, np.array(roots), singular=p.singular_origin)
    pt, trace = ev(roots[-1], keep_trace=True)
    residual = abs(pt.J - target)
    fixed = _Evaluator(p, opts, span, origin_eps=eps)
    J = fixed(E).J
    kint = pt.kappa_integral
    return E, ActionPoint(E, J, math.pi * J - kint, pt.node_count, kint), trace, fixed, residual


def solve_eigenvalue(p: Potential, n: int, opts: SolveOptions | None = None, *,
                     wavefunction_samples=None) -> Eigensolution:
    """E with J(E) = n + 1, n counting the interior nodes of psi.

    The tmatrix engine solves on ``layers``, ``2 layers`` and ``4 layers``
    and extrapolates the three eigenvalues to zero layer width.  For a
    singular origin the eigenvalue is further extrapolated linearly in the
    regularization radius from eps and eps/10.
    """
    opts = opts or SolveOptions()
    if n < 0:
        raise ValueError("n must be nonnegative")
    floor = spectrum_floor(p)
    E, pt, trace, ev, residual = _solve_at_eps(p, n, opts, opts.origin_eps, floor)
    diag = {"residual_J": residual, "origin_eps": None}
    if opts.engine == "riccati":
        diag["tol"] = opts.tol
    else:
        diag["layers"] = opts.layers * 4
        diag["h"] = float(trace.x[1] - trace.x[0])
    if p.singular_origin and opts.eps_richardson:
        eps2 = opts.origin_eps / 10.0
        E2, pt2, trace, ev, residual = _solve_at_eps(p, n, opts, eps2, floor)
        E_lin = E2 + (E2 - E) / 9.0
        diag.update(origin_eps=opts.origin_eps, E_eps=E, E_eps10=E2,
                    residual_J=max(residual, diag["residual_J"]))
        E = E_lin
        # delta at the extrapolated energy, with the kappa integral from the origin
        kint = semiclassical_action(p, E, origin_eps=eps2) * math.pi
        pt = ActionPoint(E, float(n + 1), math.pi * (n + 1) - kint, pt2.node_count, kint)
    elif p.singular_origin:
        diag["origin_eps"] = opts.origin_eps
    if diag["residual_J"] > opts.tol_J:
        raise ToleranceNotMet(f"|J(E) - {n + 1}| = {diag['residual_J']:.2e} exceeds tol_J = {opts.tol_J:g}")
    if pt.node_count != n:
        raise NonConvergence(f"level with J = {n + 1} has {pt.node_count} nodes, expected {n}")
    if p.threshold is not None and p.threshold - E < SHALLOW_MARGIN:
        diag["shallow_state"] = True
    k = _origin_shift(p)
    wf = None
    if wavefunction_samples is not None:
        wf = wavefunction(p, E, wavefunction_samples, opts, span=ev.span, origin_eps=ev.eps)
    return Eigensolution(n, float(E), float(pt.delta + k * math.pi), pt.node_count, opts.engine,
                         float(pt.J + k), n + k, diag, wf)


def wavefunction(p: Potential, E: float, samples, opts: SolveOptions | None = None, *,
                 span=None, origin_eps=None, tol_phase: float = 1e-6):
    """Normalized psi at ``samples`` for an eigenvalue E (continuum engine)."""
    opts = opts or SolveOptions()
    ev = _Evaluator(p, replace(opts, engine="riccati"), span, origin_eps=origin_eps)
    _, tr = ev(E, keep_trace=True)
    return phaseflow.reconstruct_wavefunction(tr, samples, tol_phase=tol_phase)


def eigenfunction(p: Potential, n: int, opts: SolveOptions | None = None, *,
                  points: int = 201) -> Eigensolution:
    """Level n with psi sampled at ``points`` equally spaced positions over the span."""
    opts = opts or SolveOptions()
    if points < 2:
        raise ValueError("points must be at least 2")
    sol = solve_eigenvalue(p, n, opts)
    eps = opts.origin_eps / 10.0 if p.singular_origin and opts.eps_richardson else opts.origin_eps
    ev = _Evaluator(p, replace(opts, engine="riccati"), origin_eps=eps)
    sp = ev.span_at(sol.E)
    xs = np.linspace(sp.x_C, sp.x_D, points)
    wf = wavefunction(p, sol.E, xs, opts, span=sp, origin_eps=eps)
    return replace(sol, wavefunction=wf)


def solve_spectrum(p: Potential, n_max: int, opts: SolveOptions | None = None) -> Spectrum:
    """Levels 0..n_max; a failing level is recorded, not raised."""
    opts = opts or SolveOptions()
    levels, failures = [], {}
    for n in range(n_max + 1):
        try:
            levels.append(solve_eigenvalue(p, n, opts))
        except NoSuchBoundState as exc:
            failures[n] = f"BoundStateCountExceeded: {exc}"
            break
        except QActionError as exc:
            failures[n] = f"{type(exc).__name__}: {exc}"
    for a, b in zip(levels, levels[1:]):
        if not b.E > a.E:
            raise MonotonicityViolation(f"levels {a.n} and {b.n} are not increasing")
    return Spectrum(levels, failures)


def langer_residuals(p: Potential, n: int, E: float, opts: SolveOptions | None = None):
    """Both quantization residuals at E, in units of pi.

    Returns ``(J(E) - (n + 1), I_langer(E) - (n + 1/2))`` where ``I_langer`` is
    the kappa integral over pi for the potential with l(l+1) replaced by
    (l + 1/2)**2.
    """
    opts = opts or SolveOptions()
    exact = action(p, E, opts) - (n + 1)
    pl = langer_potential(p)
    return exact, semiclassical_action(pl, E) - (n + 0.5)


def langer_potential(p: Potential) -> Potential:
    """V with the centrifugal coefficient l(l+1) replaced by (l + 1/2)**2."""
    if not p.radial:
        raise ValueError("the Langer replacement needs a radial potential")
    l = p.l
    return p.with_centrifugal((l + 0.5) ** 2 * p.hbar**2 / (2.0 * p.mass))


__all__ = [
    "ENGINES", "SolveOptions", "ActionPoint", "ActionCurve", "Eigensolution", "Spectrum",
    "action", "action_point", "scan", "solve_eigenvalue", "eigenfunction", "solve_spectrum", "wavefunction",
    "semiclassical_action", "find_level", "extrapolate", "langer_residuals", "langer_potential",
    "potential_minimum", "spectrum_floor",
]
