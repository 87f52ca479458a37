"""Reference values that do not depend on either phase engine.

* a Numerov shooting solver with Sturm node counting,
* the closed-form spectra and phase shifts of the solvable potentials,
* plain and Langer-corrected WKB levels,
* the published reference tables, read from ``data/tables.csv``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

import numba
import numpy as np
from scipy import optimize

from . import discretize as _disc
from .errors import NoCatalogEntry, NonConvergence, NoSuchBoundState
from .potential import Potential
from .quantize import find_level, langer_potential, semiclassical_action, spectrum_floor

FIXTURE_ENV = "QACTION_FIXTURES"


def fixture_dir() -> Path:
    env = os.environ.get(FIXTURE_ENV)
    return Path(env) if env else Path(__file__).with_name("data")


# ---------------------------------------------------------------- Numerov


@numba.njit(cache=True)
def _shoot(g0, w, E, h, u0, u1):
    """March u'' = (g0 - E w) u outward; return (sign changes, last value).

    Numerov in summed-difference form: with y = (1 - h^2 g / 12) u the
    scheme is y[i+1] - y[i] = y[i] - y[i-1] + h^2 g[i] u[i].  Carrying the
    first difference keeps rounding error from growing like N^2.
    """
    n = g0.shape[0]
    c = h * h / 12.0
    h2 = h * h
    g_prev = g0[0] - E * w[0]
    g_cur = g0[1] - E * w[1]
    y_prev = (1.0 - c * g_prev) * u0
    y_cur = (1.0 - c * g_cur) * u1
    dy = y_cur - y_prev
    u = u1
    nodes = 0
    for i in range(1, n - 1):
        dy += h2 * g_cur * u
        y_cur += dy
        g_cur = g0[i + 1] - E * w[i + 1]
        if c * g_cur > 0.5:
            # deep in a forbidden region the grid no longer resolves the
            # decay; the solution only grows from here, with no more nodes
            break
        un = y_cur / (1.0 - c * g_cur)
        if (un < 0.0) != (u < 0.0) and i + 1 < n - 1:
            nodes += 1
        u = un
        a = abs(u)
        if a > 1e150:
            y_cur /= a
            dy /= a
            u /= a
    return nodes, u


@dataclass(frozen=True)
class _Grid:
    coord: np.ndarray
    g0: np.ndarray
    w: np.ndarray
    h: float
    u0: float
    u1: float
    end_dirichlet: bool


def _grid(p: Potential, lo: float, hi: float, points: int, log: bool) -> _Grid:
    c = 2.0 * p.mass / p.hbar**2
    if log:
        # r = e^t, psi = e^(t/2) u:  u'' = [r^2 c (V - E) + (l + 1/2)^2] u
        t = np.linspace(math.log(lo), math.log(hi), points + 1)
        r = np.exp(t)
        base = p.with_l(0) if p.radial else p
        v = base.eval_array(r)
        nu = p.l + 0.5
        g0 = r * r * c * v + nu * nu
        w = c * r * r
        h = t[1] - t[0]
        # regular solution near the origin behaves as r^(l+1), i.e. u ~ e^(nu t)
        return _Grid(t, g0, w, h, math.exp(nu * (t[0] - t[1])), 1.0, True)
    x = np.linspace(lo, hi, points + 1)
    with np.errstate(invalid="ignore"):
        v = p.eval_array(x)
    v[~np.isfinite(v)] = 0.0  # only at Dirichlet ends, where u = 0
    return _Grid(x, c * v, np.full_like(x, c), x[1] - x[0], 0.0, 1.0, True)


def _count(grid: _Grid, E: float):
    return _shoot(grid.g0, grid.w, E, grid.h, grid.u0, grid.u1)


def _domain(p: Potential, E: float, budget: float):
    """(lo, hi, log) covering the bound states below E with decay ``budget``."""
    use_log = p.radial or p.singular_origin
    if use_log:
        span = _disc.make_span(p, E, budget) if not p.singular_origin else None
        if span is None:
            _, right, _, _, _ = _disc.allowed_span_edges(p, E)
            hi = _disc._march(_disc._alpha(p, E), right, budget, +1, first_step=0.05 * right)
        else:
            hi = span.x_D
        return 1e-10, hi, True
    span = _disc.make_span(p, E, budget)
    lo = span.x_C
    hi = span.x_D
    if p.symmetric and p.walls == (None, None):
        r = max(-lo, hi)
        lo, hi = -r, r
    return lo, hi, False


def numerov_eigenvalue(p: Potential, n: int, *, points: int = 4000, tol: float = 1e-9,
                       max_doublings: int = 10, decay_budget: float = 30.0) -> float:
    """Level n of the Numerov discretization, converged by grid doubling.

    Full-line and walled problems use a uniform grid with psi = 0 at both
    ends (the truncation points sit ``decay_budget`` e-folds into the
    forbidden region).  Radial and singular problems use ``r = e^t`` so that
    the behaviour at the origin is resolved.  Each level is isolated by
    bisection on the node count of the outward solution (Sturm), then
    refined by Brent's method on the end value.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    floor = spectrum_floor(p)
    ceiling = p.threshold
    # an energy with more than n levels below it
    E_hi = None
    E = floor + 1.0 if ceiling is None else floor + 0.5 * (ceiling - floor)
    span_E = None
    for _ in range(200):
        lo, hi, log = _domain(p, E, decay_budget)
        nodes, _ = _count(_grid(p, lo, hi, points, log), E)
        if nodes > n:
            E_hi, span_E = E, (lo, hi, log)
            break
        if ceiling is None:
            E = floor + 2.0 * (E - floor)
        else:
            if ceiling - E < 1e-12 * max(1.0, abs(ceiling)):
                break
            E = E + 0.5 * (ceiling - E)
    if E_hi is None:
        raise NoSuchBoundState(f"fewer than {n + 1} bound levels")

    prev = None
    N = points
    for _ in range(max_doublings):
        grid = _grid(p, *span_E[:2], N, span_E[2])
        value = _level(grid, n, floor, E_hi)
        if prev is not None and abs(value - prev) < tol:
            return value
        prev = value
        N *= 2
    raise NonConvergence(f"Numerov level {n} still moves by {abs(value - prev):.3g} after doubling")


def _level(grid: _Grid, n: int, lo: float, hi: float) -> float:
    # shrink [lo, hi] until exactly level n lies inside
    while True:
        nlo = _count(grid, lo)[0]
        if nlo <= n:
            break
        lo = lo - (hi - lo)
    if _count(grid, hi)[0] <= n:
        raise NoSuchBoundState(f"level {n} not below {hi} on this grid")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        c = _count(grid, mid)[0]
        if c <= n:
            lo = mid
            if c == n and _count(grid, hi)[0] == n + 1:
                break
        else:
            hi = mid
            if c == n + 1 and _count(grid, lo)[0] == n:
                break
    return optimize.brentq(lambda E: _count(grid, E)[1], lo, hi, xtol=1e-15 * max(1.0, abs(lo)),
                           rtol=4 * np.finfo(float).eps, maxiter=300)


# ------------------------------------------------------ analytic catalog


@dataclass(frozen=True)
class AnalyticSpectrum:
    tag: str
    formula: str
    energy: object
    delta: object
    needs_l: bool

    def __call__(self, n: int, l: int = 0, **params):
        return self.energy(n, l, **params)


def _well(n, l, L=1.0, mass=1.0, hbar=1.0):
    return (n + 1) ** 2 * math.pi**2 * hbar**2 / (2.0 * mass * L * L)


def _osc(n, l, omega=1.0, mass=1.0, hbar=1.0):
    return hbar * omega * (n + 0.5)


def _osc3(n, l, omega=1.0, mass=1.0, hbar=1.0):
    return hbar * omega * (2 * n + l + 1.5)


def _coul1(n, l, Z=1.0, mass=1.0, hbar=1.0):
    # n counts nodes on x > 0; the conventional label is n + 1
    return -mass * Z * Z / (2.0 * hbar**2 * (n + 1) ** 2)


def _coul3(n, l, Z=1.0, mass=1.0, hbar=1.0):
    N = n + l + 1
    return -mass * Z * Z / (2.0 * hbar**2 * N * N)


CATALOG = {
    "infinite_well": AnalyticSpectrum("infinite_well", "(n+1)^2 pi^2 hbar^2 / (2 m L^2)", _well,
                                      lambda n, l: 0.0, False),
    "harmonic_1d": AnalyticSpectrum("harmonic_1d", "hbar omega (n + 1/2)", _osc,
                                    lambda n, l: 0.5 * math.pi, False),
    "harmonic_radial": AnalyticSpectrum(
        "harmonic_radial", "hbar omega (2n + l + 3/2)", _osc3,
        lambda n, l: (2.0 * math.sqrt(l * (l + 1)) - (2 * l - 1)) * math.pi / 4.0, True),
    "coulomb_1d": AnalyticSpectrum("coulomb_1d", "-m Z^2 / (2 hbar^2 (n+1)^2)", _coul1,
                                   lambda n, l: math.pi, False),
    "coulomb_radial": AnalyticSpectrum(
        "coulomb_radial", "-m Z^2 / (2 hbar^2 N^2), N = n + l + 1", _coul3,
        lambda n, l: (math.sqrt(l * (l + 1)) - l) * math.pi, True),
}


def _entry(tag: str) -> AnalyticSpectrum:
    key = tag.split(":", 1)[1] if tag.startswith("builtin:") else tag
    try:
        return CATALOG[key]
    except KeyError:
        raise NoCatalogEntry(f"no closed-form spectrum for {tag!r}") from None


def analytic_eigenvalue(tag, n: int, l: int = 0, **params) -> float:
    """Closed-form level n; ``tag`` is a catalog name or a builtin Potential."""
    if isinstance(tag, Potential):
        p = tag
        return _entry(p.name)(n, p.l, mass=p.mass, hbar=p.hbar, **p.params)
    return _entry(tag)(n, l, **params)


def analytic_delta(tag, n: int, l: int = 0) -> float:
    """Closed-form phase shift delta(n, l) of the solvable potentials."""
    if isinstance(tag, Potential):
        tag, l = tag.name, tag.l
    return float(_entry(tag).delta(n, l))


# ------------------------------------------------------------------- WKB


def wkb_eigenvalue(p: Potential, n: int, langer: bool = False) -> float:
    """Solve ``integral kappa = (n + 1/2) pi`` over the allowed span.

    With ``langer`` the centrifugal coefficient l(l+1) becomes (l + 1/2)^2
    first (radial potentials only).
    """
    q = langer_potential(p) if langer else p
    floor = spectrum_floor(q)
    ceiling = q.threshold
    target = n + 0.5
    start = floor + 0.5 * (ceiling - floor) if ceiling is not None else floor + max(1.0, abs(floor))

    def f(E):
        return semiclassical_action(q, E)

    lo, hi = find_level(f, target, start, floor, ceiling)
    return optimize.brentq(lambda E: f(E) - target, lo, hi, xtol=1e-15 * max(1.0, abs(lo)),
                           rtol=4 * np.finfo(float).eps, maxiter=200)


# -------------------------------------------------------------- fixtures


@dataclass(frozen=True)
class TableRow:
    n: int
    E_exact: str
    E_present: str
    E_third: str
    anomaly: str = ""

    @property
    def exact(self) -> float:
        return float(self.E_exact)

    @property
    def present(self) -> float:
        return float(self.E_present)

    @property
    def decimals(self) -> int:
        return -Decimal(self.E_present).as_tuple().exponent


@dataclass(frozen=True)
class TableFixture:
    table_id: str
    third_label: str
    rows: tuple
    config_path: Path

    def row(self, n: int) -> TableRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)


def available_tables(directory: Path | None = None) -> list[str]:
    path = (directory or fixture_dir()) / "tables.csv"
    if not path.exists():
        return []
    return sorted({row["table"] for row in _read(path)})


def _read(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    header = ["table", "n", "E_exact", "E_present", "E_third", "third_label", "anomaly"]
    return list(csv.DictReader(lines, fieldnames=header))


def load_table(table_id: str, directory: Path | None = None) -> TableFixture:
    """Rows of a reference table, energies kept as the printed strings.

    Raises ``FileNotFoundError`` when the fixture directory lacks the data
    and ``KeyError`` for an unknown table id.
    """
    directory = directory or fixture_dir()
    path = directory / "tables.csv"
    if not path.exists():
        raise FileNotFoundError(f"fixture file {path} not found")
    rows = [r for r in _read(path) if r["table"] == table_id]
    if not rows:
        raise KeyError(f"unknown table {table_id!r}")
    label = rows[0]["third_label"]
    out = tuple(TableRow(int(r["n"]), r["E_exact"], r["E_present"], r["E_third"],
                         (r.get("anomaly") or "").strip()) for r in rows)
    return TableFixture(table_id, label, tuple(sorted(out, key=lambda r: r.n)),
                        directory / f"{table_id}.conf")
