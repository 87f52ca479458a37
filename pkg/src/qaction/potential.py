"""Evaluatable potentials: the built-in catalog and parsed expressions.

Units follow the usual convention ``kappa^2 = 2 m (E - V) / hbar^2``; every
built-in is written so that ``m = hbar = 1`` reproduces the textbook forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import expr as _expr
from .errors import DomainError, InvalidParam, UnknownBuiltin

FULL_LINE = "full-line"
HALF_LINE_RADIAL = "half-line-radial"
HALF_LINE_WALL = "half-line-with-wall"
DOMAIN_KINDS = (FULL_LINE, HALF_LINE_RADIAL, HALF_LINE_WALL)

BUILTINS = (
    "infinite_well",
    "harmonic_1d",
    "harmonic_radial",
    "coulomb_1d",
    "coulomb_radial",
    "woods_saxon",
    "double_oscillator",
)


@dataclass(frozen=True)
class Potential:
    """An immutable one-dimensional (or radial) potential.

    ``walls`` holds the positions of impenetrable edges (``None`` for an open
    side).  ``threshold`` is the asymptotic value of V at the open edges, i.e.
    the upper end of the bound spectrum, or ``None`` when V is confining.
    ``singular_origin`` marks a left wall at x = 0 where V itself diverges;
    solvers move that wall to a small regularization radius.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    angular_momentum_l: int | None = None
    mass: float = 1.0
    hbar: float = 1.0
    domain_kind: str = FULL_LINE
    walls: tuple = (None, None)
    threshold: float | None = None
    symmetric: bool = False
    breakpoints: tuple = ()
    singular_origin: bool = False
    origin_node: bool = False
    _scalar: Callable = field(default=None, repr=False, compare=False)
    _vector: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.mass > 0 and self.hbar > 0):
            raise InvalidParam("mass and hbar must be positive")
        if self.domain_kind not in DOMAIN_KINDS:
            raise InvalidParam(f"unknown domain kind {self.domain_kind!r}")
        if self.angular_momentum_l is not None and self.angular_momentum_l < 0:
            raise InvalidParam("angular momentum l must be nonnegative")
        if self.angular_momentum_l is not None and self.domain_kind != HALF_LINE_RADIAL:
            raise InvalidParam("a centrifugal term needs a radial domain")

    @property
    def radial(self) -> bool:
        return self.domain_kind == HALF_LINE_RADIAL

    @property
    def l(self) -> int:
        return self.angular_momentum_l or 0

    @property
    def centrifugal_strength(self) -> float:
        """Coefficient c of the centrifugal term c / x**2."""
        l = self.l
        return l * (l + 1) * self.hbar**2 / (2.0 * self.mass)

    @property
    def name(self) -> str:
        return self.kind.split(":", 1)[1] if ":" in self.kind else self.kind

    @property
    def _finite_at_origin(self) -> bool:
        return not self.angular_momentum_l and not self.singular_origin

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """V_eff(x), including the centrifugal term for radial kinds."""
        if isinstance(x, np.ndarray):
            return self.eval_array(x)
        x = float(x)
        if self.radial and not (x > 0.0 or (x == 0.0 and self._finite_at_origin)):
            raise DomainError(f"radial potential evaluated at x = {x!r} outside its domain")
        v = self._scalar(x)
        if self.angular_momentum_l:
            v += self.centrifugal_strength / (x * x)
        return v

    def eval_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.radial:
            ok = (x > 0.0) | ((x == 0.0) & self._finite_at_origin)
            if not np.all(ok):
                raise DomainError("radial potential evaluated outside its domain")
        v = np.asarray(self._vector(x), dtype=float)
        if self.angular_momentum_l:
            v = v + self.centrifugal_strength / (x * x)
        return v

    def with_l(self, l: int | None) -> "Potential":
        from dataclasses import replace

        return replace(self, angular_momentum_l=l)

    def with_centrifugal(self, strength: float) -> "Potential":
        """Copy whose centrifugal coefficient is ``strength`` instead of l(l+1)/2.

        Used for the Langer replacement l(l+1) -> (l + 1/2)**2; the result is a
        plain expression-style potential with the barrier folded into V.
        """
        from dataclasses import replace

        base_s, base_v = self._scalar, self._vector

        def scalar(x):
            return base_s(x) + strength / (x * x)

        def vector(x):
            return base_v(x) + strength / (x * x)

        # the barrier now keeps psi off the origin, so no wall there
        return replace(self, kind=self.kind + "+langer", angular_momentum_l=None,
                       walls=(None, self.walls[1]), singular_origin=False, origin_node=False,
                       _scalar=scalar, _vector=vector)


def _check_positive(params, *names):
    for name in names:
        if not params[name] > 0:
            raise InvalidParam(f"parameter {name} must be positive, got {params[name]!r}")


def builtin(name: str, params: Mapping[str, float] | None = None, *,
            mass: float = 1.0, hbar: float = 1.0) -> Potential:
    """Construct one of the catalog potentials.

    ``params`` may carry ``l`` for the radial kinds.  Defaults reproduce the
    standard reference problems: unit well width, unit frequency, unit
    charge, and the Woods-Saxon well ``-1/(1 + exp(2 (r - 30)))``.
    """
    params = dict(params or {})
    l = params.pop("l", None)
    if l is not None:
        if float(l) != int(l) or l < 0:
            raise InvalidParam(f"l must be a nonnegative integer, got {l!r}")
        l = int(l)
    common = dict(mass=mass, hbar=hbar)

    if name == "infinite_well":
        p = {"L": 1.0, **params}
        _check_positive(p, "L")
        L = float(p["L"])

        def scalar(x):
            return 0.0 if 0.0 <= x <= L else math.inf

        def vector(x):
            return np.where((x >= 0.0) & (x <= L), 0.0, np.inf)

        return Potential("builtin:infinite_well", p, None, domain_kind=HALF_LINE_WALL,
                         walls=(0.0, L), symmetric=False, _scalar=scalar, _vector=vector, **common)

    if name == "harmonic_1d":
        p = {"omega": 1.0, **params}
        _check_positive(p, "omega")
        k = mass * float(p["omega"]) ** 2

        def scalar(x):
            return 0.5 * k * x * x

        def vector(x):
            return 0.5 * k * x * x

        return Potential("builtin:harmonic_1d", p, None, symmetric=True,
                         _scalar=scalar, _vector=vector, **common)

    if name == "harmonic_radial":
        p = {"omega": 1.0, **params}
        _check_positive(p, "omega")
        k = mass * float(p["omega"]) ** 2

        def scalar(x):
            return 0.5 * k * x * x

        def vector(x):
            return 0.5 * k * x * x

        return Potential("builtin:harmonic_radial", p, l if l is not None else 0,
                         domain_kind=HALF_LINE_RADIAL, walls=(0.0, None) if not l else (None, None),
                         _scalar=scalar, _vector=vector, **common)

    if name == "coulomb_1d":
        p = {"Z": 1.0, **params}
        _check_positive(p, "Z")
        z = float(p["Z"])

        def scalar(x):
            return -z / abs(x)

        def vector(x):
            with np.errstate(divide="ignore"):
                return -z / np.abs(x)

        return Potential("builtin:coulomb_1d", p, None, domain_kind=HALF_LINE_WALL,
                         walls=(0.0, None), threshold=0.0, symmetric=True,
                         singular_origin=True, origin_node=True,
                         _scalar=scalar, _vector=vector, **common)

    if name == "coulomb_radial":
        p = {"Z": 1.0, **params}
        _check_positive(p, "Z")
        z = float(p["Z"])

        def scalar(x):
            return -z / x

        def vector(x):
            return -z / x

        return Potential("builtin:coulomb_radial", p, l if l is not None else 0,
                         domain_kind=HALF_LINE_RADIAL, walls=(0.0, None) if not l else (None, None),
                         threshold=0.0, singular_origin=not l,
                         _scalar=scalar, _vector=vector, **common)

    if name == "woods_saxon":
        p = {"V0": 1.0, "r0": 30.0, "a": 0.5, **params}
        _check_positive(p, "V0", "a")
        v0, r0, a = float(p["V0"]), float(p["r0"]), float(p["a"])

        def scalar(x):
            t = (x - r0) / a
            if t > 700.0:
                return -v0 * math.exp(-t)
            return -v0 / (1.0 + math.exp(t))

        def vector(x):
            t = (x - r0) / a
            with np.errstate(over="ignore"):
                return -v0 / (1.0 + np.exp(t))

        return Potential("builtin:woods_saxon", p, l if l is not None else 1,
                         domain_kind=HALF_LINE_RADIAL,
                         walls=(0.0, None) if l == 0 else (None, None), threshold=0.0,
                         _scalar=scalar, _vector=vector, **common)

    if name == "double_oscillator":
        p = {"k": 10.0, "a": 3.0, **params}
        _check_positive(p, "k")
        kk, a = float(p["k"]), float(p["a"])

        def scalar(x):
            d = abs(x) - a
            return kk * d * d

        def vector(x):
            d = np.abs(x) - a
            return kk * d * d

        return Potential("builtin:double_oscillator", p, None, symmetric=True, breakpoints=(0.0,),
                         _scalar=scalar, _vector=vector, **common)

    raise UnknownBuiltin(f"unknown builtin potential {name!r}; choose from {', '.join(BUILTINS)}")


def from_expression(source: str, params: Mapping[str, float] | None = None, *,
                    l: int | None = None, mass: float = 1.0, hbar: float = 1.0,
                    domain_kind: str | None = None, walls=(None, None),
                    threshold: float | None = None) -> Potential:
    """Build a potential from expression-language source."""
    params = {k: float(v) for k, v in (params or {}).items()}
    tree = _expr.parse_potential(source, params)
    scalar, vector = _expr.compile_expr(tree, params)
    if domain_kind is None:
        domain_kind = HALF_LINE_RADIAL if l is not None else FULL_LINE
    if domain_kind == HALF_LINE_RADIAL and not l and walls == (None, None):
        walls = (0.0, None)
    return Potential(f"expr:{_expr.unparse(tree)}", params, l, mass=mass, hbar=hbar,
                     domain_kind=domain_kind, walls=tuple(walls), threshold=threshold,
                     _scalar=scalar, _vector=vector)


def from_spec(spec: str, params: Mapping[str, float] | None = None, **kwargs) -> Potential:
    """Resolve a ``builtin:<name>`` or ``expr:<source>`` string."""
    if spec.startswith("builtin:"):
        params = dict(params or {})
        if kwargs.get("l") is not None:
            params["l"] = kwargs["l"]
        return builtin(spec[len("builtin:"):], params,
                       mass=kwargs.get("mass", 1.0), hbar=kwargs.get("hbar", 1.0))
    if spec.startswith("expr:"):
        return from_expression(spec[len("expr:"):], params, **kwargs)
    raise UnknownBuiltin(f"potential spec must start with 'builtin:' or 'expr:', got {spec!r}")


def eval(p: Potential, x):  # noqa: A001 - mirrors the documented operation name
    return p.eval(x)
