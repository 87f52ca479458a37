"""Bound-state eigenvalues from an exact phase-integral quantization condition.

Two engines evaluate the quantization function J(E): ``tmatrix`` (layer
transfer matrices) and ``riccati`` (continuous phase flow).  Eigenvalues
satisfy ``J(E) = n + 1`` with n the node count.
"""

from .errors import *  # noqa: F401,F403
from .potential import Potential, builtin, from_expression, from_spec
from .quantize import (ActionCurve, ActionPoint, Eigensolution, SolveOptions, Spectrum, action,
                       action_point, eigenfunction, scan, solve_eigenvalue, solve_spectrum)
from .oracles import analytic_delta, analytic_eigenvalue, numerov_eigenvalue, wkb_eigenvalue

try:
    from importlib.metadata import version as _v
    __version__ = _v("artifact")
except Exception:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "Potential", "builtin", "from_expression", "from_spec",
    "SolveOptions", "ActionPoint", "ActionCurve", "Eigensolution", "Spectrum",
    "action", "action_point", "scan", "solve_eigenvalue", "solve_spectrum", "eigenfunction",
    "analytic_eigenvalue", "analytic_delta", "numerov_eigenvalue", "wkb_eigenvalue",
]
