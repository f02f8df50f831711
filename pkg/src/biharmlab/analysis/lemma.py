"""The weighted identity for ``int |x|^g (Delta^2 u) u``, its lower bound and Rellich ratios."""

from __future__ import annotations

import math
from typing import Iterable, Optional

import numpy as np

from ..forms import Sampled, default_quadrature, sample
from ..grid import Quadrature
from ..params import ParameterError, lemma_constant_k, rellich_constants
from .reports import InequalityReport

IDENTITY_TOL = 1e-7
MARGIN_TOL = 1e-8


def stima_terms(s: Sampled, gamma: float) -> dict:
    """Both sides of the identity, each term integrated independently.

    For radial u the Hessian of ``|x|^g`` acts on ``grad u = f' x/r`` through
    its radial eigenvalue ``g(g-2) r^(g-2) + g r^(g-2)``.
    """
    r, N, g = s.r, s.N, float(gamma)
    c2 = g * (g - 2) * (g - 2 + N) * (g - 4 + N)
    lhs = s.integral(r ** g * s.L2u * s.f)
    t_lap = s.integral(r ** g * s.Lu ** 2)
    t_hess = -2 * s.integral((g * (g - 2) + g) * r ** (g - 2) * s.d[1] ** 2)
    t_bilap = 0.5 * c2 * s.integral(r ** (g - 4) * s.f ** 2) if c2 != 0 else 0.0
    return {"lhs": lhs, "lap": t_lap, "hess": t_hess, "bilap": t_bilap,
            "rhs": math.fsum((t_lap, t_hess, t_bilap))}


def _describe(u) -> dict:
    return u.describe() if hasattr(u, "describe") else {}


def stima_identity_check(u, gamma: float, N: int, quad: Optional[Quadrature] = None,
                         tol: float = IDENTITY_TOL) -> InequalityReport:
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    quad = quad or default_quadrature(N)
    s = sample(u, quad)
    t = stima_terms(s, gamma)
    scale = max(abs(t["lhs"]), abs(t["lap"]), abs(t["hess"]), abs(t["bilap"]))
    resid = 0.0 if scale == 0 else abs(t["lhs"] - t["rhs"]) / scale
    return InequalityReport(f"stima[gamma={gamma},N={N}]", -resid, tol,
                            None if resid <= tol else {"u": _describe(s.u), "residual": resid},
                            details={**t, "residual": resid})


def lemma21_margin(s: Sampled, gamma: float) -> tuple:
    """``(lhs, k * int |x|^(g-4) u^2, normalized margin)``."""
    k = lemma_constant_k(gamma, s.N).k
    lhs = s.integral(s.r ** gamma * s.L2u * s.f)
    rhs = k * s.integral(s.r ** (gamma - 4) * s.f ** 2)
    scale = abs(lhs) + abs(rhs)
    return lhs, rhs, 0.0 if scale == 0 else (lhs - rhs) / scale


def lemma21_check(family: Iterable, gamma: float, N: int,
                  quad: Optional[Quadrature] = None,
                  tol: float = MARGIN_TOL) -> InequalityReport:
    """Worst margin of ``int |x|^g (Delta^2 u) u >= k int |x|^(g-4) u^2`` over a family."""
    quad = quad or default_quadrature(N)
    consts = lemma_constant_k(gamma, N)
    worst, bad = math.inf, None
    for u in family:
        s = sample(u, quad)
        lhs, rhs, m = lemma21_margin(s, gamma)
        if m < worst:
            worst = m
            bad = {"u": _describe(s.u), "lhs": lhs, "rhs": rhs}
    if worst == math.inf:
        worst = 0.0
    return InequalityReport(f"lemma21[gamma={gamma},N={N}]", worst, tol,
                            bad if worst < -tol else None,
                            details={"constants": consts.to_dict(), "worst": bad})


def rellich_ratio(u, N: int, quad: Optional[Quadrature] = None) -> float:
    """``int (Delta u)^2 / int |x|^-4 u^2``."""
    if N < 5:
        raise ParameterError(f"Rellich ratio needs N >= 5, got {N}")
    quad = quad or default_quadrature(N)
    s = sample(u, quad)
    den = s.integral(s.r ** -4.0 * s.f ** 2)
    if den == 0:
        raise ZeroDivisionError("Rellich ratio undefined for u = 0")
    return s.integral(s.Lu ** 2) / den


def higher_rellich_ratio(u, N: int, quad: Optional[Quadrature] = None) -> float:
    """``||Delta^2 u||^2 / || |x|^-4 u ||^2`` (N > 8)."""
    if N <= 8:
        raise ParameterError(f"higher-order Rellich ratio needs N > 8, got {N}")
    quad = quad or default_quadrature(N)
    s = sample(u, quad)
    den = s.integral(s.r ** -8.0 * s.f ** 2)
    if den == 0:
        raise ZeroDivisionError("higher Rellich ratio undefined for u = 0")
    return s.integral(s.L2u ** 2) / den


def rellich_check(family: Iterable, N: int, quad: Optional[Quadrature] = None,
                  rel_tol: float = 1e-6) -> InequalityReport:
    """Every ratio must stay above the sharp constant, up to ``rel_tol`` of its scale."""
    quad = quad or default_quadrature(N)
    c0 = rellich_constants(N).c0_sharp
    worst, bad, low = math.inf, None, math.inf
    for u in family:
        ratio = rellich_ratio(u, N, quad)
        m = (ratio - c0) / c0
        low = min(low, ratio)
        if m < worst:
            worst, bad = m, {"u": _describe(u), "ratio": ratio}
    return InequalityReport(f"rellich[N={N}]", worst, rel_tol,
                            bad if worst < -rel_tol else None,
                            details={"c0_sharp": c0, "family_inf": low})
