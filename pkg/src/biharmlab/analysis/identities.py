"""Sweeps of the form identity, accretivity, duality and continuity over test families."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from ..forms import (Sampled, accretivity_gap, d_norm, default_quadrature, eval_form,
                     form_identity_residual, form_norm_sq, sample)
from ..grid import Quadrature
from ..operator import apply_adjoint
from ..params import OperatorParams
from ..testfn import Dilation
from .lemma import higher_rellich_ratio, rellich_ratio
from .reports import ConstantEstimate, InequalityReport, relative_change
from .threshold import A_u

IDENTITY_TOL = 1e-6
GAP_TOL = 1e-8


def _describe(u) -> dict:
    u = u.u if isinstance(u, Sampled) else u
    return u.describe() if hasattr(u, "describe") else {}


def form_identity_check(pairs: Iterable[tuple], params: OperatorParams,
                        quad: Optional[Quadrature] = None,
                        tol: float = IDENTITY_TOL) -> InequalityReport:
    """Max normalized residual of ``a_lam(u, v) = int (A u + lam u) v`` over pairs."""
    quad = quad or default_quadrature(params.N)
    worst, bad, count = 0.0, None, 0
    for u, v in pairs:
        res = form_identity_residual(u, v, params, quad)
        count += 1
        if res > worst or bad is None:
            worst, bad = max(worst, res), {"u": _describe(u), "v": _describe(v), "residual": res}
    return InequalityReport("form-identity", -worst, tol, bad if worst > tol else None,
                            details={"max_residual": worst, "pairs": count,
                                     "lambda": params.lam})


def accretivity_check(family: Iterable, params: OperatorParams,
                      quad: Optional[Quadrature] = None,
                      tol: float = GAP_TOL) -> InequalityReport:
    """``Re a_lam(u, u) - floor >= -tol ||u||_a^2`` for each member."""
    quad = quad or default_quadrature(params.N)
    worst, bad, count = math.inf, None, 0
    for u in family:
        s = sample(u, quad)
        gap = accretivity_gap(s, params, quad)
        scale = form_norm_sq(s, params, quad)
        m = gap / scale if scale > 0 else 0.0
        count += 1
        if m < worst:
            worst, bad = m, {"u": _describe(u), "gap": gap, "norm_a_sq": scale}
    worst = 0.0 if worst == math.inf else worst
    return InequalityReport("accretivity", worst, tol, bad if worst < -tol else None,
                            details={"members": count, "lambda": params.lam,
                                     "lambda0": params.lambda0, "worst": bad})


def duality_residual(u, v, params: OperatorParams, quad: Optional[Quadrature] = None) -> float:
    """``|<A u, v> - <u, A* v>| / (||A u|| ||v|| + ||u|| ||A* v||)``."""
    quad = quad or default_quadrature(params.N)
    su, sv = sample(u, quad), sample(v, quad)
    Au = A_u(su, params)
    Asv = apply_adjoint(sv.u, 0, params, su.r)
    lhs = su.integral(Au * sv.f)
    rhs = su.integral(su.f * Asv)
    scale = su.norm(Au) * sv.norm(sv.f) + su.norm(su.f) * sv.norm(Asv)
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


def duality_check(pairs: Iterable[tuple], params: OperatorParams,
                  quad: Optional[Quadrature] = None,
                  tol: float = IDENTITY_TOL) -> InequalityReport:
    quad = quad or default_quadrature(params.N)
    worst, bad, count = 0.0, None, 0
    for u, v in pairs:
        res = duality_residual(u, v, params, quad)
        count += 1
        if res >= worst:
            worst, bad = res, {"u": _describe(u), "v": _describe(v), "residual": res}
    return InequalityReport("duality", -worst, tol, bad if worst > tol else None,
                            details={"max_residual": worst, "pairs": count})


def _sup_stable(name: str, vals_small: Sequence[float], vals_big: Sequence[float],
                grid: str) -> ConstantEstimate:
    s1, s2 = max(vals_small), max(vals_big)
    return ConstantEstimate(name, max(s1, s2), "sup", len(vals_big), grid,
                            relative_change(s1, max(s1, s2)))


def continuity_check(pairs: Sequence[tuple], params: OperatorParams,
                     quad: Optional[Quadrature] = None,
                     doubled: Optional[Sequence[tuple]] = None) -> InequalityReport:
    """Sup of ``|a_lam(u, v)| / (||u||_D ||v||_D)`` over ``pairs``.

    Stability compares against ``doubled`` (a larger pair list) when given,
    otherwise against the first half of ``pairs``.
    """
    quad = quad or default_quadrature(params.N)
    cache = {}

    def get(u):
        # pairs are drawn from a shared pool, so members repeat
        if id(u) not in cache:
            su = sample(u, quad)
            cache[id(u)] = (u, su, d_norm(su, params, quad).value)
        return cache[id(u)]

    def ratio(u, v):
        (_, su, du), (_, sv, dv) = get(u), get(v)
        return abs(eval_form(su, sv, params, quad, check=False).value) / (du * dv)

    vals = [ratio(u, v) for u, v in pairs]
    if doubled is None:
        small, big = vals[:max(1, len(vals) // 2)], vals
    else:
        small, big = vals, [ratio(u, v) for u, v in doubled]
    const = _sup_stable("continuity", small, big, quad.grid.fingerprint())
    ok = math.isfinite(const.value) and const.stable
    return InequalityReport("continuity", 0.0 if ok else -math.inf, 0.0, constants=[const],
                            details={"finite_and_stable": ok, "pairs": len(vals),
                                     "pairs_doubled": len(big)},
                            requirements=["finite_and_stable"])


def norm_equivalence_check(small: Sequence, big: Sequence, params: OperatorParams,
                           quad: Optional[Quadrature] = None) -> InequalityReport:
    """``||u||_D <= C ||u||_a``: sup over ``small`` against ``big`` (its enlargement)."""
    quad = quad or default_quadrature(params.N)

    def ratio(u):
        s = sample(u, quad)
        return d_norm(s, params, quad).value / math.sqrt(form_norm_sq(s, params, quad))

    vb = [ratio(u) for u in big]
    vs = vb[:len(small)] if list(big[:len(small)]) == list(small) else [ratio(u) for u in small]
    const = _sup_stable("D-vs-form-norm", vs, vb, quad.grid.fingerprint())
    ok = math.isfinite(const.value) and const.stable
    return InequalityReport("norm-equivalence", 0.0 if ok else -math.inf, 0.0,
                            constants=[const],
                            details={"finite_and_stable": ok, "small": len(small),
                                     "big": len(big)},
                            requirements=["finite_and_stable"])


def scale_covariance(u, N: int, s: float = 2.0, quad: Optional[Quadrature] = None) -> dict:
    """Rellich ratios of ``u`` and ``u(s r)``; both are dilation invariant."""
    quad = quad or default_quadrature(N)
    us = Dilation(u, s)
    out = {"rellich": (rellich_ratio(u, N, quad), rellich_ratio(us, N, quad))}
    if N > 8:
        out["higher_rellich"] = (higher_rellich_ratio(u, N, quad),
                                 higher_rellich_ratio(us, N, quad))
    return out
