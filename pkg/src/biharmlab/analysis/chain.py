"""Weighted interpolation, the D2 chain and the a-priori bounds.

Each inequality ``lhs <= C * rhs`` is handled the same way: the empirical
constant is the family sup of ``lhs / rhs`` (refined by coordinate descent
on power-Gaussians), and the margin ``C * rhs - lhs`` is then checked on a
family twice as large.  A margin below ``-tol`` means the doubled family
found a worse member than the estimate allowed for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..forms import Sampled, h4_norm, weighted_derivative_norms
from ..params import OperatorParams, ParameterError
from .reports import ConstantEstimate, InequalityReport, skipped
from .sweep import Sweep, estimate_constant
from .threshold import A_u

MARGIN_TOL = 1e-8
EPSILONS = (0.1, 0.5, 1.0)

# lhs, rhs of one inequality instance
Pair = Callable[[Sampled], Tuple[float, float]]


def _tensor(s: Sampled, order: int) -> np.ndarray:
    return np.abs(s.f) if order == 0 else s.tensors[order - 1]


def _wnorm(s: Sampled, power: float, order: int) -> float:
    return s.norm(s.r ** power * _tensor(s, order))


@dataclass
class Inequality:
    id: str
    pair: Pair

    def ratio(self, s: Sampled) -> float:
        lhs, rhs = self.pair(s)
        if rhs == 0:
            return 0.0 if lhs == 0 else math.inf
        return lhs / rhs


def check_inequality(ineq: Inequality, sweep: Sweep, doubled: Sweep, seed: int = 0,
                     iters: int = 100, tol: float = MARGIN_TOL,
                     refine: bool = True) -> InequalityReport:
    const = estimate_constant(ineq.id, ineq.ratio, sweep, "sup", refine=refine,
                              seed=seed, iters=iters, doubled=doubled)
    C = const.value
    worst, bad = math.inf, None
    for u, s in zip(doubled.family, doubled.samples):
        lhs, rhs = ineq.pair(s)
        scale = max(abs(lhs), C * abs(rhs), 1e-300)
        m = (C * rhs - lhs) / scale
        if m < worst:
            worst, bad = m, {"u": u.describe(), "lhs": lhs, "rhs": rhs}
    finite = math.isfinite(C)
    rep = InequalityReport(ineq.id, worst, tol, bad if worst < -tol else None,
                           constants=[const],
                           details={"constant_finite": finite,
                                    "constant_stable": const.stable,
                                    "worst": bad},
                           requirements=["constant_finite", "constant_stable"])
    return rep


# ---------------------------------------------------------------------------
# inequality builders


def interp_inequality(gamma: float, h: int, eps: float) -> Inequality:
    """``||r^g D^h u|| <= eps ||r^(g+1) D^(h+1) u|| + C_eps ||r^(g-1) D^(h-1) u||``.

    The ratio is the least admissible ``C_eps`` for one u (zero when the eps
    term alone suffices).
    """
    if h not in (1, 2, 3):
        raise ValueError(f"interpolation order h must be 1, 2 or 3, got {h}")

    def pair(s):
        lhs = _wnorm(s, gamma, h) - eps * _wnorm(s, gamma + 1, h + 1)
        return max(lhs, 0.0), _wnorm(s, gamma - 1, h - 1)

    return Inequality(f"interp[gamma={gamma},h={h},eps={eps}]", pair)


def chain_inequalities(alpha: float, eps: float) -> List[Inequality]:
    """``||r^(2a-j) D^(4-j) u|| <= eps ||r^(2a) D^4 u|| + C ||r^(2a-4) u||``, j = 1, 2, 3."""
    out = []
    for j in (1, 2, 3):
        def pair(s, j=j):
            lhs = _wnorm(s, 2 * alpha - j, 4 - j) - eps * _wnorm(s, 2 * alpha, 4)
            return max(lhs, 0.0), _wnorm(s, 2 * alpha - 4, 0)
        out.append(Inequality(f"chain-2alpha-{j}[alpha={alpha},eps={eps}]", pair))
    return out


def cz_inequality(alpha: float) -> Inequality:
    """``||r^(2a) D^4 u|| <= C (||r^(2a) Delta^2 u|| + ||r^(2a-4) u||)``."""
    def pair(s):
        rhs = s.norm(s.r ** (2 * alpha) * s.L2u) + _wnorm(s, 2 * alpha - 4, 0)
        return _wnorm(s, 2 * alpha, 4), rhs
    return Inequality(f"weighted-cz[alpha={alpha}]", pair)


def unweighted_inequalities() -> List[Inequality]:
    """``||r^-h D^(4-h) u|| <= C ||Delta^2 u||`` for h = 0..4 (the alpha = 0 case, N > 8)."""
    out = []
    for h in range(5):
        def pair(s, h=h):
            return _wnorm(s, -float(h), 4 - h), s.norm(s.L2u)
        out.append(Inequality(f"alpha0[h={h}]", pair))
    return out


def higher_rellich_inequality() -> Inequality:
    def pair(s):
        return s.norm(s.r ** -4.0 * s.f), s.norm(s.L2u)
    return Inequality("higher-rellich", pair)


def potential_inequality(params: OperatorParams) -> Inequality:
    """``||V^2 u|| <= C ||A u + lambda u||``."""
    def pair(s):
        return (s.norm(params.V2(s.r) * s.f),
                s.norm(A_u(s, params) + params.lam * s.f))
    return Inequality(f"potential[lambda={params.lam:.6g}]", pair)


def sugano_inequality(params: OperatorParams) -> Inequality:
    """``||V_tilde^2 u|| <= C ||Delta^2 u + V_tilde^2 u||``."""
    def pair(s):
        Vt2 = params.V_tilde(s.r) ** 2
        return s.norm(Vt2 * s.f), s.norm(s.L2u + Vt2 * s.f)
    return Inequality("sugano-j0", pair)


def apriori_inequalities(params: OperatorParams) -> List[Inequality]:
    """``||r^(2a-h) D^(4-h) u|| <= C (||A u|| + ||u||)`` for h = 0..4, and ``V^2 u``."""
    out = []
    for h in range(5):
        def pair(s, h=h):
            lhs = weighted_derivative_norms(s, 2 * params.alpha)[h]
            return lhs, s.norm(A_u(s, params)) + s.norm(s.f)
        out.append(Inequality(f"d2-apriori[h={h}]", pair))

    def pot(s):
        return s.norm(params.V2(s.r) * s.f), s.norm(A_u(s, params)) + s.norm(s.f)
    out.append(Inequality("d2-apriori[V2]", pot))
    return out


def h4_inequality(params: OperatorParams) -> Inequality:
    """``||u||_{H^4} <= C ||u||_A`` with the graph norm ``||A u|| + ||u||``."""
    def pair(s):
        return h4_norm(s), s.norm(A_u(s, params)) + s.norm(s.f)
    return Inequality("h4-graph", pair)


# ---------------------------------------------------------------------------
# public checks


def _run(ineqs: Sequence[Inequality], sweep: Sweep, doubled: Sweep, seed: int,
         iters: int, refine: bool = True) -> List[InequalityReport]:
    return [check_inequality(q, sweep, doubled, seed=seed + i, iters=iters, refine=refine)
            for i, q in enumerate(ineqs)]


def weighted_interp_check(sweep: Sweep, doubled: Sweep, gamma: float, h: int,
                          epsilons: Sequence[float] = EPSILONS, seed: int = 0,
                          iters: int = 100) -> InequalityReport:
    """Empirical ``C_eps`` for each eps; also reports whether it decreases in eps."""
    reps = _run([interp_inequality(gamma, h, e) for e in epsilons], sweep, doubled,
                seed, iters)
    return merge_reports(f"interp[gamma={gamma},h={h}]", reps,
                         extra={"C_eps": {str(e): r.constants[0].value
                                          for e, r in zip(epsilons, reps)},
                                "decreasing_in_eps": all(
                                    a.constants[0].value >= b.constants[0].value - 1e-12
                                    for a, b in zip(reps, reps[1:]))})


def chain_checks(sweep: Sweep, doubled: Sweep, alpha: float, N: int,
                 epsilons: Sequence[float] = EPSILONS, seed: int = 0,
                 iters: int = 100) -> InequalityReport:
    if N <= 8:
        return skipped(f"chain[alpha={alpha}]", f"requires N > 8, got N={N}")
    reps = []
    for i, e in enumerate(epsilons):
        reps += _run(chain_inequalities(alpha, e), sweep, doubled, seed + 10 * i, iters)
    return merge_reports(f"chain[alpha={alpha}]", reps)


def weighted_cz_check(sweep: Sweep, doubled: Sweep, alpha: float, N: int,
                      seed: int = 0, iters: int = 100) -> InequalityReport:
    """Weighted Calderon-Zygmund bound; ``alpha = 0`` runs the unweighted set instead."""
    if N <= 8:
        return skipped(f"weighted-cz[alpha={alpha}]", f"requires N > 8, got N={N}")
    if alpha == 0:
        ineqs = unweighted_inequalities()
    else:
        ineqs = [cz_inequality(alpha)]
    return merge_reports(f"weighted-cz[alpha={alpha}]",
                         _run(ineqs, sweep, doubled, seed, iters))


def potential_check(sweep: Sweep, doubled: Sweep, params: OperatorParams,
                    seed: int = 0, iters: int = 100) -> InequalityReport:
    if params.lambda0 is None or params.lam < params.lambda0:
        raise ParameterError("potential estimate needs lambda >= lambda0")
    return merge_reports("potential",
                         _run([potential_inequality(params)], sweep, doubled, seed, iters))


def sugano_j0_ratio(s: Sampled, params: OperatorParams) -> float:
    return sugano_inequality(params).ratio(s)


def d2_apriori_check(sweep: Sweep, doubled: Sweep, params: OperatorParams,
                     seed: int = 0, iters: int = 100) -> InequalityReport:
    if params.N <= 8:
        return skipped("d2-apriori", f"requires N > 8, got N={params.N}")
    ineqs = apriori_inequalities(params) + [sugano_inequality(params), h4_inequality(params),
                                            higher_rellich_inequality()]
    return merge_reports("d2-apriori", _run(ineqs, sweep, doubled, seed, iters))


def merge_reports(id: str, reps: Sequence[InequalityReport],
                  extra: Optional[dict] = None) -> InequalityReport:
    live = [r for r in reps if not r.skipped]
    if not live:
        return skipped(id, "all parts skipped")
    worst = min(live, key=lambda r: r.margin)
    details = {"parts": {r.id: {"status": r.status, "margin": r.margin} for r in live},
               "all_parts_pass": all(r.passed for r in live)}
    if extra:
        details.update(extra)
    consts = [c for r in live for c in r.constants]
    return InequalityReport(id, worst.margin, worst.tol, worst.violating, consts, details,
                            requirements=["all_parts_pass"])
