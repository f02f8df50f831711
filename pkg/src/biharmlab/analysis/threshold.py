"""The shift threshold lambda0 and the potential estimate it enables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..forms import Sampled, default_quadrature, sample
from ..grid import Quadrature
from ..params import OperatorParams, ParameterError, lemma_constant_k, rellich_constants

R_SEARCH = (1e-4, 1e4)
N_SEARCH = 20001


@dataclass
class Lambda0Result:
    value: float
    potential: float              # threshold from the potential-estimate chain
    accretivity: float            # threshold from the accretivity chain
    k: dict                       # k1..k5 of the potential chain
    k_accretivity: dict
    c0_potential: float
    c0_accretivity: float
    worst_r: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lambda0": self.value, "potential": self.potential,
                "accretivity": self.accretivity, "k": self.k,
                "k_accretivity": self.k_accretivity,
                "c0_potential": self.c0_potential,
                "c0_accretivity": self.c0_accretivity, "worst_r": self.worst_r}


def potential_k(params: OperatorParams) -> dict:
    """k1..k5 from the Lemma constant at each weight of ``(a^2 - 1)(1 + V^2)``.

    ``(a^2 - 1)(1 + r^(2b)) = 2 r^a + r^(2a) + r^(2b) + 2 r^(a+2b) + r^(2a+2b)``
    and the square weight ``r^(2b)`` itself; the factor 2 goes into k1, k4.
    """
    a, b, N = params.alpha, params.beta, params.N
    k = lambda g: lemma_constant_k(g, N).k
    return {"k1": 2 * k(a), "k2": k(2 * a), "k3": k(2 * b),
            "k4": 2 * k(a + 2 * b), "k5": k(2 * (a + b))}


def accretivity_k(params: OperatorParams) -> dict:
    k = lambda g: lemma_constant_k(g, params.N).k
    return {"k1": 2 * k(params.alpha), "k2": k(2 * params.alpha)}


def _threshold(E0: np.ndarray, lam_coeff: np.ndarray, r: np.ndarray) -> tuple:
    need = -E0 / lam_coeff
    i = int(np.argmax(need))
    return max(0.0, float(need[i])), float(r[i])


def potential_expression(params: OperatorParams, r, lam: float = 0.0) -> np.ndarray:
    a, b = params.alpha, params.beta
    ks = potential_k(params)
    c0 = rellich_constants(params.N).c0_sharp
    return (c0 * r ** -4.0 + ks["k1"] * r ** (a - 4) + ks["k2"] * r ** (2 * a - 4)
            + ks["k3"] * r ** (2 * b - 4) + ks["k4"] * r ** (a + 2 * b - 4)
            + ks["k5"] * r ** (2 * (a + b - 2)) + 0.75 * r ** (4 * b)
            + (0.5 + lam) * r ** (2 * b) + lam - 0.75)


def accretivity_expression(params: OperatorParams, r, lam: float = 0.0) -> np.ndarray:
    """Coefficient of ``u^2`` left over after the accretivity bound.

    Only half of ``int (Delta u)^2`` is spent on the Rellich term, hence
    ``c0 = c0_sharp / 2``.
    """
    a, b = params.alpha, params.beta
    ks = accretivity_k(params)
    c0 = 0.5 * rellich_constants(params.N).c0_sharp
    return (c0 * r ** -4.0 + ks["k1"] * r ** (a - 4) + (ks["k2"] - 1) * r ** (2 * a - 4)
            + 0.5 * r ** (2 * b) + lam - 1)


def lambda0_search(params: OperatorParams, r_range: tuple = R_SEARCH,
                   n: int = N_SEARCH) -> Lambda0Result:
    """Least ``lambda >= 0`` making both chain expressions nonnegative on a log grid."""
    params.require_dim(5)
    r = np.geomspace(r_range[0], r_range[1], n)
    E_pot = potential_expression(params, r)
    E_acc = accretivity_expression(params, r)
    if not (np.all(np.isfinite(E_pot)) and np.all(np.isfinite(E_acc))):
        raise ParameterError("threshold expression overflowed on the search grid")
    lam_pot, r_pot = _threshold(E_pot, 1.0 + r ** (2 * params.beta), r)
    lam_acc, r_acc = _threshold(E_acc, np.ones_like(r), r)
    # the expression must be nonnegative at both ends of the search window
    for E, coeff, lam in ((E_pot, 1 + r ** (2 * params.beta), lam_pot),
                          (E_acc, np.ones_like(r), lam_acc)):
        tail = E[[0, -1]] + lam * coeff[[0, -1]]
        if np.any(tail < 0):
            raise ParameterError("no finite lambda0 on the search grid")
    c0 = rellich_constants(params.N).c0_sharp
    return Lambda0Result(max(lam_pot, lam_acc), lam_pot, lam_acc, potential_k(params),
                         accretivity_k(params), c0, 0.5 * c0,
                         {"potential": r_pot, "accretivity": r_acc})


def A_u(s: Sampled, params: OperatorParams) -> np.ndarray:
    return params.a2(s.r) * s.L2u + params.V2(s.r) * s.f


def potential_estimate_ratio(u, params: OperatorParams,
                             quad: Optional[Quadrature] = None) -> float:
    """``||V^2 u|| / ||A u + lambda u||``."""
    if params.lambda0 is not None and params.lam < params.lambda0:
        raise ParameterError(f"lambda={params.lam} is below lambda0={params.lambda0}")
    quad = quad or default_quadrature(params.N)
    s = sample(u, quad)
    den = s.norm(A_u(s, params) + params.lam * s.f)
    if den == 0:
        raise ZeroDivisionError("potential ratio undefined for u = 0")
    return s.norm(params.V2(s.r) * s.f) / den


def potential_chain_margin(s: Sampled, params: OperatorParams) -> float:
    """``int (A u + lam u)(1 + V^2) u - int (V^4/4 + V^2/2 + 1/4) u^2``, normalized."""
    r = s.r
    V2 = params.V2(r)
    lhs = s.integral((A_u(s, params) + params.lam * s.f) * (1 + V2) * s.f)
    rhs = s.integral((0.25 * V2 ** 2 + 0.5 * V2 + 0.25) * s.f ** 2)
    return (lhs - rhs) / (abs(lhs) + abs(rhs))
