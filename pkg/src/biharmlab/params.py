"""Operator data and the constant bundles derived from it.

The operator is ``A = (1 + |x|^alpha)^2 Delta^2 + |x|^(2 beta)`` on R^N.
Every other module takes an :class:`OperatorParams` instead of loose
exponents so that validation happens in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class ParameterError(ValueError):
    """Raised when operator data violates a precondition."""


@dataclass(frozen=True)
class OperatorParams:
    """Dimension, exponents and shift of ``A + lambda``.

    ``degenerate=True`` admits ``alpha == 0`` (constant diffusion ``a = 2``),
    which only the closed-form operator evaluators accept.
    """

    N: int
    alpha: float
    beta: float
    lam: float = 0.0
    lambda0: Optional[float] = None
    degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        if self.alpha < 0 or (self.alpha == 0 and not self.degenerate):
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > max(self.alpha - 2.0, 0.0):
            raise ParameterError(
                f"beta must exceed (alpha-2)^+ = {max(self.alpha - 2.0, 0.0)}, got {self.beta}"
            )
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")

    def require_dim(self, min_N: int = 5, strict: bool = False) -> None:
        """Gate an operation on ``N >= min_N`` (or ``N > min_N`` when strict)."""
        ok = self.N > min_N if strict else self.N >= min_N
        if not ok:
            op = ">" if strict else ">="
            raise ParameterError(f"operation requires N {op} {min_N}, got N={self.N}")

    def with_lambda(self, lam: float) -> "OperatorParams":
        return replace(self, lam=float(lam))

    def with_lambda0(self, lambda0: float) -> "OperatorParams":
        return replace(self, lambda0=float(lambda0))

    # coefficient functions -------------------------------------------------
    def a(self, r):
        return 1.0 + np.power(r, self.alpha)

    def a2(self, r):
        return self.a(r) ** 2

    def V(self, r):
        return np.power(r, self.beta)

    def V2(self, r):
        return np.power(r, 2.0 * self.beta)

    def V_tilde(self, r):
        """``V / a``, the potential of the divided operator ``Delta^2 + V_tilde^2``."""
        return self.V(r) / self.a(r)

    def to_dict(self) -> dict:
        return {"N": self.N, "alpha": self.alpha, "beta": self.beta,
                "lambda": self.lam, "lambda0": self.lambda0}


@dataclass(frozen=True)
class LemmaConstants:
    """Constants of the weighted estimate ``int |x|^g (Delta^2 u) u >= k int |x|^(g-4) u^2``."""

    gamma: float
    N: int
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    k: float

    def to_dict(self) -> dict:
        return {name: getattr(self, name)
                for name in ("gamma", "N", "c1", "c2", "c3", "c4", "c5", "c6", "k")}


def lemma_constant_k(gamma: float, N: int) -> LemmaConstants:
    """Assemble c1..c6 and k for weight ``|x|^gamma`` in dimension N.

    The square ``(c5 r^(g/2) Delta u + c6 r^(g/2-2) u)^2`` must absorb the cross
    term ``c3 r^(g-2) u Delta u``, so ``2 c5 c6 = c3`` and ``k = c2/2 - c4 - c6^2``.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if N < 5:
        raise ParameterError(f"N must be >= 5, got {N}")
    g = float(gamma)
    c1 = g * (g - 2 + N)
    c2 = g * (g - 2) * (g - 2 + N) * (g - 4 + N)
    c3 = 2 * g * (abs(g - 2) + 1) + 1
    c4 = c3 * (g - 2) * (g - 4 + N) / 2
    c5 = 2 ** -0.5
    c6 = c3 / (2 * c5)
    # c6^2 = c3^2 / 2 exactly; squaring c6 itself would carry rounding from c5
    k = c2 / 2 - c4 - c3 * c3 / 2
    return LemmaConstants(g, int(N), c1, c2, c3, c4, c5, c6, k)


@dataclass(frozen=True)
class WeightDerivatives:
    grad_coeff: np.ndarray      # gradient is grad_coeff * x
    hess_radial: np.ndarray     # multiplies x x^T / |x|^2
    hess_identity: np.ndarray
    lap: np.ndarray
    bilap: np.ndarray

    @property
    def hess_eigs(self):
        """Hessian eigenvalues: radial direction, then the (N-1)-fold tangential one."""
        return self.hess_radial + self.hess_identity, self.hess_identity


def weight_derivatives(gamma: float, N: int, r) -> WeightDerivatives:
    """Derivatives of ``|x|^gamma`` at radius r.

    ``grad = gamma r^(gamma-2) x``;
    ``D_ij = gamma(gamma-2) r^(gamma-4) x_i x_j + gamma r^(gamma-2) delta_ij``.
    ``lap = c1 r^(gamma-2)`` and ``bilap = c2 r^(gamma-4)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ParameterError("weight derivatives need r > 0")
    g = float(gamma)
    c1 = g * (g - 2 + N)
    c2 = g * (g - 2) * (g - 2 + N) * (g - 4 + N)
    return WeightDerivatives(
        grad_coeff=g * r ** (g - 2),
        hess_radial=g * (g - 2) * r ** (g - 2),
        hess_identity=g * r ** (g - 2),
        lap=c1 * r ** (g - 2),
        bilap=c2 * r ** (g - 4),
    )


@dataclass(frozen=True)
class RellichConstants:
    c0_sharp: float
    c_hardy: float
    c_hor: Optional[float] = None   # empirical only; None until estimated

    def to_dict(self) -> dict:
        return {"c0_sharp": self.c0_sharp, "c_hardy": self.c_hardy,
                "c_hor": "empirical" if self.c_hor is None else self.c_hor}


def rellich_constants(N: int, c_hor: Optional[float] = None) -> RellichConstants:
    """Sharp Rellich ``(N(N-4)/4)^2`` and Hardy ``((N-2)/2)^2`` constants."""
    if N < 5:
        raise ParameterError(f"Rellich constant needs N >= 5, got {N}")
    return RellichConstants((N * (N - 4) / 4) ** 2, ((N - 2) / 2) ** 2, c_hor)


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)
