"""The sesquilinear form of ``A + lambda`` and the D / D2 norms.

For real ``u, v``

    a_lam(u, v) = int a^2 Du Dv + 2 grad(a^2).grad(v) Du + Lap(a^2) v Du
                  + (V^2 + lam) u v

with ``D = Delta``.  Integrating ``int a^2 (Delta^2 u) v`` by parts twice
gives this identity, which :func:`form_identity_residual` measures.
All integrals use the Gauss-Legendre rule of a :class:`Quadrature` on
radial profiles (sector l = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .grid import Quadrature, build_grid, make_quadrature, tail_estimate
from .operator import laplacian_jet
from .params import OperatorParams, ParameterError
from .testfn import RadialProfile, tensor_norms_from_derivatives

TAIL_TOL = 1e-10


class TailError(ArithmeticError):
    """The truncated domain misses more mass than the tolerance allows."""


class ThresholdError(ValueError):
    """lambda is below the accretivity threshold lambda0."""


# ---------------------------------------------------------------------------
# sampled profiles


class Sampled:
    """A profile evaluated once at the quadrature points, with derived fields."""

    def __init__(self, u: RadialProfile, quad: Quadrature):
        self.u = u
        self.quad = quad
        self.r = quad.points
        self.N = quad.N
        self.d = u.derivatives(self.r)
        self.Lu, self.dLu, _, self.L2u = laplacian_jet(self.d, self.r, self.N, 0.0)
        self._tensors = None

    @property
    def f(self):
        return self.d[0]

    @property
    def grad(self):
        return np.abs(self.d[1])

    @property
    def tensors(self):
        """``(|Du|, |D^2u|, |D^3u|, |D^4u|)``."""
        if self._tensors is None:
            self._tensors = tensor_norms_from_derivatives(self.d, self.r, self.N)
        return self._tensors

    def integral(self, vals) -> float:
        """``int_{R^N} vals dx`` for a radial integrand sampled at the points."""
        q = self.quad
        terms = q.point_weights * np.asarray(vals, dtype=float) * self.r ** (self.N - 1)
        bad = ~np.isfinite(terms)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ArithmeticError(f"non-finite integrand at r={self.r[i]:.6g}")
        return math.fsum(terms) * q.surface_measure

    def norm(self, vals) -> float:
        """L^2(R^N) norm of a sampled radial function."""
        return math.sqrt(max(self.integral(np.asarray(vals) ** 2), 0.0))


def sample(u, quad: Quadrature) -> Sampled:
    if isinstance(u, Sampled):
        if u.quad is not quad:
            raise ValueError("sampled profile belongs to a different quadrature")
        return u
    return Sampled(u, quad)


def default_quadrature(N: int) -> Quadrature:
    return make_quadrature(build_grid(), N)


def check_tails(u: RadialProfile, params: OperatorParams, quad: Quadrature,
                tol: float = TAIL_TOL) -> float:
    """Largest tail-to-mass ratio over the weights used by the norms; raises above tol."""
    worst = 0.0
    s = sample(u, quad)
    probes = [(-8.0, 0), (0.0, 4), (4.0 * params.beta, 0),
              (4.0 * params.alpha, 4)]
    for sigma, order in probes:
        tail = tail_estimate(u, sigma, quad.grid, quad.N, order)
        if tail == 0:
            continue
        mass = s.integral(s.r ** sigma * s.d[0] ** 2) + 1.0
        ratio = tail / mass
        worst = max(worst, ratio)
        if not ratio <= tol:
            raise TailError(f"tail estimate {tail:.3e} (sigma={sigma}, order={order}) "
                            f"exceeds {tol:g} relative to on-grid mass; widen the grid")
    return worst


# ---------------------------------------------------------------------------
# the form


@dataclass(frozen=True)
class FormValue:
    value: complex
    diffusion: float        # int a^2 Du Dv
    drift: float            # int 2 grad(a^2).grad(v) Du
    lap_coeff: float        # int Lap(a^2) v Du
    potential: float        # int (V^2 + lam) u v

    @property
    def addends(self):
        return (self.diffusion, self.drift, self.lap_coeff, self.potential)

    def to_dict(self) -> dict:
        return {"value": float(np.real(self.value)), "imag": float(np.imag(self.value)),
                "diffusion": self.diffusion, "drift": self.drift,
                "lap_coeff": self.lap_coeff, "potential": self.potential}


def _form_parts(su: Sampled, sv: Sampled, params: OperatorParams):
    r = su.r
    al, N = params.alpha, params.N
    a2 = params.a2(r)
    drift_coeff = 4 * al * (1 + r ** al) * r ** (al - 2)
    lap_coeff = 2 * al * ((2 * al - 2 + N) * r ** (2 * al - 2) + (al - 2 + N) * r ** (al - 2))
    t1 = su.integral(a2 * su.Lu * sv.Lu)
    t2 = su.integral(drift_coeff * r * sv.d[1] * su.Lu)
    t3 = su.integral(lap_coeff * sv.f * su.Lu)
    t4 = su.integral((params.V2(r) + params.lam) * su.f * sv.f)
    return t1, t2, t3, t4


def eval_form(u, v, params: OperatorParams, quad: Optional[Quadrature] = None,
              check: bool = True) -> FormValue:
    params.require_dim(5)
    quad = quad or default_quadrature(params.N)
    if check:
        check_tails(u.u if isinstance(u, Sampled) else u, params, quad)
        check_tails(v.u if isinstance(v, Sampled) else v, params, quad)
    su, sv = sample(u, quad), sample(v, quad)
    parts = _form_parts(su, sv, params)
    return FormValue(math.fsum(parts), *parts)


def pairing_Au_v(u, v, params: OperatorParams, quad: Quadrature) -> float:
    """``int (A u + lam u) v`` from the closed-form operator."""
    su, sv = sample(u, quad), sample(v, quad)
    r = su.r
    Au = params.a2(r) * su.L2u + params.V2(r) * su.f
    return su.integral((Au + params.lam * su.f) * sv.f)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class DNorm:
    diffusion: float    # ||(1 + r^alpha) Delta u||
    gradient: float     # || r^(alpha-1) grad u ||
    hardy: float        # || r^(alpha-2) u ||
    potential: float    # || V u ||
    l2: float

    @property
    def addends(self):
        return (self.diffusion, self.gradient, self.hardy, self.potential, self.l2)

    @property
    def value(self) -> float:
        return math.fsum(self.addends)

    def to_dict(self) -> dict:
        return {"value": self.value, "diffusion": self.diffusion, "gradient": self.gradient,
                "hardy": self.hardy, "potential": self.potential, "l2": self.l2}


@dataclass(frozen=True)
class D2Norm:
    potential: float                  # ||V^2 u||
    weighted: tuple                   # ||r^(2 alpha - h) D^(4-h) u||, h = 0..4
    h4: float                         # ||u||_{H^4}
    domain_claim: bool                # N > 8

    @property
    def addends(self):
        return (self.potential,) + tuple(self.weighted) + (self.h4,)

    @property
    def value(self) -> float:
        return math.fsum(self.addends)

    def to_dict(self) -> dict:
        return {"value": self.value, "potential": self.potential,
                "weighted": list(self.weighted), "h4": self.h4,
                "domain_claim": self.domain_claim}


def d_norm(u, params: OperatorParams, quad: Optional[Quadrature] = None) -> DNorm:
    params.require_dim(5)
    quad = quad or default_quadrature(params.N)
    s = sample(u, quad)
    r, al = s.r, params.alpha
    return DNorm(s.norm(params.a(r) * s.Lu), s.norm(r ** (al - 1) * s.grad),
                 s.norm(r ** (al - 2) * s.f), s.norm(params.V(r) * s.f), s.norm(s.f))


def weighted_derivative_norms(s: Sampled, base: float) -> tuple:
    """``||r^(base - h) D^(4-h) u||`` for h = 0..4 (h = 4 is ``r^(base-4) u``)."""
    t = s.tensors
    fields = [t[3], t[2], t[1], t[0], np.abs(s.f)]
    return tuple(s.norm(s.r ** (base - h) * fields[h]) for h in range(5))


def h4_norm(s: Sampled) -> float:
    t = s.tensors
    return math.sqrt(math.fsum(s.norm(x) ** 2 for x in (s.f,) + tuple(t)))


def d2_norm(u, params: OperatorParams, quad: Optional[Quadrature] = None) -> D2Norm:
    params.require_dim(5)
    quad = quad or default_quadrature(params.N)
    s = sample(u, quad)
    return D2Norm(s.norm(params.V2(s.r) * s.f),
                  weighted_derivative_norms(s, 2 * params.alpha),
                  h4_norm(s), params.N > 8)


def form_norm_sq(u, params: OperatorParams, quad: Optional[Quadrature] = None) -> float:
    """``||u||_a^2 = Re a_lam(u, u) + ||u||^2``."""
    quad = quad or default_quadrature(params.N)
    s = sample(u, quad)
    return float(np.real(eval_form(s, s, params, quad, check=False).value)) + s.norm(s.f) ** 2


# ---------------------------------------------------------------------------
# checks


def form_identity_residual(u, v, params: OperatorParams,
                           quad: Optional[Quadrature] = None) -> float:
    """``|a_lam(u, v) - int (A u + lam u) v| / (||u||_D ||v||_D)``."""
    quad = quad or default_quadrature(params.N)
    su, sv = sample(u, quad), sample(v, quad)
    lhs = float(np.real(eval_form(su, sv, params, quad, check=False).value))
    rhs = pairing_Au_v(su, sv, params, quad)
    scale = d_norm(su, params, quad).value * d_norm(sv, params, quad).value
    if scale == 0:
        return 0.0
    return abs(lhs - rhs) / scale


def accretivity_floor(s: Sampled, params: OperatorParams) -> float:
    r, al = s.r, params.alpha
    return (0.25 * s.norm(params.a(r) * s.Lu) ** 2
            + s.norm(r ** (al - 1) * s.grad) ** 2
            + s.norm(r ** (al - 2) * s.f) ** 2
            + 0.5 * s.norm(params.V(r) * s.f) ** 2
            + s.norm(s.f) ** 2)


def accretivity_gap(u, params: OperatorParams, quad: Optional[Quadrature] = None) -> float:
    """``Re a_lam(u, u)`` minus the lower bound of the accretivity estimate."""
    params.require_dim(5)
    if params.lambda0 is None:
        raise ThresholdError("lambda0 unknown; compute it with analysis.lambda0_search")
    if params.lam < params.lambda0:
        raise ThresholdError(f"lambda={params.lam} is below lambda0={params.lambda0}; "
                             "use analysis.lambda0_search")
    quad = quad or default_quadrature(params.N)
    s = sample(u, quad)
    val = float(np.real(eval_form(s, s, params, quad, check=False).value))
    return val - accretivity_floor(s, params)


def continuity_ratio(u, v, params: OperatorParams,
                     quad: Optional[Quadrature] = None) -> float:
    quad = quad or default_quadrature(params.N)
    su, sv = sample(u, quad), sample(v, quad)
    du, dv = d_norm(su, params, quad).value, d_norm(sv, params, quad).value
    if du == 0 or dv == 0:
        raise ZeroDivisionError("continuity ratio undefined for a zero function")
    val = eval_form(su, sv, params, quad, check=False).value
    return abs(val) / (du * dv)


def continuity_bound(u, v, params: OperatorParams,
                     quad: Optional[Quadrature] = None) -> float:
    """Right side of the term-by-term continuity estimate (before the final C)."""
    quad = quad or default_quadrature(params.N)
    su, sv = sample(u, quad), sample(v, quad)
    r, al, N = su.r, params.alpha, params.N
    a = params.a(r)
    nu = su.norm
    return (nu(a * su.Lu) * nu(a * sv.Lu)
            + 4 * al * nu(a * su.Lu) * nu(r ** (al - 1) * sv.grad)
            + 2 * al * (2 * al - 2 + N) * nu(r ** al * su.Lu) * nu(r ** (al - 2) * sv.f)
            + 2 * al * (al - 2 + N) * nu(su.Lu) * nu(r ** (al - 2) * sv.f)
            + nu(params.V(r) * su.f) * nu(params.V(r) * sv.f)
            + params.lam * nu(su.f) * nu(sv.f))
