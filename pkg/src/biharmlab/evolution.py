"""Time stepping for ``u' = -(A + lambda) u`` on one sector.

Steps are taken in the symmetric variable ``y = W^(1/2) u / a``, where the
sector operator becomes the banded SPD matrix ``C`` of
:class:`~biharmlab.operator.SectorOperator` (``C = D A D^-1``).  Implicit
Euler then solves ``(I + dt (C + lambda)) y+ = y`` with one banded Cholesky
factor per run.  The Euclidean norm of y is the M-weighted norm of u;
contraction is reported in the plain ``L^2(r^(N-1) dr)`` norm.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg

from .analysis.reports import InequalityReport
from .operator import SectorOperator
from .params import ParameterError

IMPLICIT_EULER = "implicit-euler"
CRANK_NICOLSON = "crank-nicolson"
SCHEMES = (IMPLICIT_EULER, CRANK_NICOLSON)
CONTRACTION_RTOL = 1e-12
DECAY_GAP_EFOLDS = 8.0
SCHEMA_VERSION = "1.0"


class EvolutionError(ArithmeticError):
    pass


def _scheme(name: str) -> str:
    key = name.lower().replace("_", "-")
    aliases = {"ie": IMPLICIT_EULER, "euler": IMPLICIT_EULER, "cn": CRANK_NICOLSON}
    key = aliases.get(key, key)
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEMES}")
    return key


def _shift(op: SectorOperator, lam: Optional[float]) -> float:
    lam = op.params.lam if lam is None else float(lam)
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    return lam


class Stepper:
    """Factored one-step map for fixed ``(op, dt, lambda, scheme)``."""

    def __init__(self, op: SectorOperator, dt: float, lam: Optional[float] = None,
                 scheme: str = IMPLICIT_EULER):
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.op, self.dt, self.lam = op, float(dt), _shift(op, lam)
        self.scheme = _scheme(scheme)
        self.theta = 1.0 if self.scheme == IMPLICIT_EULER else 0.5
        self._d = np.sqrt(op.weights) / op.a
        ab = self.theta * self.dt * op.C_upper()
        ab[-1] += 1.0 + self.theta * self.dt * self.lam
        try:
            self._chol = linalg.cholesky_banded(ab, lower=False)
        except linalg.LinAlgError as exc:
            raise EvolutionError(
                f"step matrix not positive definite (dt={dt}, lambda={self.lam}, "
                f"l={op.sector.l}, n={op.n}): {exc}") from exc

    def step_sym(self, y: np.ndarray) -> np.ndarray:
        if self.scheme == CRANK_NICOLSON:
            y = y - 0.5 * self.dt * (self.op.C @ y + self.lam * y)
        return linalg.cho_solve_banded((self._chol, False), y)

    def step(self, u: np.ndarray) -> np.ndarray:
        return self.step_sym(self._d * u) / self._d


def step(u: np.ndarray, dt: float, op: SectorOperator, lam: Optional[float] = None,
         scheme: str = IMPLICIT_EULER) -> np.ndarray:
    """One step of the chosen scheme for ``u' = -(A + lambda) u``."""
    return Stepper(op, dt, lam, scheme).step(np.asarray(u, dtype=float))


class SpectralPropagator:
    """``exp(-t (A + lambda))`` from a full eigendecomposition of ``C``."""

    def __init__(self, op: SectorOperator):
        self.op = op
        self.mu, self.Q = linalg.eigh(op.C.toarray(), driver="ev")
        self._d = np.sqrt(op.weights) / op.a

    def __call__(self, u: np.ndarray, t: float, lam: float = 0.0) -> np.ndarray:
        c = self.Q.T @ (self._d * u)
        return (self.Q @ (np.exp(-t * (self.mu + lam)) * c)) / self._d


@dataclass
class TrajectoryResult:
    params: dict
    sector: int
    scheme: str
    dt: float
    lam: float
    times: np.ndarray
    norms: np.ndarray                  # plain L^2(r^(N-1) dr)
    m_norms: np.ndarray                # M-weighted
    energy: np.ndarray                 # (u, (A + lambda) u)
    final: np.ndarray = field(repr=False)
    u0: np.ndarray = field(repr=False)
    decay: Optional[dict] = None

    def to_dict(self, include_state: bool = False) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "kind": "trajectory",
               "params": self.params, "sector": self.sector, "scheme": self.scheme,
               "dt": self.dt, "lambda": self.lam, "steps": int(len(self.times) - 1),
               "t_final": float(self.times[-1]),
               "norm_initial": float(self.norms[0]), "norm_final": float(self.norms[-1]),
               "decay": self.decay}
        if include_state:
            out["final_state"] = [float(x) for x in self.final]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "norm", "m_norm", "energy"])
        for row in zip(self.times, self.norms, self.m_norms, self.energy):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _energy(op: SectorOperator, u: np.ndarray, lam: float) -> float:
    return float(np.dot(op.weights * u, op.A @ u + lam * u))


def evolve(u0: np.ndarray, T: float, dt: float, op: SectorOperator,
           lam: Optional[float] = None, scheme: str = IMPLICIT_EULER) -> TrajectoryResult:
    """March ``round(T / dt)`` steps from ``u0``, recording norms and energy."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (op.n,):
        raise ValueError(f"initial data must have shape ({op.n},), got {u0.shape}")
    stepper = Stepper(op, dt, lam, scheme)
    nsteps = max(1, int(round(T / dt)))
    norms, mnorms, energy = [op.w_norm(u0)], [op.m_norm(u0)], [_energy(op, u0, stepper.lam)]
    d = stepper._d
    y = d * u0
    for k in range(nsteps):
        y = stepper.step_sym(y)
        u = y / d
        nu = op.w_norm(u)
        if not math.isfinite(nu):
            raise EvolutionError(f"non-finite norm at step {k + 1}")
        norms.append(nu)
        mnorms.append(float(np.linalg.norm(y)))
        energy.append(_energy(op, u, stepper.lam))
    times = dt * np.arange(nsteps + 1)
    return TrajectoryResult(op.params.to_dict(), op.sector.l, stepper.scheme, float(dt),
                            stepper.lam, times, np.array(norms), np.array(mnorms),
                            np.array(energy), y / d, u0)


def default_timing(mu1: float, lam: float) -> tuple:
    """``(dt, T) = (0.1, 10) / (mu1 + lambda)``."""
    rate = mu1 + lam
    return 0.1 / rate, 10.0 / rate


# ---------------------------------------------------------------------------
# checks


def contraction_check(traj: TrajectoryResult, lambda0: Optional[float] = None,
                      rtol: float = CONTRACTION_RTOL) -> InequalityReport:
    """``||u_(n+1)|| <= ||u_n|| (1 + rtol)`` at every step.

    Asserted for implicit Euler only; Crank-Nicolson results are reported
    with an infinite tolerance since the scheme need not be monotone.
    """
    lambda0 = traj.params.get("lambda0") if lambda0 is None else lambda0
    if lambda0 is not None and traj.lam < lambda0:
        raise ParameterError(f"contraction check needs lambda >= lambda0={lambda0}, "
                             f"got {traj.lam}")
    n = traj.norms
    if len(n) < 2 or n[0] == 0:
        return InequalityReport(f"contraction[{traj.scheme}]", 0.0, 0.0,
                                details={"steps": int(len(n) - 1), "trivial": True})
    growth = (n[1:] - n[:-1] * (1 + rtol)) / n[0]
    k = int(np.argmax(growth))
    worst = float(growth[k])
    asserted = traj.scheme == IMPLICIT_EULER
    bad = {"step": k + 1, "before": float(n[k]), "after": float(n[k + 1])} if worst > 0 else None
    return InequalityReport(f"contraction[{traj.scheme}]", -max(worst, 0.0) + 0.0,
                            0.0 if asserted else math.inf, bad,
                            details={"steps": int(len(n) - 1), "asserted": asserted,
                                     "max_step_ratio": float(np.max(n[1:] / n[:-1])),
                                     "violations": int(np.sum(growth > 0))})


def decay_rate(traj: TrajectoryResult, window: tuple = (0.5, 1.0),
               norm: str = "plain") -> float:
    """Least-squares slope of ``log ||u(t)||`` over the late part of the run."""
    vals = traj.norms if norm == "plain" else traj.m_norms
    T = traj.times[-1]
    sel = (traj.times >= window[0] * T) & (traj.times <= window[1] * T)
    if sel.sum() < 3 or np.any(vals[sel] <= 0):
        raise EvolutionError("insufficient decay window")
    if np.log(vals[0] / vals[-1]) < 3:
        raise EvolutionError("run covers fewer than 3 e-foldings")
    return float(np.polyfit(traj.times[sel], np.log(vals[sel]), 1)[0])


def decay_horizon(mu1: float, lam: float, mu2: Optional[float] = None) -> float:
    """Run length for slope fits.

    The fit window starts at T/2; with the second eigenvalue known, T is
    stretched until the second mode has decayed by ``e^-8`` relative to the
    first there.
    """
    T = default_timing(mu1, lam)[1]
    if mu2 is not None and mu2 > mu1:
        T = max(T, 2 * DECAY_GAP_EFOLDS / (mu2 - mu1))
    return T


def decay_study(u0: np.ndarray, op: SectorOperator, mu1: float,
                lam: Optional[float] = None, dt: Optional[float] = None,
                T: Optional[float] = None, norm: str = "plain",
                mu2: Optional[float] = None) -> dict:
    """Implicit-Euler slopes at dt and dt/2, Richardson-extrapolated to dt -> 0."""
    lam = _shift(op, lam)
    dt = dt or default_timing(mu1, lam)[0]
    T = T or decay_horizon(mu1, lam, mu2)
    s1 = decay_rate(evolve(u0, T, dt, op, lam), norm=norm)
    s2 = decay_rate(evolve(u0, T, dt / 2, op, lam), norm=norm)
    extrap = 2 * s2 - s1
    ref = -(mu1 + lam)
    return {"slope_dt": s1, "slope_dt2": s2, "slope_extrapolated": extrap,
            "reference": ref, "relative_error": abs(extrap - ref) / abs(ref),
            "dt": dt, "T": T}


def decay_check(u0: np.ndarray, op: SectorOperator, mu1: float,
                lam: Optional[float] = None, tol: float = 0.02,
                mu2: Optional[float] = None) -> InequalityReport:
    study = decay_study(u0, op, mu1, lam, mu2=mu2)
    return InequalityReport("decay-rate", tol - study["relative_error"], 0.0,
                            details=study)


def smoothing_check(traj: TrajectoryResult, op: SectorOperator, mu1: float,
                    factors: Sequence[float] = tuple(2.0 ** -k for k in range(0, 11)),
                    propagator: Optional[SpectralPropagator] = None) -> InequalityReport:
    """``t ||A u(t)|| / ||u0||`` over dyadic ``t`` in ``[1e-4, 1e-1] / mu1``.

    Uses the exact propagator so that t can go far below the run's step.
    A finite bound is required; its spread over t is reported only.
    """
    prop = propagator or SpectralPropagator(op)
    n0 = op.w_norm(traj.u0)
    if n0 == 0:
        return InequalityReport("smoothing", 0.0, 0.0, details={"trivial": True})
    ts = sorted({1e-1 * f / mu1 for f in factors if 1e-1 * f >= 1e-4})
    vals = []
    for t in ts:
        u = prop(traj.u0, t, traj.lam)
        vals.append(t * op.w_norm(op.A @ u + traj.lam * u) / n0)
    vals = np.array(vals)
    finite = bool(np.all(np.isfinite(vals)))
    return InequalityReport("smoothing", 0.0 if finite else -math.inf, 0.0,
                            details={"t": ts, "ratio": vals.tolist(),
                                     "bound": float(vals.max()) if finite else math.inf,
                                     "spread": float(vals.max() / max(vals.min(), 1e-300)),
                                     "finite": finite},
                            requirements=["finite"])


def eigenvector_step_check(op: SectorOperator, f: np.ndarray, mu: float, dt: float,
                           lam: Optional[float] = None, tol: float = 1e-8) -> InequalityReport:
    """One implicit-Euler step scales an eigenvector by ``1 / (1 + dt (mu + lambda))``."""
    lam = _shift(op, lam)
    g = step(f, dt, op, lam)
    expect = f / (1 + dt * (mu + lam))
    rel = op.w_norm(g - expect) / op.w_norm(expect)
    return InequalityReport("eigenvector-step", -rel, tol, details={"relative": rel})


def taylor_check(u: np.ndarray, op: SectorOperator, dt: float,
                 lam: Optional[float] = None) -> dict:
    """Defect of one step against ``u - dt (A + lambda) u`` at dt and dt/2.

    The observed order of the defect should be close to 2.
    """
    lam = _shift(op, lam)
    Au = op.A @ u + lam * u

    def defect(h):
        return op.w_norm(step(u, h, op, lam) - (u - h * Au))

    d1, d2 = defect(dt), defect(dt / 2)
    return {"defect_dt": d1, "defect_dt2": d2,
            "order": math.log2(d1 / d2) if d2 > 0 and d1 > 0 else math.nan}


def lambda_shift_check(u0: np.ndarray, op: SectorOperator, t: float, lam: float,
                       propagator: Optional[SpectralPropagator] = None,
                       tol: float = 1e-8) -> InequalityReport:
    """``e^(lambda t) exp(-t (A + lambda)) u0 = exp(-t A) u0`` for the exact propagator.

    The implicit-Euler discrepancy of the same identity is reported; it is
    a consistency error of order dt, not a failure.
    """
    prop = propagator or SpectralPropagator(op)
    shifted = math.exp(lam * t) * prop(u0, t, lam)
    plain = prop(u0, t, 0.0)
    rel = op.w_norm(shifted - plain) / max(op.w_norm(plain), 1e-300)
    return InequalityReport("lambda-shift", -rel, tol, details={"relative": rel, "t": t,
                                                                "lambda": lam})


def semigroup_check(u0: np.ndarray, op: SectorOperator, T: float, dt: float,
                    lam: Optional[float] = None,
                    propagator: Optional[SpectralPropagator] = None) -> InequalityReport:
    """Composition and scheme order.

    ``evolve(u0, 2T)`` must equal ``evolve(evolve(u0, T), T)`` to rounding.
    Against the exact propagator at 2T, implicit Euler must show order ~1 and
    Crank-Nicolson order ~2 as dt halves (accepted within 0.3 of the nominal
    order).
    """
    lam = _shift(op, lam)
    prop = propagator or SpectralPropagator(op)
    whole = evolve(u0, 2 * T, dt, op, lam).final
    half = evolve(u0, T, dt, op, lam).final
    composed = evolve(half, T, dt, op, lam).final
    scale = max(op.w_norm(whole), 1e-300)
    comp_err = op.w_norm(whole - composed) / scale
    exact = prop(u0, 2 * T, lam)
    orders = {}
    for scheme, nominal in ((IMPLICIT_EULER, 1.0), (CRANK_NICOLSON, 2.0)):
        errs = [op.w_norm(evolve(u0, 2 * T, h, op, lam, scheme).final - exact)
                / max(op.w_norm(exact), 1e-300) for h in (dt, dt / 2, dt / 4)]
        order = math.log2(errs[1] / errs[2]) if errs[2] > 0 else math.inf
        orders[scheme] = {"errors": errs, "order": order, "nominal": nominal,
                          "ok": bool(order >= nominal - 0.3)}
    ok = all(v["ok"] for v in orders.values())
    return InequalityReport("semigroup", -comp_err, 1e-12,
                            details={"composition_error": comp_err, "orders": orders,
                                     "order_ok": ok},
                            requirements=["order_ok"])


def initial_profile(op: SectorOperator, profile: Callable) -> np.ndarray:
    return np.asarray(profile(op.r), dtype=float)
