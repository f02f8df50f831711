"""Closed-form radial test functions and the cutoff sequence.

Profiles are composed from :class:`~biharmlab.jets.Jet` operations, so
``derivatives(r)`` returns f, f', f'', f''', f'''' to machine precision.
Family members vanish like ``r^p`` (p >= 4) at the origin, standing in for
smooth functions compactly supported away from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .grid import Decay
from .jets import Jet, smooth_step_h, where

MIN_ADMISSIBLE_POWER = 4


def _check_r(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radial profiles are evaluated at r > 0 only")
    return r


class RadialProfile:
    """Base class: subclasses implement ``jet`` and set ``decay``."""

    decay: Decay = Decay(None)
    tag: str = "profile"

    def jet(self, x: Jet) -> Jet:
        raise NotImplementedError

    def derivatives(self, r) -> np.ndarray:
        """Stacked ``[f, f', f'', f''', f'''']`` at r (shape ``(5,) + r.shape``)."""
        r = _check_r(r)
        return self.jet(Jet.variable(r)).derivatives()

    def __call__(self, r):
        return self.derivatives(r)[0]

    @property
    def admissible(self) -> bool:
        """True when the origin behaviour keeps every weighted integral finite."""
        return self.decay.near is not None and self.decay.near >= MIN_ADMISSIBLE_POWER

    # algebra
    def __add__(self, other):
        return Combination([(1.0, self), (1.0, other)])

    def __mul__(self, c):
        if isinstance(c, RadialProfile):
            return Product(self, c)
        return Combination([(float(c), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return Combination([(-1.0, self)])

    def __sub__(self, other):
        return Combination([(1.0, self), (-1.0, other)])

    def scaled(self, s: float) -> "RadialProfile":
        return Dilation(self, s)

    def describe(self) -> dict:
        return {"family": self.tag}


@dataclass(eq=False)
class PowerGaussian(RadialProfile):
    """``r^p exp(-sigma r^2)``."""

    p: float
    sigma: float
    tag = "power-gaussian"

    def __post_init__(self):
        if self.p < 0 or self.sigma <= 0:
            raise ValueError(f"need p >= 0 and sigma > 0, got p={self.p}, sigma={self.sigma}")
        self.decay = Decay(float(self.p), ("gauss", float(self.sigma), float(self.p)))

    def jet(self, x):
        g = (x * x * (-self.sigma)).exp()
        return g if self.p == 0 else (x ** self.p) * g

    def describe(self):
        return {"family": self.tag, "p": self.p, "sigma": self.sigma}


@dataclass(eq=False)
class Rational(RadialProfile):
    """``r^p (1 + r^2)^(-q)``."""

    p: float
    q: float
    tag = "rational"

    def __post_init__(self):
        if self.p < 0 or self.q <= 0:
            raise ValueError(f"need p >= 0 and q > 0, got p={self.p}, q={self.q}")
        self.decay = Decay(float(self.p), ("power", float(self.p - 2 * self.q)))

    def jet(self, x):
        g = (x * x + 1.0) ** (-self.q)
        return g if self.p == 0 else (x ** self.p) * g

    def describe(self):
        return {"family": self.tag, "p": self.p, "q": self.q}


@dataclass(eq=False)
class Bump(RadialProfile):
    """``exp(-1/t - 1/(1-t))`` with ``t = (r - a)/(b - a)``, supported in the annulus ``a < r < b``."""

    a: float
    b: float
    tag = "bump"

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        self.decay = Decay(math.inf, ("compact", float(self.b)), float(self.a))

    def jet(self, x):
        t = (x - self.a) * (1.0 / (self.b - self.a))
        return smooth_step_h(t) * smooth_step_h(1.0 - t)

    def describe(self):
        return {"family": self.tag, "a": self.a, "b": self.b}


@dataclass(eq=False)
class Power(RadialProfile):
    """Bare ``r^p``; no decay, so only for pointwise operator checks."""

    p: float
    tag = "power"

    def __post_init__(self):
        self.decay = Decay(float(self.p), ("power", float(self.p)))

    def jet(self, x):
        return x ** self.p

    def describe(self):
        return {"family": self.tag, "p": self.p}


class Combination(RadialProfile):
    tag = "combination"

    def __init__(self, terms: Sequence[tuple]):
        flat = []
        for c, f in terms:
            if isinstance(f, Combination):
                flat.extend((c * c2, f2) for c2, f2 in f.terms)
            else:
                flat.append((float(c), f))
        self.terms = flat
        decay = flat[0][1].decay
        for _, f in flat[1:]:
            decay = decay.combine(f.decay)
        self.decay = decay

    def jet(self, x):
        out = None
        for c, f in self.terms:
            term = f.jet(x) * c
            out = term if out is None else out + term
        return out

    def describe(self):
        return {"family": self.tag,
                "terms": [{"coeff": c, **f.describe()} for c, f in self.terms]}


class Product(RadialProfile):
    tag = "product"

    def __init__(self, f: RadialProfile, g: RadialProfile):
        self.f, self.g = f, g
        self.decay = f.decay.times(g.decay)

    def jet(self, x):
        return self.f.jet(x) * self.g.jet(x)

    def describe(self):
        return {"family": self.tag, "factors": [self.f.describe(), self.g.describe()]}


class Dilation(RadialProfile):
    """``r -> f(s r)``."""

    tag = "dilation"

    def __init__(self, f: RadialProfile, s: float):
        if s <= 0:
            raise ValueError("dilation factor must be positive")
        self.f, self.s = f, float(s)
        d = f.decay
        far = d.far
        if far[0] == "gauss":
            far = ("gauss", far[1] * s * s, far[2])
        elif far[0] == "compact":
            far = ("compact", far[1] / s)
        self.decay = Decay(d.near, far, d.inner / s)

    def jet(self, x):
        return self.f.jet(x * self.s)

    def describe(self):
        return {"family": self.tag, "s": self.s, "of": self.f.describe()}


def eval_derivatives(f: RadialProfile, r):
    """Tuple ``(f, f', f'', f''', f'''')`` at r > 0."""
    return tuple(f.derivatives(r))


# ---------------------------------------------------------------------------
# Cartesian derivative tensors of u(x) = f(|x|)


def tensor_norms_from_derivatives(d: np.ndarray, r, N: int):
    """Frobenius norms ``(|Du|, |D^2u|, |D^3u|, |D^4u|)`` of a radial function.

    The expressions were obtained by exact Cartesian differentiation of
    ``f(|x|)`` at ``(r, 0, ..., 0)``; the test suite re-derives them
    symbolically.
    """
    _, f1, f2, f3, f4 = d
    r = np.asarray(r, dtype=float)
    n1 = N - 1
    q = f2 / r ** 2 - f1 / r ** 3
    d1 = np.abs(f1)
    d2 = np.sqrt(f2 ** 2 + n1 * (f1 / r) ** 2)
    d3 = np.sqrt(f3 ** 2 + 3 * n1 * (f2 / r - f1 / r ** 2) ** 2)
    d4sq = (f4 ** 2 + 6 * n1 * (f3 / r) ** 2 - 24 * n1 * (f3 / r) * q
            + 3 * n1 * (N + 9) * q ** 2)
    return d1, d2, d3, np.sqrt(np.maximum(d4sq, 0.0))


def cartesian_tensor_norms(f: RadialProfile, r, N: int):
    r = _check_r(r)
    return tensor_norms_from_derivatives(f.derivatives(r), r, N)


def radial_laplacian_from_derivatives(d: np.ndarray, r, N: int) -> np.ndarray:
    return d[2] + (N - 1) * d[1] / r


# ---------------------------------------------------------------------------
# cutoff sequence


def cutoff_profile(t: Jet) -> Jet:
    """Smooth ``phi`` with phi = 1 on [0, 1], phi = 0 on [2, inf)."""
    up = smooth_step_h(2.0 - t)
    down = smooth_step_h(t - 1.0)
    return up / (up + down)


class CutoffSequence(RadialProfile):
    """``phi_n``: 0 in B(1/n) and outside B(2n), 1 on B(n) minus B(2/n)."""

    tag = "cutoff"

    def __init__(self, n: int):
        if n < 2:
            # plateau B(n) \ B(2/n) is empty for n = 1
            raise ValueError(f"cutoff sequence starts at n = 2, got {n}")
        self.n = int(n)
        self.decay = Decay(0.0, ("compact", 2.0 * n), 1.0 / n)

    def jet(self, x):
        n = self.n
        r0 = x.c[0]
        inner = 1.0 - cutoff_profile(x * n)
        outer = cutoff_profile(x * (1.0 / n))
        one = Jet.constant(1.0, x.shape)
        out = where(r0 < 2.0 / n, inner, one)
        return where(r0 > n, outer, out)

    def describe(self):
        return {"family": self.tag, "n": self.n}


def make_cutoff(n: int) -> CutoffSequence:
    return CutoffSequence(n)


@dataclass
class CutoffBoundReport:
    ns: List[int]
    constants: List[float]          # sup_x |x|^k |D^k phi_n| over all n, k = 1..4
    per_n: dict
    spread: float                   # max relative spread of constants across n
    violations: list
    passed: bool

    def to_dict(self) -> dict:
        return {"ns": self.ns, "constants": self.constants, "per_n": self.per_n,
                "spread": self.spread, "violations": self.violations, "passed": self.passed}


def cutoff_bound_check(seqs: Iterable[CutoffSequence], samples: int = 4000,
                       N: int = 9, tol: float = 1e-12) -> CutoffBoundReport:
    """Sample the support and plateau conditions and the ``C/|x|^k`` derivative bounds."""
    seqs = list(seqs)
    per_n = {}
    violations = []
    for seq in seqs:
        n = seq.n
        r = np.geomspace(0.25 / n, 4.0 * n, samples)
        d = seq.derivatives(r)
        phi = d[0]
        if np.any(phi < -tol) or np.any(phi > 1 + tol):
            i = int(np.argmax((phi < -tol) | (phi > 1 + tol)))
            violations.append({"n": n, "r": float(r[i]), "kind": "range", "value": float(phi[i])})
        zero = (r <= 1.0 / n) | (r >= 2.0 * n)
        if np.any(np.abs(phi[zero]) > tol):
            i = int(np.argmax(np.abs(np.where(zero, phi, 0.0))))
            violations.append({"n": n, "r": float(r[i]), "kind": "support", "value": float(phi[i])})
        plateau = (r >= 2.0 / n) & (r <= n)
        if np.any(np.abs(phi[plateau] - 1) > tol):
            i = int(np.argmax(np.abs(np.where(plateau, phi - 1, 0.0))))
            violations.append({"n": n, "r": float(r[i]), "kind": "plateau", "value": float(phi[i])})
        norms = tensor_norms_from_derivatives(d, r, N)
        per_n[n] = [float(np.max(r ** (k + 1) * norms[k])) for k in range(4)]
    consts = [max(per_n[n][k] for n in per_n) for k in range(4)]
    spread = max(
        (max(per_n[n][k] for n in per_n) - min(per_n[n][k] for n in per_n)) / consts[k]
        for k in range(4)
    )
    finite = all(math.isfinite(c) for c in consts)
    return CutoffBoundReport([s.n for s in seqs], consts, per_n, spread, violations,
                             finite and not violations)


# ---------------------------------------------------------------------------
# families


def rational_q_min(p: float, N: int, alpha: float, beta: float) -> float:
    """Smallest q making every weighted norm we evaluate converge with room to spare.

    The worst far-field weights are ``|x|^(4 beta)`` (potential estimate) and
    ``|x|^(4 alpha - 8)`` against ``D^4 u``; we ask the squared integrand to
    fall off at least like ``r^-9``.
    """
    need = (2 * p + max(4 * beta, 4 * alpha - 8) + N + 8) / 4
    return float(max(p / 2 + 3, math.ceil(need)))


def base_family(N: int = 9, alpha: float = 1.0, beta: float = 2.0,
                powers: Sequence[int] = (4, 5, 6, 7, 8),
                sigmas: Sequence[float] = (0.25, 0.5, 1.0, 2.0),
                rational_powers: Sequence[int] = (4, 6),
                rational_extra: int = 2) -> List[RadialProfile]:
    members: List[RadialProfile] = [PowerGaussian(p, s) for p in powers for s in sigmas]
    for p in rational_powers:
        q0 = rational_q_min(p, N, alpha, beta)
        members.extend(Rational(p, q0 + j) for j in range(rational_extra))
    return members


def random_combinations(base: Sequence[RadialProfile], count: int,
                        seed: int = 0) -> List[RadialProfile]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        i, j = rng.choice(len(base), size=2, replace=False)
        c1, c2 = rng.uniform(-1.0, 1.0, size=2)
        if abs(c1) < 0.05:
            c1 = 0.05 if c1 >= 0 else -0.05
        out.append(Combination([(c1, base[i]), (c2, base[j])]))
    return out


def default_family(N: int = 9, alpha: float = 1.0, beta: float = 2.0,
                   n_random: int = 50, seed: int = 0) -> List[RadialProfile]:
    """Power-Gaussians, rationals and ``n_random`` seeded two-member combinations."""
    base = base_family(N, alpha, beta)
    return base + random_combinations(base, n_random, seed)


def family_of_size(size: int, N: int = 9, alpha: float = 1.0, beta: float = 2.0,
                   seed: int = 0) -> List[RadialProfile]:
    """First ``size`` members; larger sizes extend smaller ones (prefix stable)."""
    base = base_family(N, alpha, beta)
    # interleave so small families still span both decay types
    order = sorted(range(len(base)), key=lambda i: (i % 4, i))
    ordered = [base[i] for i in order]
    if size <= len(ordered):
        return ordered[:size]
    return ordered + random_combinations(base, size - len(base), seed)


def family_pairs(count: int, N: int = 9, alpha: float = 1.0, beta: float = 2.0,
                 seed: int = 0) -> List[tuple]:
    """``count`` seeded pairs from a fixed pool; larger counts extend smaller ones."""
    fam = default_family(N, alpha, beta, n_random=max(count, 50), seed=seed)
    rng = np.random.default_rng(seed + 7919)
    pairs = []
    for _ in range(count):
        i, j = rng.choice(len(fam), size=2, replace=False)
        pairs.append((fam[i], fam[j]))
    return pairs


def profile_from_spec(spec: dict) -> RadialProfile:
    kind = spec.get("family")
    if kind == "power-gaussian":
        return PowerGaussian(spec["p"], spec["sigma"])
    if kind == "rational":
        return Rational(spec["p"], spec["q"])
    if kind == "bump":
        return Bump(spec["a"], spec["b"])
    if kind == "power":
        return Power(spec["p"])
    raise ValueError(f"unknown family {kind!r}")
