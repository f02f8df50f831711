"""Family sweeps, empirical extrema and their local refinement."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..forms import Sampled, sample
from ..grid import Quadrature
from ..testfn import Combination, PowerGaussian, RadialProfile
from .reports import ConstantEstimate, relative_change

Ratio = Callable[[Sampled], float]

P_BOX = (4.0, 8.0)
LOG_SIGMA_BOX = (math.log(0.1), math.log(4.0))


def parallel_map(fn, items: Sequence, threads: int = 1) -> list:
    """Order-preserving map; results do not depend on the thread count."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


class Sweep:
    """A family sampled once on one quadrature."""

    def __init__(self, family: Sequence[RadialProfile], quad: Quadrature, threads: int = 1):
        self.family = list(family)
        self.quad = quad
        self.threads = threads
        self.samples: List[Sampled] = parallel_map(lambda u: sample(u, quad), self.family,
                                                   threads)

    def __len__(self):
        return len(self.samples)

    def values(self, fn: Callable[[Sampled], float]) -> np.ndarray:
        return np.array(parallel_map(fn, self.samples, self.threads), dtype=float)

    def prefix(self, size: int) -> "Sweep":
        out = Sweep.__new__(Sweep)
        out.family, out.quad, out.threads = self.family[:size], self.quad, self.threads
        out.samples = self.samples[:size]
        return out


def _extreme(vals: np.ndarray, direction: str) -> int:
    finite = np.where(np.isfinite(vals), vals, -np.inf if direction == "sup" else np.inf)
    return int(np.argmax(finite) if direction == "sup" else np.argmin(finite))


class SearchSpace:
    """Box-constrained parameterization of a test-function subfamily."""

    def __init__(self, boxes: Sequence[tuple], build: Callable[[np.ndarray], RadialProfile],
                 describe: Callable[[np.ndarray], dict]):
        self.boxes = [tuple(b) for b in boxes]
        self.build = build
        self.describe = describe

    def clip(self, x) -> np.ndarray:
        return np.array([min(max(v, lo), hi) for v, (lo, hi) in zip(x, self.boxes)])


def _pg(p, ls) -> PowerGaussian:
    return PowerGaussian(float(p), float(math.exp(ls)))


POWER_GAUSSIAN_SPACE = SearchSpace(
    (P_BOX, LOG_SIGMA_BOX), lambda z: _pg(z[0], z[1]),
    lambda z: {"family": "power-gaussian", "p": float(z[0]), "sigma": float(math.exp(z[1]))})

# cos(t) PG(p1, s1) + sin(t) PG(p2, s2); the ratios are scale invariant so
# t in [-pi/2, pi/2] covers every direction
PAIR_SPACE = SearchSpace(
    (P_BOX, LOG_SIGMA_BOX, P_BOX, LOG_SIGMA_BOX, (-math.pi / 2, math.pi / 2)),
    lambda z: Combination([(math.cos(z[4]), _pg(z[0], z[1])),
                           (math.sin(z[4]), _pg(z[2], z[3]))]),
    lambda z: {"family": "combination",
               "terms": [{"coeff": math.cos(z[4]), "family": "power-gaussian",
                          "p": float(z[0]), "sigma": float(math.exp(z[1]))},
                         {"coeff": math.sin(z[4]), "family": "power-gaussian",
                          "p": float(z[2]), "sigma": float(math.exp(z[3]))}]})


def coordinate_search(ratio: Ratio, quad: Quadrature, direction: str, space: SearchSpace,
                      start: Sequence[float], iters: int = 100, seed: int = 0,
                      step: float = 0.5) -> tuple:
    """Seeded coordinate search inside ``space``.

    One randomly chosen coordinate moves per iteration; the step halves
    after two failed iterations.  Returns ``(best value, best point)``.
    """
    rng = np.random.default_rng(seed)
    sign = 1.0 if direction == "sup" else -1.0
    x = space.clip(start)
    dim = len(x)

    def score(z):
        v = ratio(sample(space.build(z), quad))
        return sign * v if math.isfinite(v) else -math.inf

    best = score(x)
    h = np.full(dim, step)
    fails = 0
    for _ in range(iters):
        k = int(rng.integers(dim))
        improved = False
        for d in (+1.0, -1.0):
            z = x.copy()
            z[k] += d * h[k]
            z = space.clip(z)
            if np.array_equal(z, x):
                continue
            val = score(z)
            if val > best:
                x, best, improved = z, val, True
                break
        if not improved:
            fails += 1
            if fails >= 2:
                h *= 0.5
                fails = 0
        if np.all(h < 1e-4):
            break
    return sign * best, x


def coordinate_descent(ratio: Ratio, quad: Quadrature, direction: str,
                       start: tuple = (4.0, 1.0), iters: int = 100, seed: int = 0,
                       step: float = 0.5) -> tuple:
    """Coordinate search over power-Gaussians ``r^p exp(-sigma r^2)``.

    Moves in ``(p, log sigma)`` inside ``P_BOX x LOG_SIGMA_BOX``.
    Returns ``(best value, (p, sigma))``.
    """
    val, x = coordinate_search(ratio, quad, direction, POWER_GAUSSIAN_SPACE,
                               (start[0], math.log(start[1])), iters, seed, step)
    return val, (float(x[0]), float(math.exp(x[1])))


def _pair_start(u) -> Optional[tuple]:
    """Pair-space coordinates of a two-term power-Gaussian combination, if it is one."""
    if not isinstance(u, Combination) or len(u.terms) != 2:
        return None
    (c1, f1), (c2, f2) = u.terms
    if not (isinstance(f1, PowerGaussian) and isinstance(f2, PowerGaussian)):
        return None
    t = math.atan2(c2, c1)
    if t > math.pi / 2:
        t -= math.pi
    elif t < -math.pi / 2:
        t += math.pi
    return (f1.p, math.log(f1.sigma), f2.p, math.log(f2.sigma), t)


def estimate_constant(name: str, ratio: Ratio, sweep: Sweep, direction: str = "sup",
                      refine: bool = True, seed: int = 0, iters: int = 100,
                      doubled: Optional[Sweep] = None,
                      reference: Optional[float] = None) -> ConstantEstimate:
    """Family extremum of ``ratio``, refined by coordinate descent.

    ``doubled`` is a sweep over a family twice the size whose first half is
    ``sweep``; the stability figure is the relative change of the extremum.
    """
    vals = sweep.values(ratio)
    i = _extreme(vals, direction)
    value = float(vals[i])
    extremizer = sweep.family[i].describe()
    refined = False
    if refine:
        pg = [(j, u) for j, u in enumerate(sweep.family) if isinstance(u, PowerGaussian)]
        if pg:
            j0 = _extreme(np.array([vals[j] for j, _ in pg]), direction)
            start = (pg[j0][1].p, pg[j0][1].sigma)
            cd_val, (p, s) = coordinate_descent(ratio, sweep.quad, direction, start,
                                                iters=iters, seed=seed)
            better = cd_val > value if direction == "sup" else cd_val < value
            if better:
                value, refined = cd_val, True
                extremizer = {"family": "power-gaussian", "p": p, "sigma": s}
        pairs = [(j, _pair_start(u)) for j, u in enumerate(sweep.family)]
        pairs = [(j, z) for j, z in pairs if z is not None]
        if pairs:
            j0 = _extreme(np.array([vals[j] for j, _ in pairs]), direction)
            cd_val, z = coordinate_search(ratio, sweep.quad, direction, PAIR_SPACE,
                                          pairs[j0][1], iters=iters, seed=seed + 1)
            better = cd_val > value if direction == "sup" else cd_val < value
            if better:
                value, refined = cd_val, True
                extremizer = PAIR_SPACE.describe(z)
    stability = None
    if doubled is not None:
        dv = doubled.values(ratio)
        dval = float(dv[_extreme(dv, direction)])
        big = max(value, dval) if direction == "sup" else min(value, dval)
        stability = relative_change(value, big)
    fp = sweep.quad.grid.fingerprint()
    return ConstantEstimate(name, value, direction, len(sweep), fp, stability,
                            extremizer, refined, reference)
