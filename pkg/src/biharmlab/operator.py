"""The operator ``A = a^2 Delta^2 + V^2`` and its adjoint on spherical-harmonic sectors.

A function ``f(r) Y_l`` with ``Y_l`` a degree-l harmonic is mapped by the
Laplacian to ``(L_l f) Y_l`` where ``L_l f = f'' + (N-1) f'/r - kappa_l f/r^2``.
Since ``a`` and ``V`` are radial, ``A`` acts sector by sector.

Two realizations are provided:

* closed form on :class:`~biharmlab.testfn.RadialProfile` objects, exact up
  to rounding because the profiles carry exact derivatives;
* banded matrices on a geometric grid.  In ``s = ln r`` the grid is uniform
  and ``L_l = r^-(2+m) (d^2/ds^2 - nu^2) r^m`` with ``m = (N-2)/2`` and
  ``nu = l + m``, so a uniform five-point stencil gives a fourth-order
  ``L_l`` that is exactly symmetric in the weight ``W = h r^N``
  (the trapezoid rule for ``r^(N-1) dr``).  Values outside the grid are
  taken as zero, which is the clamped truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import sparse

from .grid import RadialGrid
from .params import OperatorParams, ParameterError
from .testfn import RadialProfile

MIN_ASSEMBLY_NODES = 64
HALF_BANDWIDTH = 4


class StencilError(ValueError):
    """Raised when a grid cannot support the requested stencil."""


# ---------------------------------------------------------------------------
# sectors


@dataclass(frozen=True)
class SectorIndex:
    l: int
    N: int

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise ValueError(f"sector index l must be a nonnegative integer, got {self.l}")
        if self.N < 2:
            raise ValueError(f"sector reduction needs N >= 2, got {self.N}")

    @property
    def kappa(self) -> float:
        return float(self.l * (self.l + self.N - 2))

    @property
    def multiplicity(self) -> int:
        """Dimension of the degree-l spherical harmonics on S^(N-1)."""
        l, N = self.l, self.N
        hi = math.comb(l + N - 1, l)
        lo = math.comb(l + N - 3, l - 2) if l >= 2 else 0
        return hi - lo

    def to_dict(self) -> dict:
        return {"l": self.l, "kappa": self.kappa, "multiplicity": self.multiplicity}


def as_sector(sector: Union[int, SectorIndex], N: int) -> SectorIndex:
    if isinstance(sector, SectorIndex):
        if sector.N != N:
            raise ValueError(f"sector built for N={sector.N}, operator has N={N}")
        return sector
    return SectorIndex(int(sector), int(N))


# ---------------------------------------------------------------------------
# finite-difference weights


def fornberg_weights(z: float, x, m: int) -> np.ndarray:
    """Weights for derivatives ``0..m`` at ``z`` from values at nodes ``x``.

    Row k of the result differentiates the interpolating polynomial through
    ``x`` k times and evaluates at ``z``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= m:
        raise StencilError(f"{n} nodes cannot resolve derivative order {m}")
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


# ---------------------------------------------------------------------------
# closed forms


def _eval_points(f: RadialProfile, r) -> tuple:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ParameterError("sector operators are evaluated at r > 0 only")
    return f.derivatives(r), r


def laplacian_jet(d, r, N: int, kappa: float):
    """``(L f, (L f)', (L f)'', L^2 f)`` from ``d = [f, f', ..., f'''']``."""
    f0, f1, f2, f3, f4 = d
    n1 = N - 1
    Lf = f2 + n1 * f1 / r - kappa * f0 / r ** 2
    dLf = f3 + n1 * (f2 / r - f1 / r ** 2) - kappa * (f1 / r ** 2 - 2 * f0 / r ** 3)
    ddLf = (f4 + n1 * (f3 / r - 2 * f2 / r ** 2 + 2 * f1 / r ** 3)
            - kappa * (f2 / r ** 2 - 4 * f1 / r ** 3 + 6 * f0 / r ** 4))
    L2f = ddLf + n1 * dLf / r - kappa * Lf / r ** 2
    return Lf, dLf, ddLf, L2f


def apply_sector_laplacian(f, sector, N: int, r=None) -> np.ndarray:
    """``L_l f`` at the points r.

    ``f`` is a profile (exact) or an array of samples at the nodes ``r``
    (five-point stencils built from the local spacing).
    """
    sec = as_sector(sector, N)
    if r is None:
        raise ValueError("evaluation points r are required")
    if isinstance(f, RadialProfile):
        d, r = _eval_points(f, r)
        return laplacian_jet(d, r, N, sec.kappa)[0]
    r = np.asarray(r, dtype=float)
    vals = np.asarray(f, dtype=float)
    if vals.shape != r.shape or r.ndim != 1:
        raise ValueError("sampled f must be a 1-D array matching r")
    n = len(r)
    if n < 5:
        raise StencilError(f"sampled Laplacian needs at least 5 nodes, got {n}")
    if np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise StencilError("nodes must be positive and strictly increasing")
    out = np.empty(n)
    for i in range(n):
        s = min(max(i - 2, 0), n - 5)
        w = fornberg_weights(r[i], r[s:s + 5], 2)
        v = vals[s:s + 5]
        out[i] = w[2] @ v + (N - 1) * (w[1] @ v) / r[i] - sec.kappa * vals[i] / r[i] ** 2
    return out


def apply_bilaplacian(f: RadialProfile, sector, N: int, r) -> np.ndarray:
    sec = as_sector(sector, N)
    d, r = _eval_points(f, r)
    return laplacian_jet(d, r, N, sec.kappa)[3]


def apply_A(f: RadialProfile, sector, params: OperatorParams, r) -> np.ndarray:
    """``(1 + r^alpha)^2 L_l^2 f + r^(2 beta) f``."""
    sec = as_sector(sector, params.N)
    d, r = _eval_points(f, r)
    L2f = laplacian_jet(d, r, params.N, sec.kappa)[3]
    return params.a2(r) * L2f + params.V2(r) * d[0]


@dataclass(frozen=True)
class DiffusionCoefficients:
    """Radial data of ``b = a^2 = 1 + 2 r^alpha + r^(2 alpha)``."""

    b: np.ndarray
    db: np.ndarray
    ddb: np.ndarray
    lap: np.ndarray
    dlap: np.ndarray
    bilap: np.ndarray


def diffusion_coefficients(params: OperatorParams, r) -> DiffusionCoefficients:
    r = np.asarray(r, dtype=float)
    N = params.N
    parts = [(1.0, 0.0), (2.0, params.alpha), (1.0, 2.0 * params.alpha)]
    b = db = ddb = lap = dlap = bilap = 0.0
    for c, g in parts:
        if g == 0:
            b = b + c
            continue
        c1 = g * (g - 2 + N)
        c2 = g * (g - 2) * (g - 2 + N) * (g - 4 + N)
        b = b + c * r ** g
        db = db + c * g * r ** (g - 1)
        ddb = ddb + c * g * (g - 1) * r ** (g - 2)
        lap = lap + c * c1 * r ** (g - 2)
        dlap = dlap + c * c1 * (g - 2) * r ** (g - 3)
        bilap = bilap + c * c2 * r ** (g - 4)
    z = np.zeros_like(r)
    return DiffusionCoefficients(*(z + v for v in (b, db, ddb, lap, dlap, bilap)))


def apply_adjoint(v: RadialProfile, sector, params: OperatorParams, r,
                  route: str = "expanded") -> np.ndarray:
    """Formal adjoint ``A* v = Delta^2(a^2 v) + V^2 v`` on a sector.

    ``route="expanded"`` evaluates the Leibniz expansion term by term with
    closed-form coefficients of ``a^2``; ``route="product"`` applies
    ``L_l^2`` to the product profile directly.  They agree to rounding.
    """
    sec = as_sector(sector, params.N)
    d, r = _eval_points(v, r)
    N, kappa = params.N, sec.kappa
    if route == "product":
        b = _SquaredDiffusion(params)
        prod = b * v
        L2 = laplacian_jet(prod.derivatives(r), r, N, kappa)[3]
        return L2 + params.V2(r) * d[0]
    if route != "expanded":
        raise ValueError(f"unknown route {route!r}")
    Lf, dLf, _, L2f = laplacian_jet(d, r, N, kappa)
    f0, f1, f2 = d[0], d[1], d[2]
    co = diffusion_coefficients(params, r)
    tr = co.ddb * f2 + (co.db / r) * (Lf - f2)
    return (co.b * L2f + 4 * co.db * dLf + 2 * co.lap * Lf + 4 * tr
            + 4 * co.dlap * f1 + co.bilap * f0 + params.V2(r) * f0)


class _SquaredDiffusion(RadialProfile):
    tag = "diffusion"

    def __init__(self, params: OperatorParams):
        self.alpha = params.alpha

    def jet(self, x):
        return ((x ** self.alpha) + 1.0) ** 2


# ---------------------------------------------------------------------------
# banded assembly


def to_upper_band(mat, u: int = HALF_BANDWIDTH) -> np.ndarray:
    """LAPACK upper storage ``ab[u + i - j, j] = mat[i, j]`` of a symmetric band matrix."""
    mat = sparse.csr_matrix(mat)
    n = mat.shape[0]
    ab = np.zeros((u + 1, n))
    for k in range(u + 1):
        ab[u - k, k:] = mat.diagonal(k)
    return ab


def band_matvec_upper(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    u = ab.shape[0] - 1
    y = ab[u] * x
    for k in range(1, u + 1):
        d = ab[u - k, k:]
        y[:-k] += d * x[k:]
        y[k:] += d * x[:-k]
    return y


@dataclass(eq=False)
class SectorOperator:
    """Banded sector discretization and the generalized pair ``B f = mu M f``.

    ``A = M^-1 B`` with ``B = L L + V_tilde^2`` and ``M = a^-2``; ``W B`` is
    symmetric.  ``C = a K K a + V^2`` with ``K = W^(1/2) L W^(-1/2)`` is the
    equivalent symmetric standard matrix, ``C y = mu y`` for
    ``f = a W^(-1/2) y``.
    """

    params: OperatorParams
    sector: SectorIndex
    grid: RadialGrid
    L: sparse.csr_matrix = field(repr=False)
    A: sparse.csr_matrix = field(repr=False)
    B: sparse.csr_matrix = field(repr=False)
    M_diag: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    C: sparse.csr_matrix = field(repr=False)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def n(self) -> int:
        return self.grid.n_nodes

    @property
    def a(self) -> np.ndarray:
        return self.params.a(self.r)

    @property
    def bandwidth(self) -> int:
        return 2 * HALF_BANDWIDTH + 1

    # dense/banded views ----------------------------------------------------
    @property
    def L_band(self) -> sparse.csr_matrix:
        return self.L

    @property
    def A_band(self) -> sparse.csr_matrix:
        return self.A

    @property
    def B_band(self) -> sparse.csr_matrix:
        return self.B

    def C_upper(self) -> np.ndarray:
        return to_upper_band(self.C)

    def WB(self) -> sparse.csr_matrix:
        return sparse.diags(self.weights) @ self.B

    def symmetry_defect(self) -> float:
        """``||W B - (W B)^T|| / ||W B||`` in the max norm."""
        wb = self.WB()
        return float(abs(wb - wb.T).max() / abs(wb).max())

    # coordinate changes ----------------------------------------------------
    def to_symmetric(self, f: np.ndarray) -> np.ndarray:
        return f * np.sqrt(self.weights) / self.a

    def from_symmetric(self, y: np.ndarray) -> np.ndarray:
        return y * self.a / np.sqrt(self.weights)

    # norms -----------------------------------------------------------------
    def w_norm(self, f: np.ndarray) -> float:
        """Discrete ``L^2(r^(N-1) dr)`` norm."""
        return float(np.sqrt(np.sum(self.weights * np.abs(f) ** 2)))

    def m_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * self.M_diag * np.abs(f) ** 2)))

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.A @ f

    def to_dict(self) -> dict:
        return {"sector": self.sector.to_dict(), "grid": self.grid.to_dict(),
                "bandwidth": self.bandwidth}


def log_stencil(h: float) -> np.ndarray:
    """Five-point second-derivative weights on a uniform step h."""
    return fornberg_weights(0.0, h * np.arange(-2, 3), 2)[2]


def assemble(params: OperatorParams, grid: RadialGrid,
             sector: Union[int, SectorIndex] = 0) -> SectorOperator:
    """Assemble the banded sector operator on a geometric grid."""
    sec = as_sector(sector, params.N)
    n = grid.n_nodes
    if n < MIN_ASSEMBLY_NODES:
        raise StencilError(f"assembly needs at least {MIN_ASSEMBLY_NODES} nodes, got {n}")
    r = grid.nodes
    s = np.log(r)
    h = grid.log_step
    if not np.allclose(np.diff(s), h, rtol=1e-8, atol=0):
        raise StencilError("assembly requires a geometric (log-uniform) grid")
    m = (params.N - 2) / 2.0
    nu2 = (sec.l + m) ** 2
    st = log_stencil(h)
    T = sparse.diags([np.full(n - abs(k), st[k + 2]) for k in range(-2, 3)],
                     list(range(-2, 3)), shape=(n, n)) - nu2 * sparse.identity(n)
    L = (sparse.diags(r ** (-(2.0 + m))) @ T @ sparse.diags(r ** m)).tocsr()
    W = h * r ** params.N
    a = params.a(r)
    a2 = a * a
    V2 = params.V2(r)
    LL = (L @ L).tocsr()
    A = (sparse.diags(a2) @ LL + sparse.diags(V2)).tocsr()
    B = (LL + sparse.diags(V2 / a2)).tocsr()
    sw = np.sqrt(W)
    K = sparse.diags(sw) @ L @ sparse.diags(1.0 / sw)
    C = sparse.diags(a) @ K @ K @ sparse.diags(a) + sparse.diags(V2)
    C = (0.5 * (C + C.T)).tocsr()
    return SectorOperator(params, sec, grid, L, A, B, 1.0 / a2, W, C)
