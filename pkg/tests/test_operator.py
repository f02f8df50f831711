import math

import numpy as np
import pytest
import sympy as sp
from scipy import sparse

from biharmlab.grid import build_grid
from biharmlab.operator import (SectorIndex, StencilError, apply_A, apply_adjoint,
                                apply_bilaplacian, apply_sector_laplacian, assemble,
                                fornberg_weights)
from biharmlab.params import OperatorParams
from biharmlab.testfn import Dilation, PowerGaussian, Rational

r = sp.symbols("r", positive=True)


def sym_L(f, N, l):
    return sp.diff(f, r, 2) + (N - 1) / r * sp.diff(f, r) - l * (l + N - 2) / r ** 2 * f


def test_multiplicities():
    assert [SectorIndex(l, 3).multiplicity for l in range(5)] == [1, 3, 5, 7, 9]
    assert [SectorIndex(l, 2).multiplicity for l in range(4)] == [1, 2, 2, 2]
    # harmonic polynomials of degree 2 in 9 variables: 45 - 1
    assert SectorIndex(2, 9).multiplicity == 44
    assert SectorIndex(3, 9).kappa == 3 * 10


def test_sector_index_guards():
    with pytest.raises(ValueError):
        SectorIndex(-1, 9)
    with pytest.raises(ValueError):
        SectorIndex(1.5, 9)


def test_fornberg_matches_sympy():
    nodes = [0.0, 0.3, 0.7, 1.6, 2.0]
    z = 0.9
    ours = fornberg_weights(z, nodes, 4)
    ref = sp.finite_diff_weights(4, [sp.nsimplify(x) for x in nodes], sp.nsimplify(z))
    for k in range(5):
        assert np.allclose(ours[k], [float(w) for w in ref[k][-1]], rtol=1e-10, atol=1e-10)


def test_fornberg_needs_enough_nodes():
    with pytest.raises(StencilError):
        fornberg_weights(0.0, [0.0, 1.0], 2)


@pytest.mark.parametrize("l", [0, 1, 3])
def test_closed_form_laplacian_and_bilaplacian(l):
    N = 9
    f = r ** 5 * sp.exp(-r ** 2 / 2)
    pts = np.array([0.1, 0.8, 2.2, 4.0])
    prof = PowerGaussian(5, 0.5)
    L1 = sp.lambdify(r, sym_L(f, N, l))(pts)
    L2 = sp.lambdify(r, sym_L(sym_L(f, N, l), N, l))(pts)
    assert np.allclose(apply_sector_laplacian(prof, l, N, pts), L1, rtol=1e-10)
    assert np.allclose(apply_bilaplacian(prof, l, N, pts), L2, rtol=1e-10)


def test_apply_A_closed_form():
    p = OperatorParams(9, 1.5, 2.0)
    f = r ** 4 * (1 + r ** 2) ** -8
    pts = np.array([0.2, 1.0, 3.0])
    expr = (1 + r ** sp.Rational(3, 2)) ** 2 * sym_L(sym_L(f, 9, 0), 9, 0) + r ** 4 * f
    assert np.allclose(apply_A(Rational(4, 8), 0, p, pts), sp.lambdify(r, expr)(pts),
                       rtol=1e-10)


@pytest.mark.parametrize("l", [0, 2])
def test_adjoint_routes_and_symbolic(l):
    p = OperatorParams(9, 1.0, 2.0)
    v = PowerGaussian(4, 1.0)
    pts = np.array([0.05, 0.9, 2.5])
    exp_ = apply_adjoint(v, l, p, pts)
    prod = apply_adjoint(v, l, p, pts, route="product")
    f = r ** 4 * sp.exp(-r ** 2)
    sym = sym_L(sym_L((1 + r) ** 2 * f, 9, l), 9, l) + r ** 4 * f
    assert np.allclose(exp_, prod, rtol=1e-11)
    assert np.allclose(exp_, sp.lambdify(r, sym)(pts), rtol=1e-10)


def test_bilaplacian_dilation_covariance():
    # L^2 [u(s .)](r) = s^4 (L^2 u)(s r)
    u, s = PowerGaussian(6, 0.7), 1.7
    pts = np.array([0.3, 1.0, 2.0])
    lhs = apply_bilaplacian(Dilation(u, s), 0, 9, pts)
    rhs = s ** 4 * apply_bilaplacian(u, 0, 9, s * pts)
    assert np.allclose(lhs, rhs, rtol=1e-12)


def test_sampled_laplacian_fourth_order():
    prof = PowerGaussian(4, 1.0)
    errs = []
    for n in (201, 401):
        g = build_grid(1e-2, 10.0, n)
        x = g.nodes
        got = apply_sector_laplacian(prof(x), 1, 9, x)
        exact = apply_sector_laplacian(prof, 1, 9, x)
        sel = (x > 0.3) & (x < 3)
        errs.append(np.max(np.abs(got - exact)[sel]))
    assert math.log2(errs[0] / errs[1]) > 3.5


def test_sampled_laplacian_guards():
    with pytest.raises(StencilError):
        apply_sector_laplacian(np.ones(3), 0, 9, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(StencilError):
        apply_sector_laplacian(np.ones(6), 0, 9, np.array([1.0, 3.0, 2.0, 4.0, 5.0, 6.0]))


def test_assembled_L_is_fourth_order():
    p = OperatorParams(9, 1.0, 2.0)
    prof = PowerGaussian(6, 1.0)
    errs = []
    for n in (201, 401, 801):
        g = build_grid(1e-2, 20.0, n)
        op = assemble(p, g, 2)
        x = g.nodes
        got = op.L @ prof(x)
        exact = apply_sector_laplacian(prof, 2, 9, x)
        sel = (x > 0.2) & (x < 4)
        errs.append(np.max(np.abs(got - exact)[sel]) / np.max(np.abs(exact)[sel]))
    assert math.log2(errs[0] / errs[1]) > 3.5
    assert math.log2(errs[1] / errs[2]) > 3.5


@pytest.mark.parametrize("l", [0, 4])
def test_weighted_symmetry_and_similarity(l):
    p = OperatorParams(9, 1.0, 2.0)
    op = assemble(p, build_grid(1e-2, 20.0, 401), l)
    assert op.symmetry_defect() < 1e-12
    # C = D A D^-1 with D = sqrt(W) / a
    d = np.sqrt(op.weights) / op.a
    CA = sparse.diags(d) @ op.A @ sparse.diags(1 / d)
    assert abs(CA - op.C).max() / abs(op.C).max() < 1e-12
    assert abs(op.C - op.C.T).max() == 0.0
    f = np.random.default_rng(0).standard_normal(op.n)
    y = op.to_symmetric(f)
    assert np.allclose(op.from_symmetric(y), f)
    assert np.linalg.norm(y) == pytest.approx(op.m_norm(f), rel=1e-12)


def test_assembly_guards():
    p = OperatorParams(9, 1.0, 2.0)
    with pytest.raises(StencilError):
        assemble(p, build_grid(1e-2, 20.0, 4))
    g = build_grid(1e-2, 20.0, 50)
    bad = type(g)(g.r_min, g.r_max, np.linspace(g.r_min, g.r_max, 50), g.ratio)
    with pytest.raises(StencilError):
        assemble(p, bad)
