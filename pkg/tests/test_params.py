import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from biharmlab.params import (OperatorParams, ParameterError, lemma_constant_k,
                              rellich_constants, sphere_area, weight_derivatives)

r_, g_, N_ = sp.symbols("r gamma N", positive=True)


def radial_lap(f, N):
    return sp.diff(f, r_, 2) + (N - 1) / r_ * sp.diff(f, r_)


@pytest.mark.parametrize("gamma", [1, 2, 3, 4, sp.Rational(5, 2)])
@pytest.mark.parametrize("N", [5, 9, 11])
def test_weight_laplacians_match_symbolic(gamma, N):
    w = r_ ** gamma
    lap = sp.simplify(radial_lap(w, N) / r_ ** (gamma - 2))
    bilap = sp.simplify(radial_lap(radial_lap(w, N), N) / r_ ** (gamma - 4))
    c = lemma_constant_k(float(gamma), N)
    assert float(lap) == pytest.approx(c.c1, rel=1e-14, abs=1e-14)
    assert float(bilap) == pytest.approx(c.c2, rel=1e-14, abs=1e-14)


def test_weight_derivatives_finite_difference():
    r = np.array([0.5, 1.3, 4.0])
    g, h = 2.7, 1e-5
    wd = weight_derivatives(g, 9, r)
    fd = ((r + h) ** g - (r - h) ** g) / (2 * h)
    # radial derivative of |x|^g is grad_coeff * r
    assert np.allclose(wd.grad_coeff * r, fd, rtol=1e-8)
    h2 = 1e-4
    fd2 = ((r + h2) ** g - 2 * r ** g + (r - h2) ** g) / h2 ** 2
    radial, tangential = wd.hess_eigs
    assert np.allclose(radial, fd2, rtol=1e-6)
    assert np.allclose(tangential, fd / r, rtol=1e-8)


def test_known_k_values():
    assert lemma_constant_k(2, 9).k == -12.5
    assert lemma_constant_k(4, 9).k == -141.5
    assert lemma_constant_k(4, 11).k == -15.5


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 8.0), st.integers(5, 16))
def test_square_absorbs_cross_term(gamma, N):
    c = lemma_constant_k(gamma, N)
    assert 2 * c.c5 * c.c6 == pytest.approx(c.c3, rel=1e-14)
    assert c.k == pytest.approx(c.c2 / 2 - c.c4 - c.c6 ** 2, rel=1e-12, abs=1e-12)


def test_lemma_constant_guards():
    with pytest.raises(ParameterError):
        lemma_constant_k(0.0, 9)
    with pytest.raises(ParameterError):
        lemma_constant_k(2.0, 4)


def test_rellich_constants():
    assert rellich_constants(9).c0_sharp == 126.5625
    assert rellich_constants(5).c0_sharp == 1.5625
    assert rellich_constants(9).c_hardy == 12.25
    with pytest.raises(ParameterError):
        rellich_constants(4)


def test_sphere_area_low_dimensions():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2)


@pytest.mark.parametrize("kw", [dict(N=9, alpha=0.0, beta=2.0),
                                dict(N=9, alpha=4.0, beta=1.0),
                                dict(N=9, alpha=1.0, beta=2.0, lam=-1.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ParameterError):
        OperatorParams(**kw)


def test_dimension_gate():
    p = OperatorParams(4, 1.0, 2.0)
    with pytest.raises(ParameterError):
        p.require_dim(5)
    OperatorParams(9, 1.0, 2.0).require_dim(8, strict=True)


def test_coefficients():
    p = OperatorParams(9, 1.5, 2.0)
    r = np.array([0.5, 2.0])
    assert np.allclose(p.a(r), 1 + r ** 1.5)
    assert np.allclose(p.a2(r), (1 + r ** 1.5) ** 2)
    assert np.allclose(p.V(r), r ** 2)
