import math

import numpy as np
import pytest
import sympy as sp

from biharmlab.analysis.identities import duality_residual, scale_covariance
from biharmlab.forms import (TailError, ThresholdError, accretivity_gap, continuity_bound,
                             continuity_ratio, d2_norm, d_norm, eval_form, form_identity_residual,
                             form_norm_sq, sample)
from biharmlab.params import OperatorParams, ParameterError, sphere_area
from biharmlab.testfn import PowerGaussian, Rational, family_of_size, family_pairs

r = sp.symbols("r", positive=True)


def sym_lap(f, N=9):
    return sp.diff(f, r, 2) + (N - 1) / r * sp.diff(f, r)


def test_form_matches_symbolic_pairing(quad9):
    # a_lam(u, v) = int (A u + lam u) v, with everything integrated exactly
    p = OperatorParams(9, 1.0, 2.0, lam=3.0)
    fu = r ** 4 * sp.exp(-r ** 2)
    fv = r ** 5 * sp.exp(-r ** 2 / 2)
    Au = (1 + r) ** 2 * sym_lap(sym_lap(fu)) + r ** 4 * fu + 3 * fu
    exact = sp.integrate(sp.expand(Au * fv * r ** 8), (r, 0, sp.oo))
    exact = float(exact) * sphere_area(9)
    got = eval_form(PowerGaussian(4, 1.0), PowerGaussian(5, 0.5), p, quad9).value
    assert got == pytest.approx(exact, rel=1e-10)


def test_identity_residual_on_pairs(quad9, params9):
    for u, v in family_pairs(10):
        assert form_identity_residual(u, v, params9, quad9) < 1e-8


def test_duality_residual(quad9, params9):
    for u, v in family_pairs(5):
        assert duality_residual(u, v, params9, quad9) < 1e-8


def test_continuity_terms_bound_the_form(quad9, params9):
    for u, v in family_pairs(10):
        val = abs(eval_form(u, v, params9, quad9).value)
        assert val <= continuity_bound(u, v, params9, quad9) * (1 + 1e-12)
        assert math.isfinite(continuity_ratio(u, v, params9, quad9))


def test_accretivity_at_threshold(quad9, params9):
    for u in family_of_size(15):
        gap = accretivity_gap(u, params9, quad9)
        assert gap >= -1e-8 * form_norm_sq(u, params9, quad9)


def test_accretivity_requires_threshold(quad9, params9):
    u = PowerGaussian(4, 1.0)
    with pytest.raises(ThresholdError):
        accretivity_gap(u, OperatorParams(9, 1.0, 2.0), quad9)
    with pytest.raises(ThresholdError):
        accretivity_gap(u, params9.with_lambda(params9.lambda0 / 2), quad9)


def test_norm_addends(quad9, params9):
    u = PowerGaussian(5, 0.5)
    d = d_norm(u, params9, quad9)
    assert all(x > 0 for x in d.addends)
    assert d.value == pytest.approx(sum(d.addends))
    d2 = d2_norm(u, params9, quad9)
    assert d2.domain_claim and len(d2.weighted) == 5
    assert d2.value >= d2.h4 > 0


def test_form_is_bilinear(quad9, params9):
    u, v, w = PowerGaussian(4, 1.0), PowerGaussian(6, 0.5), Rational(4, 9)
    lhs = eval_form(2.0 * u - w, v, params9, quad9).value
    rhs = 2 * eval_form(u, v, params9, quad9).value - eval_form(w, v, params9, quad9).value
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_dimension_four_rejected(quad9):
    with pytest.raises(ParameterError):
        eval_form(PowerGaussian(4, 1.0), PowerGaussian(4, 1.0), OperatorParams(4, 1.0, 2.0),
                  quad9)


def test_slow_tails_detected(quad9, params9):
    with pytest.raises(TailError):
        eval_form(Rational(4, 4), PowerGaussian(4, 1.0), params9, quad9)


def test_rellich_ratios_are_dilation_invariant(quad9):
    out = scale_covariance(PowerGaussian(5, 1.0), 9, 2.0, quad9)
    for a, b in out.values():
        assert a == pytest.approx(b, rel=1e-8)
