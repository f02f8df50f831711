import math

import numpy as np
import pytest
import sympy as sp
from scipy import optimize

from biharmlab.analysis.lemma import (lemma21_check, rellich_check, rellich_ratio,
                                      stima_identity_check, stima_terms)
from biharmlab.analysis.potential import (ball_average, ball_average_mc, m_function,
                                          reverse_holder_ratio)
from biharmlab.analysis.reports import InequalityReport, _clean, relative_change, skipped
from biharmlab.analysis.suite import SuiteSettings, lemma_gammas, run_suite
from biharmlab.analysis.sweep import Sweep, estimate_constant
from biharmlab.analysis.threshold import (accretivity_expression, lambda0_search,
                                          potential_expression)
from biharmlab.forms import sample
from biharmlab.params import OperatorParams, ParameterError, rellich_constants
from biharmlab.testfn import PowerGaussian, family_of_size

r = sp.symbols("r", positive=True)


# threshold ------------------------------------------------------------------

def _continuous_threshold(params, expr, coeff):
    """Independent oracle: maximize -E(r)/coeff(r) over log r with bounded Brent steps."""
    best = 0.0
    edges = np.linspace(math.log(1e-4), math.log(1e4), 81)
    for a, b in zip(edges, edges[1:]):
        res = optimize.minimize_scalar(
            lambda t: expr(params, np.array([math.exp(t)]))[0] / coeff(math.exp(t)),
            bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        best = max(best, -res.fun)
    return best


def test_lambda0_against_continuous_search():
    p = OperatorParams(9, 1.0, 2.0)
    res = lambda0_search(p)
    pot = _continuous_threshold(p, potential_expression, lambda x: 1 + x ** 4)
    acc = _continuous_threshold(p, accretivity_expression, lambda x: 1.0)
    assert res.potential == pytest.approx(pot, rel=1e-6)
    assert res.accretivity == pytest.approx(acc, rel=1e-6)
    assert res.value == max(res.potential, res.accretivity)


def test_lambda0_makes_expressions_nonnegative():
    p = OperatorParams(9, 1.0, 2.0)
    lam0 = lambda0_search(p).value
    x = np.geomspace(1e-4, 1e4, 20001)
    assert np.all(potential_expression(p, x, lam0) >= -1e-9 * lam0)
    assert np.any(potential_expression(p, x, 0.99 * lam0) < 0)


def test_lambda0_rejects_low_dimension():
    with pytest.raises(ParameterError):
        lambda0_search(OperatorParams(4, 1.0, 2.0))


# lemma and Rellich -------------------------------------------------------------

@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0, 4.0])
def test_stima_identity(quad9, gamma):
    for u in family_of_size(8):
        assert stima_identity_check(u, gamma, 9, quad9).passed


def test_stima_terms_symbolic(quad9):
    # int |x|^g (Delta^2 u) u for u = r^4 e^(-r^2), g = 3, integrated exactly
    f = r ** 4 * sp.exp(-r ** 2)
    lap = lambda h: sp.diff(h, r, 2) + 8 / r * sp.diff(h, r)
    exact = sp.integrate(sp.expand(r ** 3 * lap(lap(f)) * f * r ** 8), (r, 0, sp.oo))
    t = stima_terms(sample(PowerGaussian(4, 1.0), quad9), 3.0)
    assert t["lhs"] == pytest.approx(float(exact) * quad9.surface_measure, rel=1e-10)


def test_lemma_inequality(quad9):
    for g in lemma_gammas(1.0, 2.0):
        assert lemma21_check(family_of_size(10), g, 9, quad9).passed


def test_rellich_above_sharp_constant(quad9):
    rep = rellich_check(family_of_size(30), 9, quad9)
    assert rep.passed
    assert rep.details["family_inf"] >= rellich_constants(9).c0_sharp


def test_rellich_dimension_guard(quad9):
    with pytest.raises(ParameterError):
        rellich_ratio(PowerGaussian(4, 1.0), 4, quad9)


# potential class ----------------------------------------------------------------

def test_ball_average_closed_forms():
    N = 9
    assert ball_average(lambda s: np.ones_like(s), 0.7, 0.3, N) == pytest.approx(1.0, rel=1e-9)
    # centred ball: avg |y|^2 = N rho^2 / (N + 2)
    assert ball_average(lambda s: s ** 2, 0.0, 2.0, N) == pytest.approx(4 * N / (N + 2),
                                                                       rel=1e-9)
    # off-centre: avg |y|^2 = d^2 + N rho^2 / (N + 2)
    assert ball_average(lambda s: s ** 2, 1.5, 0.5, N) == pytest.approx(
        2.25 + 0.25 * N / (N + 2), rel=1e-9)


@pytest.mark.parametrize("ball", [(0.5, 1.0), (3.0, 0.2), (1.0, 1.0)])
def test_ball_average_against_monte_carlo(ball):
    g = lambda s: s ** 4 + s
    exact = ball_average(g, *ball, 9)
    mean, se = ball_average_mc(g, *ball, 9, n=200_000, seed=1)
    assert abs(exact - mean) < 5 * se


def test_reverse_holder_ratio_at_least_one():
    p = OperatorParams(9, 1.0, 2.0)
    for ball in [(0.0, 1.0), (2.0, 0.5), (10.0, 30.0)]:
        assert reverse_holder_ratio(p, ball=ball) >= 1 - 1e-12


def test_m_function_defines_critical_radius():
    p = OperatorParams(9, 1.0, 2.0)
    for x in (0.01, 1.0, 50.0):
        m = m_function(x, p)
        rho = 1 / m
        assert rho ** 2 * ball_average(p.V_tilde, x, rho, 9) == pytest.approx(1.0, rel=1e-8)


# sweeps and reports ----------------------------------------------------------------

def test_estimate_constant_respects_hardy(quad9):
    hardy = lambda s: s.integral(s.d[1] ** 2) / s.integral(s.r ** -2.0 * s.f ** 2)
    big = Sweep(family_of_size(20), quad9)
    est = estimate_constant("hardy", hardy, big.prefix(10), "inf", iters=20, doubled=big)
    c = rellich_constants(9).c_hardy
    assert est.value >= c * (1 - 1e-8)
    assert est.value <= big.values(hardy).min() * (1 + 1e-12)
    assert est.stability is not None and est.stability >= 0


def test_report_semantics():
    assert skipped("x", "why").passed and skipped("x", "why").status == "SKIPPED"
    assert InequalityReport("x", -1e-9, 1e-8).passed
    assert not InequalityReport("x", -1e-7, 1e-8).passed
    assert not InequalityReport("x", math.nan, 1.0).passed
    rep = InequalityReport("x", 0.0, 0.0, details={"ok": False}, requirements=["ok"])
    assert not rep.passed
    assert _clean({"a": math.inf, "b": [math.nan, np.float64(2.0)]}) == \
        {"a": "inf", "b": ["nan", 2.0]}
    assert relative_change(2.0, 2.0) == 0.0


def test_suite_subset_and_gate():
    st = SuiteSettings(pairs=4, continuity_pairs=4, accretivity_members=6)
    res = run_suite(OperatorParams(9, 1.0, 2.0), st, only=["form", "potential-class"])
    assert res.passed
    assert res.params.lam == res.lambda0.value
    assert res.to_dict()["summary"]["FAIL"] == 0
    with pytest.raises(ParameterError):
        run_suite(OperatorParams(4, 1.0, 2.0), st)
