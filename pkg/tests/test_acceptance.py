"""Acceptance gates 1-10.

Each test times its own work (quadrature, threshold search and all) and
prints one ``ACCEPTANCE n PASS|FAIL`` line with the measured figure and
runtime before asserting.
"""

import json
import math
import os
import subprocess
import time

import numpy as np
import pytest

from biharmlab.analysis.identities import (accretivity_check, duality_check,
                                           form_identity_check)
from biharmlab.analysis.lemma import rellich_check
from biharmlab.analysis.potential import (m_function_check, reverse_holder_check,
                                          tilde_v_bounds_check)
from biharmlab.analysis.suite import SuiteSettings, lemma_suite, run_suite
from biharmlab.analysis.threshold import lambda0_search
from biharmlab.evolution import (contraction_check, decay_study, default_timing, evolve,
                                 semigroup_check)
from biharmlab.grid import build_grid, make_quadrature
from biharmlab.operator import assemble
from biharmlab.params import OperatorParams, rellich_constants
from biharmlab.spectral import (compute_spectrum, convergence_study, dense_oracle_check,
                                growth_check, solve_sector, spectral_grid)
from biharmlab.testfn import family_of_size, family_pairs

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(n, ok, limit, elapsed, **figures):
        ok = bool(ok) and elapsed < limit
        shown = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in figures.items())
        with capsys.disabled():
            bound = f"limit {limit:g}s" if math.isfinite(limit) else "no limit"
            print(f"\nACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {shown}  "
                  f"runtime={elapsed:.1f}s ({bound})")
        return ok
    return emit


def at_threshold(N=9, alpha=1.0, beta=2.0):
    p = OperatorParams(N, alpha, beta)
    lam0 = lambda0_search(p).value
    return p.with_lambda0(lam0).with_lambda(lam0)


def test_01_form_identity(report):
    t0 = time.perf_counter()
    p = at_threshold()
    quad = make_quadrature(build_grid(), 9)
    rep = form_identity_check(family_pairs(20), p, quad, tol=1e-6)
    el = time.perf_counter() - t0
    worst = rep.details["max_residual"]
    assert report(1, rep.passed and worst <= 1e-6 and rep.details["pairs"] == 20, 10, el,
                  max_residual=worst)


def test_02_accretivity(report):
    t0 = time.perf_counter()
    p = at_threshold()
    quad = make_quadrature(build_grid(), 9)
    rep = accretivity_check(family_of_size(100), p, quad, tol=1e-8)
    el = time.perf_counter() - t0
    assert report(2, rep.passed and rep.details["members"] == 100, 30, el,
                  worst_normalized_gap=rep.margin, lambda0=p.lambda0)


def test_03_lemma(report):
    t0 = time.perf_counter()
    ok, worst_id, worst_margin = True, 0.0, math.inf
    for N in (5, 9, 11):
        rep = lemma_suite(N, 1.0, 2.0, members=24, quad=make_quadrature(build_grid(), N))
        for name, part in rep.details["parts"].items():
            ok &= part["status"] == "PASS"
            if name.startswith("stima"):
                worst_id = max(worst_id, -part["margin"])
            else:
                worst_margin = min(worst_margin, part["margin"])
    el = time.perf_counter() - t0
    ok = ok and worst_id <= 1e-7 and worst_margin >= -1e-8
    assert report(3, ok, 60, el, identity_residual=worst_id, worst_margin=worst_margin)


def test_04_rellich(report):
    t0 = time.perf_counter()
    ok, figures = True, {}
    for N in (5, 9):
        rep = rellich_check(family_of_size(100, N), N, make_quadrature(build_grid(), N),
                            rel_tol=1e-6)
        c0 = rellich_constants(N).c0_sharp
        inf = rep.details["family_inf"]
        ok &= rep.passed and inf >= c0 - 1e-6 * c0
        figures[f"inf_N{N}"] = inf
        figures[f"sharp_N{N}"] = c0
    el = time.perf_counter() - t0
    assert report(4, ok, 30, el, **figures)


def test_05_duality(report):
    t0 = time.perf_counter()
    p = at_threshold()
    rep = duality_check(family_pairs(20), p, make_quadrature(build_grid(), 9), tol=1e-6)
    el = time.perf_counter() - t0
    assert report(5, rep.passed, math.inf, el, max_residual=-rep.margin)


@pytest.mark.parametrize("N", [9, 11])
def test_06_chain(report, N):
    t0 = time.perf_counter()
    res = run_suite(OperatorParams(N, 1.0, 2.0), SuiteSettings(), only=["chain"])
    el = time.perf_counter() - t0
    worst = min(r.margin for r in res.reports)
    stab = max((c.stability for r in res.reports for c in r.constants
                if c.stability is not None), default=0.0)
    finite = all(math.isfinite(c.value) for r in res.reports for c in r.constants)
    ok = res.passed and worst >= -1e-8 and stab < 0.10 and finite
    assert report(6, ok, 120, el, N=N, worst_margin=worst, worst_stability=stab)


def test_07_spectrum(report):
    t0 = time.perf_counter()
    p = OperatorParams(9, 1.0, 2.0)
    res = compute_spectrum(p)
    growth = growth_check(res)
    oracle = dense_oracle_check(p, tol=1e-8)
    conv = convergence_study(p)
    el = time.perf_counter() - t0
    ok = (len(res.mu) == 70 and growth.passed and oracle.passed
          and conv["converged_digits"] >= 3)
    assert report(7, ok, 120, el, mu1=float(res.mu[0]),
                  oracle_rel=oracle.details["relative"],
                  richardson_rel=conv["relative_error_finest"], modes=len(res.mu))


def test_08_semigroup(report):
    t0 = time.perf_counter()
    p = at_threshold()
    op = assemble(p, spectral_grid(), 0)
    mu1, mu2 = (float(x) for x in solve_sector(op, 2).mu)
    dt, T = default_timing(mu1, p.lam)
    members = family_of_size(10)
    contraction_ok, worst_decay = True, 0.0
    for u in members:
        u0 = u(op.r)
        contraction_ok &= contraction_check(evolve(u0, T, dt, op)).passed
        worst_decay = max(worst_decay, decay_study(u0, op, mu1, mu2=mu2)["relative_error"])
    sg = semigroup_check(members[0](op.r), op, 20 * dt, dt)
    el = time.perf_counter() - t0
    ok = contraction_ok and worst_decay < 0.02 and sg.passed
    assert report(8, ok, 60, el, trajectories=len(members), worst_decay_error=worst_decay,
                  composition=sg.details["composition_error"],
                  order_ie=sg.details["orders"]["implicit-euler"]["order"],
                  order_cn=sg.details["orders"]["crank-nicolson"]["order"])


def test_09_potential_class(report):
    t0 = time.perf_counter()
    p = OperatorParams(9, 1.0, 2.0)
    rh = reverse_holder_check(p)
    mf = m_function_check(p)
    tv = tilde_v_bounds_check(p, samples=1000)
    el = time.perf_counter() - t0
    ok = rh.passed and mf.passed and tv.passed
    assert report(9, ok, 60, el, rh_sup=rh.details["sup_doubled"],
                  rh_stability=rh.details["stability"],
                  vt_over_m2=mf.constants[0].value, C_low=tv.details["C_low"],
                  C_high=tv.details["C_high"])


def test_10_determinism(report, tmp_path):
    t0 = time.perf_counter()
    env = {k: v for k, v in os.environ.items() if not k.startswith("BIHARMLAB_")}
    procs = [subprocess.Popen(["biharmlab", "verify", "--seed", "0", "--out",
                               str(tmp_path / name)], env=env, stdout=subprocess.DEVNULL,
                              stderr=subprocess.PIPE)
             for name in ("a", "b")]
    codes = [pr.wait() for pr in procs]
    el = time.perf_counter() - t0
    a = (tmp_path / "a" / "verify.json").read_bytes()
    b = (tmp_path / "b" / "verify.json").read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    same_artifacts = ma["artifacts"] == mb["artifacts"]
    ok = a == b and same_artifacts and codes == [0, 0]
    assert report(10, ok, math.inf, el, identical=a == b, exit_codes=str(codes))
