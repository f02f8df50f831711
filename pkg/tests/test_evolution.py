import math

import numpy as np
import pytest

from biharmlab.analysis.threshold import lambda0_search
from biharmlab.evolution import (CRANK_NICOLSON, IMPLICIT_EULER, EvolutionError,
                                 SpectralPropagator, Stepper, contraction_check, decay_horizon, decay_rate,
                                 decay_study, default_timing, eigenvector_step_check, evolve,
                                 lambda_shift_check, semigroup_check, smoothing_check, step,
                                 taylor_check)
from biharmlab.operator import assemble
from biharmlab.params import OperatorParams, ParameterError
from biharmlab.spectral import solve_sector, spectral_grid
from biharmlab.testfn import PowerGaussian


@pytest.fixture(scope="module")
def setup():
    p = OperatorParams(9, 1.0, 2.0)
    lam0 = lambda0_search(p).value
    p = p.with_lambda0(lam0).with_lambda(lam0)
    op = assemble(p, spectral_grid(), 0)
    ground = solve_sector(op, 2)
    u0 = PowerGaussian(4, 1.0)(op.r)
    return p, op, ground, u0, SpectralPropagator(op)


def test_eigenvector_scaling_per_step(setup):
    p, op, ground, _, _ = setup
    dt = default_timing(ground.mu[0], p.lam)[0]
    for k in range(2):
        assert eigenvector_step_check(op, ground.vectors[:, k], ground.mu[k], dt).passed


def test_taylor_defect_second_order(setup):
    p, op, ground, u0, _ = setup
    dt = 1e-3 / (ground.mu[0] + p.lam)
    out = taylor_check(u0, op, dt)
    assert out["order"] == pytest.approx(2.0, abs=0.1)


def test_lambda_shift_identity(setup):
    p, op, ground, u0, prop = setup
    t = 1.0 / (ground.mu[0] + p.lam)
    assert lambda_shift_check(u0, op, t, p.lam, prop).passed


def test_semigroup_composition_and_orders(setup):
    p, op, ground, u0, prop = setup
    dt, _ = default_timing(ground.mu[0], p.lam)
    rep = semigroup_check(u0, op, 20 * dt, dt, propagator=prop)
    assert rep.passed, rep.details
    orders = rep.details["orders"]
    assert orders[IMPLICIT_EULER]["order"] == pytest.approx(1.0, abs=0.3)
    assert orders[CRANK_NICOLSON]["order"] == pytest.approx(2.0, abs=0.3)


def test_implicit_euler_contracts(setup):
    p, op, ground, u0, _ = setup
    dt, T = default_timing(ground.mu[0], p.lam)
    tr = evolve(u0, T, dt, op)
    rep = contraction_check(tr)
    assert rep.passed and rep.details["violations"] == 0
    assert np.all(np.diff(tr.norms) <= 0)
    assert np.all(np.diff(tr.energy) <= 0)


def test_contraction_needs_threshold(setup):
    p, op, ground, u0, _ = setup
    tr = evolve(u0, 1e-4, 1e-5, op, lam=1.0)
    with pytest.raises(ParameterError):
        contraction_check(tr)


def test_decay_rate_matches_ground_state(setup):
    p, op, ground, u0, _ = setup
    study = decay_study(u0, op, ground.mu[0])
    assert study["relative_error"] < 0.02
    assert study["reference"] == -(ground.mu[0] + p.lam)


def test_zero_data_stays_zero(setup):
    p, op, ground, _, _ = setup
    tr = evolve(np.zeros(op.n), 1e-3, 1e-4, op)
    assert np.all(tr.norms == 0)
    assert contraction_check(tr).passed
    assert smoothing_check(tr, op, ground.mu[0]).passed
    with pytest.raises(EvolutionError):
        decay_rate(tr)


def test_smoothing_bound_finite(setup):
    p, op, ground, u0, prop = setup
    tr = evolve(u0, 1e-3, 1e-4, op)
    rep = smoothing_check(tr, op, ground.mu[0], propagator=prop)
    assert rep.passed and rep.details["finite"]


def test_scheme_aliases_and_guards(setup):
    p, op, _, u0, _ = setup
    assert Stepper(op, 1e-4, scheme="cn").scheme == CRANK_NICOLSON
    assert Stepper(op, 1e-4, scheme="IE").scheme == IMPLICIT_EULER
    with pytest.raises(ValueError):
        Stepper(op, 1e-4, scheme="rk4")
    with pytest.raises(ValueError):
        Stepper(op, 0.0)
    with pytest.raises(ParameterError):
        step(u0, 1e-4, op, lam=-1.0)
    with pytest.raises(ValueError):
        evolve(u0[:-1], 1.0, 0.1, op)


def test_exact_propagator_semigroup(setup):
    p, op, _, u0, prop = setup
    t = 1e-4
    assert np.allclose(prop(prop(u0, t, p.lam), t, p.lam), prop(u0, 2 * t, p.lam),
                       rtol=1e-10, atol=1e-14 * np.abs(u0).max())


def test_trajectory_serialization(setup):
    p, op, ground, u0, _ = setup
    tr = evolve(u0, 1e-4, 1e-5, op)
    d = tr.to_dict()
    assert d["steps"] == 10 and d["lambda"] == p.lam
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,norm,m_norm,energy" and len(lines) == 12


def test_decay_horizon_uses_gap():
    base = default_timing(100.0, 50.0)[1]
    assert decay_horizon(100.0, 50.0) == base
    assert decay_horizon(100.0, 50.0, mu2=110.0) == pytest.approx(16.0 / 10.0)
    assert decay_horizon(100.0, 50.0, mu2=1e9) == base
