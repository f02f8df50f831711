import math

import numpy as np
import pytest

from biharmlab.grid import QuadratureError, build_grid, integrate, make_quadrature


def test_grid_is_geometric():
    g = build_grid(1e-3, 30.0, 101)
    assert g.nodes[0] == 1e-3 and g.nodes[-1] == 30.0
    ratios = g.nodes[1:] / g.nodes[:-1]
    assert np.allclose(ratios, g.ratio, rtol=1e-12)
    assert g.log_step == pytest.approx(math.log(g.ratio))


@pytest.mark.parametrize("args", [(0.0, 1.0, 10), (2.0, 1.0, 10), (1e-3, 30.0, 1),
                                  (1e-3, math.inf, 10)])
def test_bad_grids_rejected(args):
    with pytest.raises(ValueError):
        build_grid(*args)


@pytest.mark.parametrize("N", [5, 9, 11])
def test_gaussian_mass(N):
    # int_{R^N} exp(-|x|^2) dx = pi^(N/2)
    q = make_quadrature(build_grid(), N)
    exact = math.pi ** (N / 2)
    assert integrate(lambda r: np.exp(-r * r), 0.0, q) == pytest.approx(exact, rel=1e-10)
    nodes = q.grid.nodes
    assert integrate(np.exp(-nodes ** 2), 0.0, q) == pytest.approx(exact, rel=1e-6)


def test_sigma_shifts_the_power():
    q = make_quadrature(build_grid(), 9)
    a = integrate(lambda r: r ** 2 * np.exp(-r * r), 0.0, q)
    b = integrate(lambda r: np.exp(-r * r), 2.0, q)
    assert a == pytest.approx(b, rel=1e-14)
    # second moment of the Gaussian: (N/2) pi^(N/2)
    assert a == pytest.approx(4.5 * math.pi ** 4.5, rel=1e-10)


def test_surface_factor():
    q = make_quadrature(build_grid(), 9)
    f = lambda r: np.exp(-r * r)
    assert integrate(f, 0.0, q) == pytest.approx(
        integrate(f, 0.0, q, surface=False) * q.surface_measure, rel=1e-15)


def test_nonfinite_integrand_reported():
    q = make_quadrature(build_grid(), 9)
    with pytest.raises(QuadratureError):
        integrate(lambda r: np.where(r > 1, np.inf, 1.0), 0.0, q)


def test_sampled_shape_mismatch():
    q = make_quadrature(build_grid(1e-3, 30.0, 101), 9)
    with pytest.raises(ValueError):
        integrate(np.ones(50), 0.0, q)
