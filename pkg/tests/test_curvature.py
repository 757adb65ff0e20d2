import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from paneitz import bubble as bl
from paneitz.charts import (ScalarField, bubble_field, constant_field, flat_chart, linear_field,
                            make_chart, polar_chart, product_chart, sphere_chart)
from paneitz.curvature import (christoffel, conformal_covariance_residual, curvature_at,
                               laplacian, paneitz_apply, q_curvature, q_from_curvature)
from paneitz.errors import DomainError, MetricError, PositivityError, StepUnderflowError
from paneitz.charts import ChartMetric


# -- symbolic oracles -----------------------------------------------------------

def _q_symbolic(n, R, ric2, lapR=0):
    n = sp.Integer(n)
    return (-lapR / (2 * (n - 1)) + (n**3 - 4 * n**2 + 16 * n - 16) * R**2
            / (8 * (n - 1) ** 2 * (n - 2) ** 2) - 2 * ric2 / (n - 2) ** 2)


def test_sphere_q_simplifies_symbolically():
    n = sp.symbols("n", positive=True)
    Q = (n**3 - 4 * n**2 + 16 * n - 16) * (n * (n - 1)) ** 2 / (8 * (n - 1) ** 2 * (n - 2) ** 2) \
        - 2 * n * (n - 1) ** 2 / (n - 2) ** 2
    assert sp.simplify(Q - n * (n**2 - 4) / 8) == 0


def test_product_q_oracle():
    # S^4 x S^4: Ric = 3 g on each factor
    assert _q_symbolic(8, 24, 72) == sp.Rational(540, 49)


@pytest.mark.parametrize("n", [5, 6, 8, 10])
def test_q_from_curvature_matches_symbolic(n):
    R, ric2, lap = 3.7, 2.1, -0.4
    assert q_from_curvature(n, R, ric2, lap) == pytest.approx(float(_q_symbolic(n, R, ric2, lap)),
                                                              rel=1e-14)


# -- Christoffel symbols ------------------------------------------------------------

def test_christoffel_flat_and_sphere_origin():
    assert np.all(christoffel(flat_chart(6), np.full(6, 0.2)) == 0)
    assert np.max(np.abs(christoffel(sphere_chart(6), np.zeros(6)))) < 1e-14


def test_christoffel_polar_hand_values():
    x = np.array([1.2, 0.3, 0.0, -0.1, 0.2])
    gam = christoffel(polar_chart(5), x)
    expected = np.zeros((5, 5, 5))
    expected[0, 1, 1] = -1.2
    expected[1, 0, 1] = expected[1, 1, 0] = 1 / 1.2
    assert np.allclose(gam, expected, atol=1e-14)


@given(st.lists(st.floats(-0.5, 0.5), min_size=5, max_size=5))
def test_christoffel_symmetric(x):
    gam = christoffel(sphere_chart(5), np.array(x))
    assert np.allclose(gam, gam.transpose(0, 2, 1), atol=1e-14)


def test_christoffel_fd_mode_agrees():
    x = np.array([0.1, -0.2, 0.3, 0.05, 0.0])
    chart = sphere_chart(5)
    fd_gam = christoffel(chart.without_derivatives(), x)
    assert np.allclose(fd_gam, christoffel(chart, x), atol=1e-9)


# -- curvature packs ----------------------------------------------------------------

def test_flat_pack_vanishes():
    pack = curvature_at(flat_chart(7), np.full(7, 0.1))
    assert pack.R == 0 and pack.Q == 0
    assert np.all(pack.Ric == 0) and np.all(pack.Weyl == 0)


def test_sphere_pack_n8():
    pack = curvature_at(sphere_chart(8), np.array([0.2, -0.1, 0.3, 0, 0.1, 0, -0.2, 0.1]))
    assert pack.R == pytest.approx(56, rel=1e-12)
    assert pack.Q == pytest.approx(60, rel=1e-7)
    assert math.sqrt(abs(pack.weyl_norm2)) < 1e-10
    assert pack.sigma1A == pytest.approx(4.0, rel=1e-12)
    assert pack.Q == pack.q_recomputed()


def test_product_pack_n8():
    pack = curvature_at(product_chart(4, 4), np.array([0.1, 0.2, -0.1, 0, 0.3, -0.2, 0.1, 0.05]))
    assert pack.R == pytest.approx(24, rel=1e-12)
    assert pack.ricci_norm2 == pytest.approx(72, rel=1e-12)
    assert pack.Q == pytest.approx(540 / 49, rel=1e-7)
    assert pack.weyl_norm2 > 1.0


@pytest.mark.parametrize("name,kwargs", [("sphere", {"n": 6}), ("product", {"p": 3, "q": 3}),
                                          ("polar", {"n": 5}), ("flat", {"n": 5})])
def test_algebraic_symmetries(name, kwargs, rng):
    chart = make_chart(name, **kwargs)
    center = 0.5 * (chart.lower + chart.upper)
    for x in center + rng.uniform(-0.4, 0.4, (100, chart.dim)):
        pack = curvature_at(chart, x)
        assert max(pack.symmetry_residuals().values()) <= 1e-8
        assert pack.weyl_trace_residual() <= 1e-8


@pytest.mark.parametrize("n", [5, 6, 8, 10])
def test_sphere_q_constant(n, rng):
    X = rng.uniform(-1, 1, (20, n)) / math.sqrt(n)
    Q = q_curvature(sphere_chart(n), X)
    assert np.max(np.abs(Q / (n * (n * n - 4) / 8) - 1)) <= 1e-7


def test_sphere_radius_scaling():
    # Q scales like radius^-4
    x = np.full(5, 0.1)
    assert q_curvature(sphere_chart(5, radius=2.0), x) == pytest.approx(
        5 * 21 / 8 / 16, rel=1e-7)


def test_fd_convergence_factor_on_halving():
    x = np.array([0.3, -0.2, 0.1, 0.25, -0.15])
    exact = 5 * 21 / 8
    errs = []
    for h in (4e-2, 2e-2):
        chart = sphere_chart(5, order=2, step=h, step_high=h).without_derivatives()
        errs.append(abs(q_curvature(chart, x) - exact))
    assert errs[0] / errs[1] >= 3


# -- Laplacian and Paneitz operator -----------------------------------------------------

def test_laplacian_of_quadratic_flat():
    u = ScalarField(lambda X: np.sum(X * X, axis=-1))
    assert laplacian(flat_chart(6), u, np.full(6, 0.1)) == pytest.approx(12, rel=1e-8)


def test_paneitz_quadratic_flat_is_zero():
    u = ScalarField(lambda X: np.sum(X * X, axis=-1),
                    lambda X: 2 * X, lambda X: np.broadcast_to(2 * np.eye(X.shape[1]),
                                                               X.shape + (X.shape[1],)))
    assert abs(paneitz_apply(flat_chart(8), u, np.full(8, 0.05))) < 1e-8


def test_paneitz_constant_on_sphere():
    assert paneitz_apply(sphere_chart(8), constant_field(1.0), np.full(8, 0.1)) == pytest.approx(
        120, rel=1e-7)


@pytest.mark.parametrize("n", [5, 8])
def test_paneitz_bubble_matches_radial_formula(n):
    chart = flat_chart(n, half_width=0.5)
    val = paneitz_apply(chart, bubble_field(n, 1.0), np.zeros(n))
    assert val == pytest.approx(bl.bubble_bilaplacian(n, 1.0, 0.0), rel=1e-6)


def test_paneitz_sphere_eigenfunction():
    # u = 1 + 0.1 Y_2 is a quadratic polynomial in x = cos(theta); compare with the spectral side
    from paneitz.charts import radial_field
    from paneitz.sphere import ZonalField, paneitz_apply_sphere

    n = 6
    z = ZonalField.from_modes(n, 2, {2: 0.1}) + ZonalField.constant(n, 1.0, 2)
    c2, c1, c0 = np.polyfit([-1.0, 0.0, 1.0], z(np.array([-1.0, 0.0, 1.0])), 2)

    def x_of(r):
        return (1 - r * r) / (1 + r * r)

    def dx(r):
        return -4 * r / (1 + r * r) ** 2

    def d2x(r):
        return (12 * r * r - 4) / (1 + r * r) ** 3

    u = radial_field(lambda r: c2 * x_of(r) ** 2 + c1 * x_of(r) + c0,
                     lambda r: (2 * c2 * x_of(r) + c1) * dx(r),
                     lambda r: 2 * c2 * dx(r) ** 2 + (2 * c2 * x_of(r) + c1) * d2x(r))
    chart = sphere_chart(n, half_width=0.6)
    X = np.random.default_rng(3).uniform(-0.3, 0.3, (20, n))
    expected = paneitz_apply_sphere(z)(x_of(np.linalg.norm(X, axis=-1)))
    got = paneitz_apply(chart, u, X)
    assert np.max(np.abs(got / expected - 1)) <= 1e-5


# -- conformal covariance -------------------------------------------------------------

def test_identity_factor_is_exact():
    chart = flat_chart(6, half_width=0.25)
    res = conformal_covariance_residual(chart, constant_field(1.0), bubble_field(6, 1.0),
                                        np.zeros(6))
    assert res == 0.0


@pytest.mark.parametrize("n", [5, 6, 8, 10])
def test_covariance_family(n, rng):
    hw = 0.25
    chart = flat_chart(n, half_width=hw)
    X = np.vstack([np.zeros(n), rng.uniform(-0.1, 0.1, (3, n))])
    e1, e2 = np.eye(n)[0], np.eye(n)[1]
    ub = bubble_field(n, 1.0)
    for u, phi in ((ub, constant_field(1.0)), (linear_field(0.01 * e1, 1.0), linear_field(e2)),
                   (ub, linear_field(e2))):
        assert np.max(conformal_covariance_residual(chart, u, phi, X)) <= 1e-6


def test_bubble_metric_is_round_q():
    # P_gbar(1) = (n-4)/2 Q with gbar = u_alpha^{4/(n-4)} delta the unit round metric
    n = 8
    gbar = flat_chart(n, half_width=0.25).conformal(bubble_field(n, 1.0))
    assert q_curvature(gbar, np.zeros(n)) == pytest.approx(n * (n * n - 4) / 8, rel=1e-6)


# -- errors -----------------------------------------------------------------------------

def test_outside_domain():
    with pytest.raises(DomainError):
        curvature_at(flat_chart(5, half_width=0.1), np.full(5, 0.5))


def test_non_spd_metric():
    chart = ChartMetric(5, -1, 1, lambda X: -np.broadcast_to(np.eye(5), (len(X), 5, 5)).copy())
    with pytest.raises(MetricError):
        christoffel(chart, np.zeros(5))


def test_step_underflow():
    with pytest.raises(StepUnderflowError):
        curvature_at(sphere_chart(5, step=1e-12), np.zeros(5))


def test_nonpositive_factor():
    chart = flat_chart(5)
    with pytest.raises(PositivityError):
        conformal_covariance_residual(chart, linear_field(np.eye(5)[0]), constant_field(1.0),
                                      np.zeros(5))


def test_low_dimension_rejected():
    with pytest.raises(ValueError):
        flat_chart(4)
