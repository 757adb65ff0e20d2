import numpy as np
import pytest
from hypothesis import given, strategies as st

from paneitz import finite_diff as fd


def poly(X):
    # cubic: exact for the fourth-order first-derivative stencil
    return X[:, 0] ** 3 + 2 * X[:, 0] * X[:, 1] ** 2 - X[:, 2]


def poly_grad(X):
    return np.stack([3 * X[:, 0] ** 2 + 2 * X[:, 1] ** 2, 4 * X[:, 0] * X[:, 1],
                     -np.ones(len(X))], axis=-1)


def poly_hess(X):
    H = np.zeros((len(X), 3, 3))
    H[:, 0, 0] = 6 * X[:, 0]
    H[:, 0, 1] = H[:, 1, 0] = 4 * X[:, 1]
    H[:, 1, 1] = 4 * X[:, 0]
    return H


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_fourth_order_stencils_exact_on_cubics(x):
    X = np.array([x])
    assert np.allclose(fd.gradient(poly, X, 0.1), poly_grad(X), atol=1e-10)
    assert np.allclose(fd.hessian(poly, X, 0.1), poly_hess(X), atol=1e-9)


def test_convergence_orders():
    X = np.array([[0.3, -0.2, 0.5]])

    def f(Y):
        return np.sin(Y[:, 0]) * np.exp(Y[:, 1]) + np.cos(Y[:, 2])

    exact = np.array([np.cos(0.3) * np.exp(-0.2), np.sin(0.3) * np.exp(-0.2), -np.sin(0.5)])
    for order, expected in ((2, 4.0), (4, 16.0)):
        e1 = np.max(np.abs(fd.gradient(f, X, 0.02, order)[0] - exact))
        e2 = np.max(np.abs(fd.gradient(f, X, 0.01, order)[0] - exact))
        assert e1 / e2 == pytest.approx(expected, rel=0.05)


def test_trailing_axes_carried():
    def f(Y):
        return np.stack([Y[:, 0] ** 2, Y[:, 1] * Y[:, 0]], axis=-1)

    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    J = fd.jacobian(f, X, 1e-3)
    assert J.shape == (2, 2, 2)
    assert np.allclose(J[0], [[2.0, 2.0], [0.0, 1.0]])


def test_rejects_unknown_order():
    with pytest.raises(ValueError):
        fd.stencil_reach(6)
    assert fd.stencil_reach(2) == 1 and fd.stencil_reach(4) == 2
