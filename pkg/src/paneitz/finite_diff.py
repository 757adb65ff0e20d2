"""Central finite-difference stencils on batches of points.

All helpers take a callable ``f`` that maps an ``(m, n)`` array of points to
an array whose leading axis has length ``m``; trailing axes are carried
through unchanged. This lets the same stencils differentiate scalar fields,
metric components and vector fields.
"""

import numpy as np

__all__ = [
    "FIRST_DERIVATIVE",
    "SECOND_DERIVATIVE",
    "stencil_reach",
    "gradient",
    "jacobian",
    "directional_second",
    "hessian",
]

# (offset, weight) pairs; weights are for unit spacing
FIRST_DERIVATIVE = {
    2: ((-1, -0.5), (1, 0.5)),
    4: ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)),
}
SECOND_DERIVATIVE = {
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    4: ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12)),
}


def _check_order(order):
    if order not in FIRST_DERIVATIVE:
        raise ValueError(f"stencil order must be 2 or 4, got {order}")


def stencil_reach(order):
    """Largest offset (in units of the step) touched by the stencils."""
    _check_order(order)
    return max(abs(o) for o, _ in SECOND_DERIVATIVE[order])


def _along(f, X, dirs, h, stencil):
    # dirs: (m, d, n). Returns sum_k w_k f(X + o_k h dir) with shape (m, d, ...)
    m, d, n = dirs.shape
    offsets = np.array([o for o, _ in stencil], dtype=float)
    weights = np.array([w for _, w in stencil])
    pts = X[:, None, None, :] + offsets[None, None, :, None] * h * dirs[:, :, None, :]
    vals = np.asarray(f(pts.reshape(-1, n)))
    vals = vals.reshape((m, d, len(offsets)) + vals.shape[1:])
    return np.einsum("mds...,s->md...", vals, weights)


def jacobian(f, X, h, order=4):
    """Derivative of ``f`` along every coordinate axis.

    Returns an array of shape ``(m, n) + f(X).shape[1:]`` whose entry
    ``[:, k, ...]`` approximates the partial derivative in direction ``k``.
    """
    _check_order(order)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    dirs = np.broadcast_to(np.eye(n), (m, n, n))
    return _along(f, X, dirs, h, FIRST_DERIVATIVE[order]) / h


def gradient(f, X, h, order=4):
    """Gradient of a scalar-valued ``f``; shape ``(m, n)``."""
    return jacobian(f, X, h, order)


def directional_second(f, X, dirs, h, order=4):
    """Second derivatives of ``f`` along unit directions ``dirs`` of shape (m, d, n)."""
    _check_order(order)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return _along(f, X, np.asarray(dirs, dtype=float), h, SECOND_DERIVATIVE[order]) / h**2


def hessian(f, X, h, order=4):
    """Full Hessian of ``f``; shape ``(m, n, n) + f(X).shape[1:]``.

    Diagonal entries use the second-derivative stencil; mixed entries apply the
    first-derivative stencil twice, which keeps the same formal order.
    """
    _check_order(order)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    eye = np.eye(n)
    diag = directional_second(f, X, np.broadcast_to(eye, (m, n, n)), h, order)
    out = np.zeros((m, n, n) + diag.shape[2:], dtype=diag.dtype)
    idx = np.arange(n)
    out[:, idx, idx] = diag
    first = FIRST_DERIVATIVE[order]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        return out
    # offsets grid for the iterated stencil
    pts, wts = [], []
    for i, j in pairs:
        for oi, wi in first:
            for oj, wj in first:
                pts.append(oi * eye[i] + oj * eye[j])
                wts.append(wi * wj)
    pts = np.array(pts).reshape(len(pairs), len(first) ** 2, n)
    wts = np.array(wts).reshape(len(pairs), len(first) ** 2)
    P = X[:, None, None, :] + h * pts[None]
    vals = np.asarray(f(P.reshape(-1, n)))
    vals = vals.reshape((m, len(pairs), len(first) ** 2) + vals.shape[1:])
    mixed = np.einsum("mps...,ps->mp...", vals, wts) / h**2
    for p, (i, j) in enumerate(pairs):
        out[:, i, j] = mixed[:, p]
        out[:, j, i] = mixed[:, p]
    return out
