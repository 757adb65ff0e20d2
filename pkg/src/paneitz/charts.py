"""Metrics and scalar fields on coordinate boxes.

A :class:`ChartMetric` wraps a batched metric callback ``g(X) -> (m, n, n)``
over an axis-aligned box. Its first and second derivatives come either from
analytic callbacks or from central finite differences. Curvature routines
then take any further derivatives they need with the same stencils.

Registered charts (see :data:`CHARTS`) are flat space, the stereographic
round sphere, products of two stereographic spheres, and a polar-type
diagonal metric used for smoke tests.
"""

import numpy as np

from . import finite_diff as fd
from .errors import DomainError, MetricError, PositivityError

__all__ = [
    "ChartMetric",
    "ScalarField",
    "constant_field",
    "linear_field",
    "radial_field",
    "bubble_field",
    "cutoff_field",
    "bump_field",
    "flat_chart",
    "sphere_chart",
    "product_chart",
    "polar_chart",
    "CHARTS",
    "make_chart",
]


def _as_points(X, n):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {X.shape}")
    return X, single


class ChartMetric:
    """Riemannian metric on the coordinate box ``[lower, upper]``.

    Parameters
    ----------
    dim : int
        Dimension ``n >= 5``.
    lower, upper : array-like
        Corners of the coordinate box.
    metric : callable
        ``metric(X)`` with ``X`` of shape ``(m, n)`` returns ``(m, n, n)``.
    d_metric, d2_metric : callable, optional
        Analytic derivatives with layouts ``[m, k, i, j] = d_k g_ij`` and
        ``[m, k, l, i, j] = d_k d_l g_ij``. Missing ones are replaced by
        central finite differences with step ``step``.
    step, step_high : float, optional
        Finite-difference steps for derivatives of the metric and for the
        derived fields (scalar curvature, Laplacians, divergences). Default to
        ``1e-3`` and ``5e-3`` of the box diameter.
    order : {2, 4}
        Formal order of the central stencils.
    flat : bool
        Declares the metric flat, which lets the Paneitz operator skip its
        curvature terms.
    """

    def __init__(self, dim, lower, upper, metric, d_metric=None, d2_metric=None, *,
                 step=None, step_high=None, order=4, flat=False, name="chart"):
        if int(dim) != dim or dim < 5:
            raise ValueError(f"chart dimension must be an integer >= 5, got {dim}")
        self.dim = int(dim)
        self.lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.dim,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.dim,)).copy()
        if np.any(self.upper <= self.lower):
            raise ValueError("empty coordinate box")
        self._metric = metric
        self._d_metric = d_metric
        self._d2_metric = d2_metric
        diameter = float(np.linalg.norm(self.upper - self.lower))
        self.step = 1e-3 * diameter if step is None else float(step)
        self.step_high = 5e-3 * diameter if step_high is None else float(step_high)
        if self.step <= 0 or self.step_high <= 0:
            raise ValueError("finite-difference steps must be positive")
        fd.stencil_reach(order)
        self.order = order
        self.flat = flat
        self.name = name

    def __repr__(self):
        return (f"ChartMetric(name={self.name!r}, dim={self.dim}, "
                f"mode={self.derivative_mode!r}, step={self.step:.3g}, "
                f"step_high={self.step_high:.3g}, order={self.order})")

    @property
    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def derivative_mode(self):
        if self._d_metric is not None and self._d2_metric is not None:
            return "analytic"
        return "finite-difference"

    def replace(self, **kwargs):
        """Copy of this chart with some constructor arguments changed."""
        params = dict(dim=self.dim, lower=self.lower, upper=self.upper,
                      metric=self._metric, d_metric=self._d_metric,
                      d2_metric=self._d2_metric, step=self.step,
                      step_high=self.step_high, order=self.order,
                      flat=self.flat, name=self.name)
        params.update(kwargs)
        return ChartMetric(**params)

    def without_derivatives(self):
        """Same metric with every derivative taken by finite differences."""
        return self.replace(d_metric=None, d2_metric=None)

    def contains(self, X, margin=0.0):
        X, _ = _as_points(X, self.dim)
        return np.all((X >= self.lower + margin) & (X <= self.upper - margin), axis=-1)

    def _check(self, X):
        if not np.all(self.contains(X)):
            bad = X[~self.contains(X)][0]
            raise DomainError(f"point {bad} (or its stencil) lies outside the chart box")

    def g(self, X):
        X, _ = _as_points(X, self.dim)
        self._check(X)
        return np.asarray(self._metric(X), dtype=float)

    def dg(self, X):
        X, _ = _as_points(X, self.dim)
        if self._d_metric is not None:
            self._check(X)
            return np.asarray(self._d_metric(X), dtype=float)
        return fd.jacobian(self.g, X, self.step, self.order)

    def d2g(self, X):
        X, _ = _as_points(X, self.dim)
        if self._d2_metric is not None:
            self._check(X)
            return np.asarray(self._d2_metric(X), dtype=float)
        if self._d_metric is not None:
            H = fd.jacobian(self.dg, X, self.step, self.order)
            return 0.5 * (H + H.swapaxes(1, 2))
        return fd.hessian(self.g, X, self.step, self.order)

    def check_positive(self, X):
        """Raise :class:`MetricError` unless g is SPD at every point of ``X``."""
        G = self.g(X)
        if not np.allclose(G, G.swapaxes(-1, -2), rtol=1e-12, atol=1e-14):
            raise MetricError("metric is not symmetric")
        if np.min(np.linalg.eigvalsh(G)) <= 0:
            raise MetricError("metric is not positive definite")
        return G

    def conformal(self, u):
        """The metric ``u**(4/(n-4)) * g`` for a positive :class:`ScalarField` u."""
        n = self.dim
        q = 4.0 / (n - 4)
        base = self

        def _factor(X):
            v = u(X)
            if np.any(v <= 0):
                raise PositivityError("conformal factor must be positive")
            return v

        def metric(X):
            return _factor(X)[:, None, None] ** q * base.g(X)

        def d_metric(X):
            v = _factor(X)
            gu = u.gradient(X)
            return (q * v[:, None, None, None] ** (q - 1) * gu[:, :, None, None] * base.g(X)[:, None]
                    + v[:, None, None, None] ** q * base.dg(X))

        def d2_metric(X):
            v = _factor(X)[:, None, None, None, None]
            gu = u.gradient(X)
            hu = u.hessian(X)
            G = base.g(X)[:, None, None]
            dG = base.dg(X)
            scal = q * (q - 1) * v ** (q - 2) * np.einsum("mk,ml->mkl", gu, gu)[..., None, None] \
                + q * v ** (q - 1) * hu[..., None, None]
            cross = q * v ** (q - 1) * (gu[:, :, None, None, None] * dG[:, None]
                                        + gu[:, None, :, None, None] * dG[:, :, None])
            return scal * G + cross + v ** q * base.d2g(X)

        return self.replace(metric=metric, d_metric=d_metric, d2_metric=d2_metric,
                            flat=False, name=f"conformal({self.name})")


class ScalarField:
    """Batched scalar function with optional analytic gradient and Hessian.

    ``func(X)`` maps ``(m, n)`` points to ``(m,)`` values. When ``grad`` or
    ``hess`` is omitted the derivative is taken with central differences of
    step ``step``.
    """

    def __init__(self, func, grad=None, hess=None, *, step=1e-3, order=4, name="field"):
        self._func = func
        self._grad = grad
        self._hess = hess
        self.step = float(step)
        self.order = order
        self.name = name

    def __repr__(self):
        return f"ScalarField({self.name!r}, mode={self.derivative_mode!r})"

    @property
    def derivative_mode(self):
        if self._grad is not None and self._hess is not None:
            return "analytic"
        return "finite-difference"

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self._func(X), dtype=float).reshape(X.shape[0])

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._grad is not None:
            return np.asarray(self._grad(X), dtype=float)
        return fd.gradient(self, X, self.step, self.order)

    def hessian(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._hess is not None:
            return np.asarray(self._hess(X), dtype=float)
        if self._grad is not None:
            H = fd.jacobian(self.gradient, X, self.step, self.order)
            return 0.5 * (H + H.swapaxes(1, 2))
        return fd.hessian(self, X, self.step, self.order)

    def without_derivatives(self):
        return ScalarField(self._func, step=self.step, order=self.order, name=self.name)

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            return other
        return constant_field(float(other))

    def __mul__(self, other):
        if not isinstance(other, ScalarField):
            c = float(other)
            return ScalarField(lambda X: c * self(X), lambda X: c * self.gradient(X),
                               lambda X: c * self.hessian(X), step=self.step,
                               order=self.order, name=f"{c}*{self.name}")
        a, b = self, other

        def grad(X):
            return a(X)[:, None] * b.gradient(X) + b(X)[:, None] * a.gradient(X)

        def hess(X):
            ga, gb = a.gradient(X), b.gradient(X)
            return (a(X)[:, None, None] * b.hessian(X) + b(X)[:, None, None] * a.hessian(X)
                    + np.einsum("mi,mj->mij", ga, gb) + np.einsum("mi,mj->mij", gb, ga))

        return ScalarField(lambda X: a(X) * b(X), grad, hess, step=min(a.step, b.step),
                           order=a.order, name=f"({a.name})*({b.name})")

    __rmul__ = __mul__

    def __add__(self, other):
        a, b = self, self._coerce(other)
        return ScalarField(lambda X: a(X) + b(X), lambda X: a.gradient(X) + b.gradient(X),
                           lambda X: a.hessian(X) + b.hessian(X), step=min(a.step, b.step),
                           order=a.order, name=f"{a.name}+{b.name}")

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))


def constant_field(c):
    c = float(c)
    return ScalarField(lambda X: np.full(len(X), c),
                       lambda X: np.zeros_like(X),
                       lambda X: np.zeros(X.shape + (X.shape[-1],)),
                       name=repr(c))


def linear_field(slope, offset=0.0):
    """``offset + slope . x``."""
    a = np.asarray(slope, dtype=float)
    return ScalarField(lambda X: offset + X @ a,
                       lambda X: np.broadcast_to(a, X.shape).copy(),
                       lambda X: np.zeros(X.shape + (X.shape[-1],)),
                       name="linear")


def radial_field(f, df, d2f, center=None, name="radial"):
    """Field ``f(|x - center|)`` from a profile and its first two derivatives.

    ``df(r) / r`` is replaced by ``d2f(0)`` at the centre, so profiles must
    have ``df(0) = 0``.
    """
    def _r(X):
        Y = X if center is None else X - center
        return Y, np.linalg.norm(Y, axis=-1)

    def grad(X):
        Y, r = _r(X)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r[:, None] > 0, (df(r) / safe)[:, None] * Y, 0.0)

    def hess(X):
        Y, r = _r(X)
        n = X.shape[-1]
        safe = np.where(r > 0, r, 1.0)
        tiny = r < 1e-12
        over_r = np.where(tiny, d2f(r), df(r) / safe)
        rr = np.where(tiny[:, None, None], 0.0,
                      np.einsum("mi,mj->mij", Y, Y) / safe[:, None, None] ** 2)
        return d2f(r)[:, None, None] * rr + over_r[:, None, None] * (np.eye(n) - rr)

    return ScalarField(lambda X: f(_r(X)[1]), grad, hess, name=name)


def bubble_field(n, alpha, center=None):
    """The concentration profile ``(2 alpha / (alpha^2 + |x|^2))^((n-4)/2)``."""
    a2 = float(alpha) ** 2

    def _parts(X):
        Y = X if center is None else X - center
        D = a2 + np.sum(Y * Y, axis=-1)
        return Y, D, (2 * alpha / D) ** ((n - 4) / 2)

    def func(X):
        return _parts(X)[2]

    def grad(X):
        Y, D, u = _parts(X)
        return -(n - 4) * (u / D)[:, None] * Y

    def hess(X):
        Y, D, u = _parts(X)
        return (-(n - 4) * (u / D)[:, None, None] * np.eye(X.shape[-1])
                + (n - 4) * (n - 2) * (u / D**2)[:, None, None] * np.einsum("mi,mj->mij", Y, Y))

    return ScalarField(func, grad, hess, name=f"bubble(n={n}, alpha={alpha})")


def cutoff_field(epsilon, profile="smoothstep", center=None):
    """Radial cutoff equal to 1 on ``B_eps`` and 0 outside ``B_2eps``."""
    from .bubble import cutoff

    return radial_field(lambda r: cutoff(r, epsilon, profile, 0),
                        lambda r: cutoff(r, epsilon, profile, 1),
                        lambda r: cutoff(r, epsilon, profile, 2),
                        center=center, name=f"cutoff({epsilon})")


def bump_field(radius, center=None):
    """Smooth bump ``exp(1 - 1/(1 - |x|^2/radius^2))`` supported in the closed ball."""
    R2 = float(radius) ** 2

    def _g(r):
        s = np.minimum(r * r / R2, 1.0)
        inside = s < 1
        one_minus = np.where(inside, 1 - s, 1.0)
        e = np.where(inside, np.exp(1 - 1 / one_minus), 0.0)
        return e, -1 / one_minus**2, -2 / one_minus**3

    def f(r):
        return _g(r)[0]

    def df(r):
        e, g1, _ = _g(r)
        return e * g1 * 2 * r / R2

    def d2f(r):
        e, g1, g2 = _g(r)
        return e * ((g1 * 2 * r / R2) ** 2 + g2 * (2 * r / R2) ** 2 + g1 * 2 / R2)

    return radial_field(f, df, d2f, center=center, name=f"bump({radius})")


# -- registered charts ---------------------------------------------------------


def _stereo_factor(Y, radius):
    """Conformal factor 4 R^2 / (1 + |y|^2)^2 with its first two derivatives."""
    s = np.sum(Y * Y, axis=-1)
    c = 4 * radius**2 / (1 + s) ** 2
    dc = -16 * radius**2 * Y / (1 + s)[:, None] ** 3
    k = Y.shape[-1]
    d2c = (-16 * radius**2 / (1 + s)[:, None, None] ** 3 * np.eye(k)
           + 96 * radius**2 * np.einsum("mi,mj->mij", Y, Y) / (1 + s)[:, None, None] ** 4)
    return c, dc, d2c


def _block_conformal(blocks, n):
    """Metric ``diag(c_b(x_b) I_b)`` from per-block conformal factors.

    ``blocks`` is a list of ``(slice, factor)`` with ``factor(Y) -> (c, dc, d2c)``.
    """
    def _eval(X):
        m = len(X)
        c = np.zeros((m, n))
        dc = np.zeros((m, n, n))
        d2c = np.zeros((m, n, n, n))
        for sl, factor in blocks:
            cb, dcb, d2cb = factor(X[:, sl])
            idx = np.arange(n)[sl]
            c[:, idx] = cb[:, None]
            for i in idx:
                dc[:, sl, i] = dcb
                d2c[:, sl, sl, i] = d2cb
        return c, dc, d2c

    def metric(X):
        c, _, _ = _eval(X)
        return c[:, :, None] * np.eye(n)

    def d_metric(X):
        _, dc, _ = _eval(X)
        return dc[:, :, :, None] * np.eye(n)

    def d2_metric(X):
        _, _, d2c = _eval(X)
        return d2c[..., None] * np.eye(n)

    return metric, d_metric, d2_metric


def flat_chart(n, half_width=1.0, **kwargs):
    """Euclidean metric on ``[-half_width, half_width]^n``."""
    return ChartMetric(
        n, -half_width, half_width,
        lambda X: np.broadcast_to(np.eye(n), (len(X), n, n)).copy(),
        lambda X: np.zeros((len(X), n, n, n)),
        lambda X: np.zeros((len(X), n, n, n, n)),
        flat=True, name="flat", **kwargs)


def sphere_chart(n, radius=1.0, half_width=2.0, **kwargs):
    """Round sphere of radius ``radius`` in stereographic coordinates."""
    metric, dm, d2m = _block_conformal([(slice(0, n), lambda Y: _stereo_factor(Y, radius))], n)
    return ChartMetric(n, -half_width, half_width, metric, dm, d2m,
                       name=f"sphere(n={n}, r={radius})", **kwargs)


def product_chart(p, q, r1=1.0, r2=1.0, half_width=2.0, **kwargs):
    """Product of two round spheres ``S^p(r1) x S^q(r2)``, each stereographic."""
    n = p + q
    metric, dm, d2m = _block_conformal(
        [(slice(0, p), lambda Y: _stereo_factor(Y, r1)),
         (slice(p, n), lambda Y: _stereo_factor(Y, r2))], n)
    return ChartMetric(n, -half_width, half_width, metric, dm, d2m,
                       name=f"product(S^{p}({r1}) x S^{q}({r2}))", **kwargs)


def polar_chart(n, **kwargs):
    """``diag(1, x_0^2, 1, ..., 1)`` on a box with ``x_0`` in ``[0.5, 1.5]``.

    The first two coordinates are flat polar coordinates, the rest a flat
    factor; used to check Christoffel symbols against hand computation.
    """
    lower = np.full(n, -1.0)
    upper = np.full(n, 1.0)
    lower[0], upper[0] = 0.5, 1.5

    def metric(X):
        G = np.broadcast_to(np.eye(n), (len(X), n, n)).copy()
        G[:, 1, 1] = X[:, 0] ** 2
        return G

    def d_metric(X):
        D = np.zeros((len(X), n, n, n))
        D[:, 0, 1, 1] = 2 * X[:, 0]
        return D

    def d2_metric(X):
        D = np.zeros((len(X), n, n, n, n))
        D[:, 0, 0, 1, 1] = 2.0
        return D

    return ChartMetric(n, lower, upper, metric, d_metric, d2_metric, flat=True,
                       name="polar", **kwargs)


CHARTS = {
    "flat": flat_chart,
    "sphere": sphere_chart,
    "product": product_chart,
    "polar": polar_chart,
}


def make_chart(name, **params):
    """Build a registered chart by name."""
    try:
        factory = CHARTS[name]
    except KeyError:
        raise ValueError(f"unknown chart {name!r}; choose from {sorted(CHARTS)}") from None
    return factory(**params)
