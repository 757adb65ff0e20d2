"""Pointwise curvature, Q-curvature and the Paneitz operator on charts.

Conventions: ``Delta_g = g^{ij} nabla_i nabla_j`` (non-positive spectrum on
closed manifolds), the Riemann tensor is lowered so that a space of constant
curvature ``K`` has ``R_abcd = K (g_ac g_bd - g_ad g_bc)``, and
``Ric_bd = g^{ac} R_abcd``.

The Paneitz operator is

    P_g u = Delta_g^2 u + div_g((4 A_g - (n-2) sigma_1(A_g) g)(grad u, .))
            + (n-4)/2 Q_g u,

with Schouten tensor ``A = (Ric - R g / (2(n-1))) / (n-2)`` and

    Q_g = -Delta_g R / (2(n-1))
          + (n^3 - 4n^2 + 16n - 16) R^2 / (8 (n-1)^2 (n-2)^2)
          - 2 |Ric|^2 / (n-2)^2.

Derivatives of the metric up to order two come from the chart; everything
of higher order (``Delta R``, ``Delta^2 u``, the divergence term) is taken by
central differences of analytically assembled lower-order quantities.
"""

from dataclasses import dataclass

import numpy as np

from . import finite_diff as fd
from .charts import ChartMetric, ScalarField
from .errors import PositivityError, StepUnderflowError

__all__ = [
    "CurvaturePack",
    "q_from_curvature",
    "christoffel",
    "curvature_at",
    "scalar_curvature",
    "q_curvature",
    "laplacian",
    "paneitz_apply",
    "conformal_covariance_residual",
]

# chunk of base points processed together; bounds memory of nested stencils
_CHUNK = 16


def q_from_curvature(n, R, ric_norm2, lap_R):
    """Q-curvature from ``R``, ``|Ric|_g^2`` and ``Delta_g R``."""
    return (-lap_R / (2 * (n - 1))
            + (n**3 - 4 * n**2 + 16 * n - 16) / (8 * (n - 1) ** 2 * (n - 2) ** 2) * R**2
            - 2 / (n - 2) ** 2 * ric_norm2)


@dataclass(frozen=True)
class CurvaturePack:
    """Curvature quantities of a chart metric at one point."""

    point: np.ndarray
    g: np.ndarray
    R: float
    Ric: np.ndarray
    Riem: np.ndarray
    Weyl: np.ndarray
    A: np.ndarray
    sigma1A: float
    Q: float
    laplacian_R: float

    @property
    def dim(self):
        return self.g.shape[0]

    @property
    def ginv(self):
        return np.linalg.inv(self.g)

    @property
    def ricci_norm2(self):
        gi = self.ginv
        return float(np.einsum("ac,bd,ab,cd->", gi, gi, self.Ric, self.Ric))

    @property
    def weyl_norm2(self):
        gi = self.ginv
        return float(np.einsum("ae,bf,cg,dh,abcd,efgh->", gi, gi, gi, gi,
                               self.Weyl, self.Weyl, optimize=True))

    def q_recomputed(self):
        return q_from_curvature(self.dim, self.R, self.ricci_norm2, self.laplacian_R)

    def symmetry_residuals(self):
        """Relative residuals of the algebraic Riemann symmetries."""
        Rm = self.Riem
        scale = np.max(np.abs(Rm)) + 1.0
        return {
            "antisym_first": np.max(np.abs(Rm + Rm.transpose(1, 0, 2, 3))) / scale,
            "antisym_last": np.max(np.abs(Rm + Rm.transpose(0, 1, 3, 2))) / scale,
            "pair_exchange": np.max(np.abs(Rm - Rm.transpose(2, 3, 0, 1))) / scale,
            "bianchi": np.max(np.abs(Rm + Rm.transpose(0, 2, 3, 1)
                                     + Rm.transpose(0, 3, 1, 2))) / scale,
        }

    def weyl_trace_residual(self):
        """Largest metric trace of the Weyl tensor, relative to ``|W| + 1``."""
        gi = self.ginv
        W = self.Weyl
        traces = [np.einsum("ab,abcd->cd", gi, W), np.einsum("ac,abcd->bd", gi, W),
                  np.einsum("ad,abcd->bc", gi, W), np.einsum("bc,abcd->ad", gi, W),
                  np.einsum("bd,abcd->ac", gi, W), np.einsum("cd,abcd->ab", gi, W)]
        return max(np.max(np.abs(t)) for t in traces) / (np.sqrt(abs(self.weyl_norm2)) + 1.0)


# -- batched kernels ----------------------------------------------------------


def _points(metric, x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != metric.dim:
        raise ValueError(f"expected points of dimension {metric.dim}")
    scale = max(1.0, float(np.max(np.abs(X))))
    for h in (metric.step, metric.step_high):
        if h < 1e-6 * scale:
            raise StepUnderflowError(f"finite-difference step {h:g} is below round-off scale")
    return X, single


def _christoffel(ginv, dg):
    # dg[m, a, b, c] = d_a g_bc ;  Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    T = dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg
    return 0.5 * np.einsum("mkl,mlij->mkij", ginv, T)


def _connection(metric, X):
    G = metric.g(X)
    ginv = np.linalg.inv(G)
    dG = metric.dg(X)
    return G, ginv, dG, _christoffel(ginv, dG)


def _riemann(G, d2G, gam):
    # R_abcd = 1/2 (g_ad,bc + g_bc,ad - g_ac,bd - g_bd,ac)
    #          + g_ef (Gamma^e_cb Gamma^f_da - Gamma^e_db Gamma^f_ca)
    second = 0.5 * (np.einsum("mbcad->mabcd", d2G) + np.einsum("madbc->mabcd", d2G)
                    - np.einsum("mbdac->mabcd", d2G) - np.einsum("macbd->mabcd", d2G))
    low = np.einsum("mef,mfca->meca", G, gam)  # Gamma_{e,ca} lowered on first index
    quad = (np.einsum("mecb,meda->mabcd", gam, low)
            - np.einsum("medb,meca->mabcd", gam, low))
    return second + quad


def _ricci(G, ginv, d2G, gam):
    """``Ric_bd = g^{ac} R_abcd`` without forming the full Riemann tensor."""
    second = 0.5 * (np.einsum("mac,mbcad->mbd", ginv, d2G)
                    + np.einsum("mac,madbc->mbd", ginv, d2G)
                    - np.einsum("mac,mbdac->mbd", ginv, d2G)
                    - np.einsum("mac,macbd->mbd", ginv, d2G))
    low = np.einsum("mef,mfca->meca", G, gam)
    trace_low = np.einsum("mac,meca->me", ginv, low)
    quad = (np.einsum("mac,mecb,meda->mbd", ginv, gam, low, optimize=True)
            - np.einsum("medb,me->mbd", gam, trace_low))
    return second + quad


def _ricci_fields(metric, X):
    G, ginv, dG, gam = _connection(metric, X)
    Ric = _ricci(G, ginv, metric.d2g(X), gam)
    Ric = 0.5 * (Ric + Ric.swapaxes(1, 2))
    R = np.einsum("mbd,mbd->m", ginv, Ric)
    return G, ginv, gam, Ric, R


def _scalar_curvature(metric, X):
    return _ricci_fields(metric, X)[4]


def _laplacian_of(metric, f, X, h=None):
    """``Delta_g f`` at ``X`` for a batched callable, by central differences."""
    h = metric.step_high if h is None else h
    _, ginv, _, gam = _connection(metric, X)
    grad = fd.gradient(f, X, h, metric.order)
    w, V = np.linalg.eigh(ginv)
    d2 = fd.directional_second(f, X, V.transpose(0, 2, 1), h, metric.order)
    return np.sum(w * d2, axis=-1) - np.einsum("mij,mkij,mk->m", ginv, gam, grad)


def _laplacian_field(metric, u, X):
    _, ginv, _, gam = _connection(metric, X)
    return np.einsum("mij,mij->m", ginv, u.hessian(X)) - np.einsum(
        "mij,mkij,mk->m", ginv, gam, u.gradient(X))


def _q_batch(metric, X):
    G, ginv, gam, Ric, R = _ricci_fields(metric, X)
    lap_R = _laplacian_of(metric, lambda Y: _scalar_curvature(metric, Y), X)
    ric2 = np.einsum("mac,mbd,mab,mcd->m", ginv, ginv, Ric, Ric)
    return q_from_curvature(metric.dim, R, ric2, lap_R)


def _paneitz_batch(metric, u, X):
    n = metric.dim
    lap2 = _laplacian_of(metric, lambda Y: _laplacian_field(metric, u, Y), X)
    if metric.flat:
        return lap2

    def flux(Y):
        G, ginv, _, Ric, R = _ricci_fields(metric, Y)
        A = (Ric - (R / (2 * (n - 1)))[:, None, None] * G) / (n - 2)
        sigma1 = R / (2 * (n - 1))
        T = 4 * A - (n - 2) * sigma1[:, None, None] * G
        return np.einsum("mjl,mlk,mki,mi->mj", ginv, T, ginv, u.gradient(Y), optimize=True)

    _, _, _, gam = _connection(metric, X)
    J = fd.jacobian(flux, X, metric.step_high, metric.order)  # [m, k, j] = d_k V^j
    V = flux(X)
    div = np.einsum("mjj->m", J) + np.einsum("mjjk,mk->m", gam, V)
    return lap2 + div + 0.5 * (n - 4) * _q_batch(metric, X) * u(X)


def _chunked(fn, X):
    return np.concatenate([fn(X[i:i + _CHUNK]) for i in range(0, len(X), _CHUNK)])


def _unwrap(values, single):
    return float(values[0]) if single else values


# -- public operations --------------------------------------------------------


def christoffel(metric: ChartMetric, x):
    """Christoffel symbols ``Gamma[k, i, j]`` of the Levi-Civita connection.

    Accepts a single point (returns ``(n, n, n)``) or a batch ``(m, n)``.
    """
    X, single = _points(metric, x)
    metric.check_positive(X)
    gam = _connection(metric, X)[3]
    return gam[0] if single else gam


def curvature_at(metric: ChartMetric, x) -> CurvaturePack:
    """All pointwise curvature quantities at a single point ``x``."""
    X, _ = _points(metric, np.asarray(x, dtype=float).reshape(-1))
    n = metric.dim
    G = metric.check_positive(X)
    ginv = np.linalg.inv(G)
    gam = _christoffel(ginv, metric.dg(X))
    Rm = _riemann(G, metric.d2g(X), gam)[0]
    G, ginv = G[0], ginv[0]
    Ric = np.einsum("ac,abcd->bd", ginv, Rm)
    Ric = 0.5 * (Ric + Ric.T)
    R = float(np.einsum("bd,bd->", ginv, Ric))
    A = (Ric - R / (2 * (n - 1)) * G) / (n - 2)
    kn = (np.einsum("ac,bd->abcd", A, G) + np.einsum("bd,ac->abcd", A, G)
          - np.einsum("ad,bc->abcd", A, G) - np.einsum("bc,ad->abcd", A, G))
    lap_R = float(_laplacian_of(metric, lambda Y: _scalar_curvature(metric, Y), X)[0])
    ric2 = float(np.einsum("ac,bd,ab,cd->", ginv, ginv, Ric, Ric))
    return CurvaturePack(point=X[0].copy(), g=G, R=R, Ric=Ric, Riem=Rm, Weyl=Rm - kn, A=A,
                         sigma1A=R / (2 * (n - 1)), Q=float(q_from_curvature(n, R, ric2, lap_R)),
                         laplacian_R=lap_R)


def scalar_curvature(metric: ChartMetric, x):
    X, single = _points(metric, x)
    metric.check_positive(X)
    return _unwrap(_chunked(lambda Y: _scalar_curvature(metric, Y), X), single)


def q_curvature(metric: ChartMetric, x):
    """Q-curvature at one point or a batch of points."""
    X, single = _points(metric, x)
    metric.check_positive(X)
    return _unwrap(_chunked(lambda Y: _q_batch(metric, Y), X), single)


def laplacian(metric: ChartMetric, u: ScalarField, x):
    """``Delta_g u`` using the field's own gradient and Hessian."""
    X, single = _points(metric, x)
    metric.check_positive(X)
    return _unwrap(_laplacian_field(metric, u, X), single)


def paneitz_apply(metric: ChartMetric, u: ScalarField, x):
    """Apply the Paneitz operator of ``metric`` to ``u`` at ``x``.

    ``x`` may be one point or an ``(m, n)`` batch; the return value matches.
    """
    X, single = _points(metric, x)
    metric.check_positive(X)
    return _unwrap(_chunked(lambda Y: _paneitz_batch(metric, u, Y), X), single)


def conformal_covariance_residual(metric: ChartMetric, u: ScalarField, phi: ScalarField, x,
                                  relative=True):
    """Defect of ``P_g(phi u) = u^((n+4)/(n-4)) P_gbar(phi)`` with ``gbar = u^(4/(n-4)) g``.

    With ``relative=True`` (default) the absolute defect is divided by
    ``max(|P_g(phi u)|, |u^p P_gbar(phi)|, 1)``, which makes the number
    comparable across the large dynamic range of concentrated factors.
    """
    X, single = _points(metric, x)
    n = metric.dim
    if np.any(u(X) <= 0):
        raise PositivityError("conformal factor must be positive near x")
    gbar = metric.conformal(u)
    lhs = paneitz_apply(metric, phi * u, X)
    rhs = u(X) ** ((n + 4) / (n - 4)) * paneitz_apply(gbar, phi, X)
    res = np.abs(lhs - rhs)
    if relative:
        res = res / np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    return _unwrap(res, single)
