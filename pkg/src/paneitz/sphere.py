"""Zonal spectral calculus on the round sphere ``S^n``.

A zonal function depends only on the polar angle, so it is a function of
``x = cos(theta)`` in ``[-1, 1]``. The sphere measure becomes
``|S^(n-1)| (1 - x^2)^((n-2)/2) dx`` and the zonal harmonics are Gegenbauer
polynomials ``C_k^nu(x)`` with ``nu = (n-1)/2``, normalized here to unit
``L^2(S^n)`` norm. The Paneitz operator of the round metric is diagonal in
this basis with eigenvalues

    lambda_k^2 + (n^2 - 2n - 4)/2 * lambda_k + n(n-4)(n^2-4)/16,
    lambda_k = k (k + n - 1).

Nonlinear operations (powers, compositions with conformal maps) are done at
Gauss-Jacobi nodes and projected back onto degrees ``<= K``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple
import json
import math
import warnings

import numpy as np
from scipy import special

from .bubble import sphere_volume
from .errors import PositivityError, TruncationWarning

__all__ = [
    "ZonalGrid",
    "zonal_grid",
    "zonal_harmonics",
    "ZonalField",
    "paneitz_eigenvalue",
    "paneitz_eigenvalue_factored",
    "paneitz_apply_sphere",
    "paneitz_inverse",
    "energy",
    "energy_nodal",
    "critical_norm",
    "nonlinear_power",
    "MoebiusMap",
    "companion",
    "q_curvature_of_conformal",
    "KazdanWarner",
    "kazdan_warner_integral",
    "random_positive_field",
    "TRUNCATION_FLAG",
]

TRUNCATION_FLAG = 1e-6


def _log_norms(n, k):
    nu = (n - 1) / 2
    return (math.log(math.pi) + (1 - 2 * nu) * math.log(2) + special.gammaln(k + 2 * nu)
            - special.gammaln(k + 1) - np.log(k + nu) - 2 * special.gammaln(nu)
            + math.log(sphere_volume(n - 1)))


def _gegenbauer_table(K, nu, x):
    # three-term recurrence; more accurate near x = +-1 than per-degree evaluation
    C = np.zeros((K + 1,) + x.shape)
    C[0] = 1.0
    if K >= 1:
        C[1] = 2 * nu * x
    for k in range(1, K):
        C[k + 1] = (2 * (k + nu) * x * C[k] - (k + 2 * nu - 1) * C[k - 1]) / (k + 1)
    return C


def zonal_harmonics(n, K, x, derivative=False):
    """Orthonormal zonal harmonics ``Y_0..Y_K`` at ``x = cos(theta)``.

    Returns an array of shape ``(K + 1, len(x))``; with ``derivative=True``
    returns ``d/dx`` of the same functions, using
    ``d/dx C_k^nu = 2 nu C_(k-1)^(nu+1)``.
    """
    x = np.asarray(x, dtype=float)
    nu = (n - 1) / 2
    scale = np.exp(-0.5 * _log_norms(n, np.arange(K + 1)))
    if not derivative:
        return _gegenbauer_table(K, nu, x) * scale[:, None]
    vals = np.zeros((K + 1,) + x.shape)
    if K >= 1:
        vals[1:] = 2 * nu * _gegenbauer_table(K - 1, nu + 1, x)
    return vals * scale[:, None]


@dataclass(frozen=True, eq=False)
class ZonalGrid:
    """Gauss-Jacobi nodes in ``x``, sphere weights and the basis tables."""

    n: int
    K: int
    x: np.ndarray
    weights: np.ndarray
    Y: np.ndarray       # (K+1, M)
    dY: np.ndarray      # (K+1, M), d/dx

    @property
    def M(self):
        return len(self.x)

    def project(self, values, chop=True):
        """Coefficients of the degree-``K`` projection of nodal values.

        With ``chop=True`` the trailing coefficients that are not larger than
        the rounding bound of their own quadrature sum are set to zero. They
        carry no information, and the Paneitz eigenvalues (degree four in
        ``k``) would otherwise amplify them.
        """
        wv = self.weights * values
        coeffs = self.Y @ wv
        if chop:
            bound = 4 * np.finfo(float).eps * math.sqrt(self.M) * (np.abs(self.Y) @ np.abs(wv))
            signal = np.nonzero(np.abs(coeffs) > bound)[0]
            last = signal[-1] if signal.size else -1
            coeffs[last + 1:] = 0.0
        return coeffs

    def integrate(self, values):
        return float(self.weights @ values)


@lru_cache(maxsize=32)
def zonal_grid(n, K, M=None) -> ZonalGrid:
    """Cached grid with ``M`` nodes (default ``4K``, at least 16)."""
    if int(n) != n or n < 5:
        raise ValueError("sphere dimension must be an integer >= 5")
    if K < 0:
        raise ValueError("truncation degree must be non-negative")
    M = max(4 * K, 16) if M is None else int(M)
    a = (n - 2) / 2
    x, w = special.roots_jacobi(M, a, a)
    w = w * sphere_volume(n - 1)
    Y = zonal_harmonics(n, K, x)
    dY = zonal_harmonics(n, K, x, derivative=True)
    for arr in (x, w, Y, dY):
        arr.setflags(write=False)
    return ZonalGrid(n, K, x, w, Y, dY)


@dataclass(eq=False)
class ZonalField:
    """Zonal function ``sum_k coeffs[k] Y_k`` on ``S^n``.

    ``meta`` carries diagnostics of the operation that produced the field,
    such as the energy discarded by a projection.
    """

    n: int
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).copy()
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("coefficients must be a non-empty vector")
        if int(self.n) != self.n or self.n < 5:
            raise ValueError("sphere dimension must be an integer >= 5")

    @property
    def K(self):
        return len(self.coeffs) - 1

    @classmethod
    def constant(cls, n, c, K=0):
        coeffs = np.zeros(K + 1)
        coeffs[0] = c * math.sqrt(sphere_volume(n))
        return cls(n, coeffs)

    @classmethod
    def from_modes(cls, n, K, modes):
        """Field from a ``{degree: coefficient}`` mapping; degree 0 may be given as a constant
        through :meth:`constant` instead."""
        coeffs = np.zeros(K + 1)
        for k, c in modes.items():
            coeffs[k] += c
        return cls(n, coeffs)

    @classmethod
    def from_function(cls, n, K, f, M=None):
        g = zonal_grid(n, K, M)
        return cls(n, g.project(f(g.x)))

    def grid(self, M=None) -> ZonalGrid:
        return zonal_grid(self.n, self.K, M)

    def nodal(self, M=None):
        return self.coeffs @ self.grid(M).Y

    def nodal_derivative(self, M=None):
        return self.coeffs @ self.grid(M).dY

    def __call__(self, x):
        return self.coeffs @ zonal_harmonics(self.n, self.K, np.atleast_1d(x))

    def resize(self, K):
        coeffs = np.zeros(K + 1)
        m = min(K, self.K) + 1
        coeffs[:m] = self.coeffs[:m]
        return ZonalField(self.n, coeffs)

    def _binary(self, other, op):
        if isinstance(other, ZonalField):
            if other.n != self.n:
                raise ValueError("fields live on spheres of different dimension")
            K = max(self.K, other.K)
            return ZonalField(self.n, op(self.resize(K).coeffs, other.resize(K).coeffs))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, s):
        if isinstance(s, ZonalField):
            return NotImplemented
        return ZonalField(self.n, self.coeffs * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return ZonalField(self.n, -self.coeffs)

    def l2_norm2(self):
        return float(self.coeffs @ self.coeffs)

    def to_json(self):
        return json.dumps({"n": self.n, "K": self.K, "coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text) if isinstance(text, str) else text
        if set(rec) != {"n", "K", "coeffs"}:
            raise ValueError("zonal field records have exactly the keys n, K, coeffs")
        if len(rec["coeffs"]) != rec["K"] + 1:
            raise ValueError("coefficient count does not match K")
        return cls(rec["n"], rec["coeffs"])


# -- Paneitz operator of the round metric -----------------------------------------


def paneitz_eigenvalue(n, k):
    """Eigenvalue of the round-sphere Paneitz operator on degree-``k`` harmonics."""
    lam = np.asarray(k) * (np.asarray(k) + n - 1)
    return lam * lam + (n * n - 2 * n - 4) / 2 * lam + n * (n - 4) * (n * n - 4) / 16


def paneitz_eigenvalue_factored(n, k):
    """``(lambda_k + (n+2)(n-4)/4) (lambda_k + n(n-2)/4)``."""
    lam = np.asarray(k) * (np.asarray(k) + n - 1)
    return (lam + (n + 2) * (n - 4) / 4) * (lam + n * (n - 2) / 4)


def _eigs(u):
    return paneitz_eigenvalue(u.n, np.arange(u.K + 1))


def paneitz_apply_sphere(u: ZonalField) -> ZonalField:
    return ZonalField(u.n, _eigs(u) * u.coeffs)


def paneitz_inverse(u: ZonalField) -> ZonalField:
    return ZonalField(u.n, u.coeffs / _eigs(u))


def energy(u: ZonalField) -> float:
    """``E[u] = int u P u``, evaluated as the diagonal form ``sum lambda_k c_k^2``."""
    return float(_eigs(u) @ (u.coeffs * u.coeffs))


def energy_nodal(u: ZonalField, M=None) -> float:
    """``int u P u`` by nodal quadrature; an independent check of :func:`energy`."""
    g = u.grid(M)
    return g.integrate(u.nodal(M) * (paneitz_apply_sphere(u).coeffs @ g.Y))


def critical_norm(u: ZonalField, M=None) -> float:
    """``int |u|^(2n/(n-4)) dmu`` by nodal quadrature."""
    g = u.grid(M)
    return g.integrate(np.abs(u.nodal(M)) ** (2 * u.n / (u.n - 4)))


def _project(n, K, values, M=None, what="projection"):
    """Project nodal values; ``meta['tail']`` is the relative L^2 energy lost."""
    g = zonal_grid(n, K, M)
    coeffs = g.project(values)
    total = g.integrate(values * values)
    tail = max(total - float(coeffs @ coeffs), 0.0) / total if total > 0 else 0.0
    return ZonalField(n, coeffs, meta={"tail": tail, "nodes": g.M, "source": what})


def nonlinear_power(u: ZonalField, p: float, M=None) -> ZonalField:
    """Projection of ``u^p`` onto degrees ``<= K``.

    Non-integer ``p`` needs ``u > 0`` at every node. The relative energy lost
    by the projection is stored in ``meta['tail']``.
    """
    vals = u.nodal(M)
    if float(p) != int(p) and np.min(vals) <= 0:
        raise PositivityError("non-integer power of a field with a non-positive nodal value")
    return _project(u.n, u.K, vals ** p, M, "power")


# -- conformal dilations ---------------------------------------------------------


@dataclass(frozen=True)
class MoebiusMap:
    """Dilation ``y -> lam * y`` in stereographic coordinates about the zonal axis.

    In ``x = cos(theta)`` (with ``|y| = tan(theta / 2)``) it reads
    ``x' = ((1+x) - lam^2 (1-x)) / ((1+x) + lam^2 (1-x))`` and its conformal
    factor is ``|det d phi|^(1/n) = 2 lam / ((1+x) + lam^2 (1-x))``.
    """

    n: int
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("dilation parameter must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        l2 = self.lam**2
        return ((1 + x) - l2 * (1 - x)) / ((1 + x) + l2 * (1 - x))

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        return 2 * self.lam / ((1 + x) + self.lam**2 * (1 - x))

    def jacobian_determinant(self, x):
        """``|det d phi|`` at the point with polar coordinate ``x``."""
        return self.conformal_factor(x) ** self.n

    def compose(self, other):
        """``self`` after ``other``."""
        if other.n != self.n:
            raise ValueError("maps act on spheres of different dimension")
        return MoebiusMap(self.n, self.lam * other.lam)

    def inverse(self):
        return MoebiusMap(self.n, 1 / self.lam)


def companion(u: ZonalField, phi: MoebiusMap, M=None, flag=TRUNCATION_FLAG) -> ZonalField:
    """``v = (u o phi) |det d phi|^((n-4)/(2n))`` projected onto degrees ``<= K``.

    Emits :class:`TruncationWarning` and sets ``meta['truncated']`` when the
    projection discards more than ``flag`` of the energy.
    """
    if phi.n != u.n:
        raise ValueError("map and field live on spheres of different dimension")
    if phi.lam == 1:
        return ZonalField(u.n, u.coeffs, meta={"tail": 0.0, "source": "companion"})
    g = u.grid(M)
    xs = phi(g.x)
    vals = (u.coeffs @ zonal_harmonics(u.n, u.K, xs)) * phi.conformal_factor(g.x) ** (
        (u.n - 4) / 2)
    v = _project(u.n, u.K, vals, M, "companion")
    v.meta["truncated"] = v.meta["tail"] > flag
    if v.meta["truncated"]:
        warnings.warn(f"companion projection discarded {v.meta['tail']:.3g} of the energy",
                      TruncationWarning, stacklevel=2)
    return v


# -- prescribed Q-curvature ------------------------------------------------------------


def _positive_nodal(u, M):
    vals = u.nodal(M)
    if np.min(vals) <= 0:
        raise PositivityError("conformal factor has a non-positive nodal value")
    return vals


def _q_nodal(u, M=None):
    n = u.n
    p = (n + 4) / (n - 4)
    vals = _positive_nodal(u, M)
    Pu = paneitz_apply_sphere(u).coeffs @ u.grid(M).Y
    return 2 / (n - 4) * Pu / vals**p, vals, Pu


def q_curvature_of_conformal(u: ZonalField, M=None) -> ZonalField:
    """Q-curvature of ``u^(4/(n-4)) g_{S^n}``, projected onto degrees ``<= K``.

    Uses ``P u = (n-4)/2 Q u^((n+4)/(n-4))``.
    """
    Q, _, _ = _q_nodal(u, M)
    return _project(u.n, u.K, Q, M, "q-curvature")


class KazdanWarner(NamedTuple):
    value: float
    scale: float

    @property
    def relative(self):
        return abs(self.value) / self.scale if self.scale > 0 else 0.0


def kazdan_warner_integral(u: ZonalField, M=None) -> KazdanWarner:
    """``int <X, grad Q> u^(2n/(n-4)) dmu`` for the dilation field ``X = grad(cos theta)``.

    For zonal ``Q`` the pairing is ``(1 - x^2) Q'(x)``; ``Q'`` is taken
    exactly from the coefficients. ``scale`` is the same integral of the
    absolute value.
    """
    n = u.n
    p = (n + 4) / (n - 4)
    g = u.grid(M)
    Q, vals, Pu = _q_nodal(u, M)
    dPu = paneitz_apply_sphere(u).coeffs @ g.dY
    du = u.nodal_derivative(M)
    dQ = 2 / (n - 4) * (dPu / vals**p - p * Pu * du / vals ** (p + 1))
    integrand = (1 - g.x**2) * dQ * vals ** (2 * n / (n - 4))
    return KazdanWarner(g.integrate(integrand), g.integrate(np.abs(integrand)))


def random_positive_field(n, K, rng, amplitude=0.05, decay=0.5):
    """``1 + sum_k a_k Y_k`` with ``a_k ~ amplitude * N(0, 1) * exp(-decay * k)``.

    The geometric decay makes the field analytic. Draws are repeated until the
    field is positive at every node.
    """
    k = np.arange(1, K + 1)
    for _ in range(100):
        coeffs = np.zeros(K + 1)
        coeffs[0] = math.sqrt(sphere_volume(n))
        coeffs[1:] = amplitude * rng.standard_normal(K) * np.exp(-decay * k)
        u = ZonalField(n, coeffs)
        if np.min(u.nodal()) > 0:
            return u
    raise PositivityError("could not draw a positive field; lower the amplitude")
