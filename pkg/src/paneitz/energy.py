"""Quadrature of Paneitz energies on coordinate charts.

Two rules are available. ``"tensor"`` is the tensor product of
Gauss-Legendre rules on a sub-box; it has ``order**n`` nodes and is only
practical for small orders. ``"shell"`` integrates in polar coordinates
about a center: Gauss-Legendre panels in the radius times the ``2n``
vertices of the cross-polytope on the unit sphere. The shell rule is exact
on radial integrands up to the radial quadrature error and handles the
sharply peaked integrands of concentrating bubbles.
"""

from dataclasses import dataclass
import math

import numpy as np

from .bubble import sphere_volume
from .charts import ChartMetric, ScalarField
from .curvature import laplacian, paneitz_apply
from .errors import DomainError, SupportError

__all__ = [
    "ChartQuadrature",
    "energy_on_chart",
    "laplacian_energy_on_chart",
    "critical_norm_on_chart",
    "quotient_on_chart",
]


@dataclass(frozen=True)
class ChartQuadrature:
    """Quadrature specification for integrals over a region of a chart.

    Parameters
    ----------
    kind : {"shell", "tensor"}
    order : int
        Gauss-Legendre nodes per radial panel (shell) or per axis (tensor).
    radius : float
        Outer radius of the ball (shell) or half-width of the cube (tensor).
    center : tuple of float, optional
        Center of the region; the origin by default.
    breaks : tuple of float
        Interior radii where the radial rule starts a new panel, e.g. the
        concentration scale and the cutoff radii.
    support_tol : float
        Relative size above which the integrand's field counts as nonzero on
        the region boundary.
    """

    kind: str = "shell"
    order: int = 24
    radius: float = 1.0
    center: tuple = None
    breaks: tuple = ()
    support_tol: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("shell", "tensor"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.order < 1 or self.radius <= 0:
            raise ValueError("quadrature order and radius must be positive")

    def _center(self, n):
        return np.zeros(n) if self.center is None else np.asarray(self.center, dtype=float)

    def nodes(self, n):
        """Nodes ``(m, n)`` and weights ``(m,)`` for the Euclidean volume."""
        c = self._center(n)
        x, w = np.polynomial.legendre.leggauss(self.order)
        if self.kind == "tensor":
            grids = np.meshgrid(*([x * self.radius] * n), indexing="ij")
            pts = np.stack([gr.ravel() for gr in grids], axis=-1) + c
            wts = np.prod(np.stack(np.meshgrid(*([w * self.radius] * n), indexing="ij")),
                          axis=0).ravel()
            return pts, wts
        edges = sorted({0.0, self.radius, *(b for b in self.breaks if 0 < b < self.radius)})
        radii, rw = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            radii.append(0.5 * (b - a) * x + 0.5 * (b + a))
            rw.append(0.5 * (b - a) * w)
        radii, rw = np.concatenate(radii), np.concatenate(rw)
        dirs = np.concatenate([np.eye(n), -np.eye(n)])
        pts = c + radii[:, None, None] * dirs[None]
        wts = (rw * radii ** (n - 1))[:, None] * np.full(2 * n, sphere_volume(n - 1) / (2 * n))
        return pts.reshape(-1, n), wts.ravel()

    def boundary(self, n, count=4):
        """Sample points on the boundary of the region."""
        c = self._center(n)
        if self.kind == "tensor":
            faces = np.concatenate([np.eye(n), -np.eye(n)]) * self.radius
            corner = np.ones(n) * self.radius
            return c + np.concatenate([faces, corner[None], -corner[None]])
        dirs = np.concatenate([np.eye(n), -np.eye(n)])
        diag = np.ones(n) / math.sqrt(n)
        return c + self.radius * np.concatenate([dirs, diag[None], -diag[None]])


def _prepare(metric, u, quad):
    n = metric.dim
    pts, wts = quad.nodes(n)
    if not np.all(metric.contains(pts)):
        raise DomainError("quadrature region is not inside the chart box")
    inner = np.abs(u(pts))
    edge = np.abs(u(quad.boundary(n)))
    if np.max(edge, initial=0.0) > quad.support_tol * max(np.max(inner, initial=0.0), 1e-300):
        raise SupportError("field does not vanish on the boundary of the quadrature region")
    G = metric.check_positive(pts)
    return pts, wts * np.sqrt(np.linalg.det(G))


def energy_on_chart(metric: ChartMetric, u: ScalarField, quad: ChartQuadrature) -> float:
    """``int u P_g u dmu_g`` over the quadrature region.

    ``u`` must vanish near the region boundary; otherwise
    :class:`SupportError` is raised.
    """
    pts, wts = _prepare(metric, u, quad)
    vals = u(pts)
    live = vals != 0
    if not np.any(live):
        return 0.0
    return float(np.sum(wts[live] * vals[live] * paneitz_apply(metric, u, pts[live])))


def laplacian_energy_on_chart(metric: ChartMetric, u: ScalarField, quad: ChartQuadrature) -> float:
    """``int |Delta_g u|^2 dmu_g``; equals the flat Paneitz energy after integrating by parts."""
    pts, wts = _prepare(metric, u, quad)
    return float(np.sum(wts * laplacian(metric, u, pts) ** 2))


def critical_norm_on_chart(metric: ChartMetric, u: ScalarField, quad: ChartQuadrature) -> float:
    """``int |u|^(2n/(n-4)) dmu_g``."""
    n = metric.dim
    pts, wts = _prepare(metric, u, quad)
    return float(np.sum(wts * np.abs(u(pts)) ** (2 * n / (n - 4))))


def quotient_on_chart(metric: ChartMetric, u: ScalarField, quad: ChartQuadrature) -> float:
    """Paneitz-Sobolev quotient ``E[u] / (int |u|^(2n/(n-4)))^((n-4)/n)``."""
    n = metric.dim
    return energy_on_chart(metric, u, quad) / critical_norm_on_chart(metric, u, quad) ** (
        (n - 4) / n)
