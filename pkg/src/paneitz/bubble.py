"""Radial Euclidean computations for the concentrating test functions.

Everything here is one-dimensional: integrals over balls and annuli in
``R^n`` of radial integrands reduce to ``|S^{n-1}| * int f(r) r^(n-1) dr``.
Radial integrals use the substitution ``r = alpha * tan(theta)`` so the
integrand is bounded and peaks away from the endpoints for every ``alpha``.
"""

from dataclasses import dataclass, field
from typing import NamedTuple
import math
import warnings

import numpy as np
from scipy import integrate, special

from .errors import FitError, QuadratureError

__all__ = [
    "sphere_volume",
    "q_curvature_sphere",
    "q_sphere",
    "BubbleProfile",
    "bubble",
    "bubble_bilaplacian",
    "cutoff",
    "BubbleParams",
    "test_function",
    "adaptive_quad",
    "radial_integral",
    "RadialIntegrals",
    "whole_space_quotient",
    "radial_integrals",
    "lemma31_integrand",
    "lemma31_bracket",
    "lemma31_sign_change",
    "lemma31_quadrature",
    "lemma31_closed_form",
    "Lemma31Result",
    "lemma31_result",
    "weyl_coefficient",
    "ScalingFit",
    "scaling_fit",
    "GapReport",
    "gap_certificate",
]


def sphere_volume(m):
    """Volume of the unit sphere ``S^m`` in ``R^(m+1)``."""
    return 2 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


def q_curvature_sphere(n):
    """Q-curvature of the unit round sphere, ``n (n^2 - 4) / 8``."""
    return n * (n * n - 4) / 8


def q_sphere(n):
    """Paneitz-Sobolev constant of the round sphere.

    ``(n-4)/2 * Q_{S^n} * |S^n|^(4/n)``.
    """
    if n < 5:
        raise ValueError("the Paneitz-Sobolev quotient needs n >= 5")
    return 0.5 * (n - 4) * q_curvature_sphere(n) * sphere_volume(n) ** (4 / n)


class BubbleProfile(NamedTuple):
    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray
    laplacian: np.ndarray


def bubble(n, alpha, r):
    """Bubble ``u = (2 alpha / (alpha^2 + r^2))^((n-4)/2)`` and its radial derivatives.

    Returns ``(u, u', u'', Delta_0 u)`` as a :class:`BubbleProfile`, with

    * ``u'  = -(n-4) r u / D``
    * ``u'' = (n-4) ((n-3) r^2 - alpha^2) u / D^2``
    * ``Delta_0 u = -(n-4) (2 r^2 + n alpha^2) u / D^2``

    where ``D = alpha^2 + r^2``.
    """
    r = np.asarray(r, dtype=float)
    D = alpha**2 + r**2
    u = (2 * alpha / D) ** ((n - 4) / 2)
    du = -(n - 4) * r / D * u
    d2u = (n - 4) * ((n - 3) * r**2 - alpha**2) / D**2 * u
    lap = -(n - 4) * (2 * r**2 + n * alpha**2) / D**2 * u
    return BubbleProfile(u, du, d2u, lap)


def bubble_bilaplacian(n, alpha, r):
    """``Delta_0^2 u_alpha``, which equals ``n (n-4)(n^2-4)/16 * u^((n+4)/(n-4))``."""
    u = bubble(n, alpha, r).u
    return n * (n - 4) * (n * n - 4) / 16 * u ** ((n + 4) / (n - 4))


# -- cutoff profiles ----------------------------------------------------------


def _smoothstep(t, k):
    # quintic 10t^3 - 15t^4 + 6t^5: C^2 at both ends
    if k == 0:
        return t**3 * (10 - 15 * t + 6 * t * t)
    if k == 1:
        return 30 * t**2 * (1 - t) ** 2
    if k == 2:
        return 60 * t * (1 - t) * (1 - 2 * t)
    raise ValueError("smoothstep derivatives are provided up to order 2")


def _septic(t, k):
    # 35t^4 - 84t^5 + 70t^6 - 20t^7: C^3 at both ends
    if k == 0:
        return t**4 * (35 - 84 * t + 70 * t * t - 20 * t**3)
    if k == 1:
        return 140 * t**3 * (1 - t) ** 3
    if k == 2:
        return 420 * t**2 * (1 - t) ** 2 * (1 - 2 * t)
    raise ValueError("septic derivatives are provided up to order 2")


def _psi(t, k):
    # exp(-1/t) for t > 0 with derivatives, zero otherwise
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        safe = np.where(t > 0, t, 1.0)
        e = np.where(t > 0, np.exp(-1 / safe), 0.0)
        if k == 0:
            return e
        if k == 1:
            return np.where(t > 0, e / safe**2, 0.0)
        return np.where(t > 0, e * (1 / safe**4 - 2 / safe**3), 0.0)


def _smooth(t, k):
    # C-infinity transition b / (a + b) with a = psi(1 - t), b = psi(t)
    a, b = _psi(1 - t, 0), _psi(t, 0)
    s = a + b
    if k == 0:
        return b / s
    a1, b1 = -_psi(1 - t, 1), _psi(t, 1)
    num1 = b1 * a - b * a1
    if k == 1:
        return num1 / s**2
    if k == 2:
        a2, b2 = _psi(1 - t, 2), _psi(t, 2)
        return ((b2 * a - b * a2) * s - 2 * num1 * (a1 + b1)) / s**3
    raise ValueError("smooth cutoff derivatives are provided up to order 2")


_PROFILES = {"smoothstep": _smoothstep, "septic": _septic, "smooth": _smooth}


def cutoff(r, epsilon, profile="smoothstep", derivative=0):
    """Radial cutoff ``eta_eps(r)``: 1 on ``[0, eps]``, 0 beyond ``2 eps``.

    ``profile`` selects the transition on ``[eps, 2 eps]``: ``"smoothstep"``
    (quintic, C^2 junctions), ``"septic"`` (C^3) or ``"smooth"`` (C^infinity).

    With the quintic profile ``grad Delta(eta u)`` jumps at ``r = eps``, so the
    pointwise bilaplacian misses a surface term. Use ``"septic"`` or
    ``"smooth"`` when ``int phi Delta^2 phi`` is evaluated pointwise.
    """
    try:
        step = _PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown cutoff profile {profile!r}") from None
    r = np.asarray(r, dtype=float)
    t = np.clip((r - epsilon) / epsilon, 0.0, 1.0)
    inside = (r > epsilon) & (r < 2 * epsilon)
    if derivative == 0:
        return np.where(r <= epsilon, 1.0, np.where(inside, 1 - step(t, 0), 0.0))
    return np.where(inside, -step(t, derivative) / epsilon**derivative, 0.0)


@dataclass(frozen=True)
class BubbleParams:
    """Dimension, concentration scale, cutoff radius and cutoff profile."""

    n: int
    alpha: float
    epsilon: float
    cutoff: str = "smoothstep"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ValueError(f"n must be an integer >= 5, got {self.n}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.cutoff not in _PROFILES:
            raise ValueError(f"unknown cutoff profile {self.cutoff!r}")


def test_function(params: BubbleParams, r):
    """``phi = eta_eps * u_alpha`` with ``phi'``, ``phi''`` and ``Delta_0 phi``."""
    n, eps = params.n, params.epsilon
    r = np.asarray(r, dtype=float)
    b = bubble(n, params.alpha, r)
    e0, e1, e2 = (cutoff(r, eps, params.cutoff, k) for k in range(3))
    with np.errstate(divide="ignore", invalid="ignore"):
        lap_eta = e2 + (n - 1) * np.where(r > 0, e1 / np.where(r > 0, r, 1.0), 0.0)
    return BubbleProfile(
        e0 * b.u,
        e1 * b.u + e0 * b.du,
        e2 * b.u + 2 * e1 * b.du + e0 * b.d2u,
        e0 * b.laplacian + 2 * e1 * b.du + lap_eta * b.u,
    )


# -- quadrature ----------------------------------------------------------------


def adaptive_quad(f, a, b, tol=1e-10, limit=400):
    """Adaptive Gauss-Kronrod quadrature to relative tolerance ``tol``.

    Raises :class:`QuadratureError` when the subdivision budget runs out.
    """
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=tol, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] failed: {exc}") from None
    return value


def radial_integral(n, alpha, f, r0, r1, tol=1e-10):
    """``int_{r0 <= |x| <= r1} f(|x|) dx`` in ``R^n``; ``r1`` may be ``inf``.

    Uses ``r = alpha tan(theta)``.
    """
    area = sphere_volume(n - 1)
    t0 = math.atan(r0 / alpha)
    t1 = math.pi / 2 if math.isinf(r1) else math.atan(r1 / alpha)

    def g(theta):
        c = math.cos(theta)
        if c <= 0:
            return 0.0
        r = alpha * math.tan(theta)
        return float(f(r)) * r ** (n - 1) * alpha / (c * c)

    return area * adaptive_quad(g, t0, t1, tol)


@dataclass(frozen=True)
class RadialIntegrals:
    """Radial integrals entering the energy expansion of ``phi = eta_eps u_alpha``.

    ``B`` is ``B_eps``, ``A`` the annulus ``B_2eps \\ B_eps`` and ``tail`` the
    complement of ``B_eps``.
    """

    params: BubbleParams
    biharm: float            # int_{R^n} |Delta u|^2
    biharm_tail: float       # int_tail |Delta u|^2
    biharm_annulus_u: float  # int_A |Delta u|^2
    biharm_annulus_phi: float  # int_A |Delta phi|^2
    biharm_phi: float        # int_{R^n} |Delta phi|^2
    mass: float              # int_B u^2
    mass_annulus: float      # int_A u^2
    r_mass: float            # int_B r u^2
    r2grad: float            # int_B r^2 |u'|^2
    r3grad: float            # int_B r^3 |u'|^2
    grad_annulus: float      # int_A |u'|^2
    crit: float              # int_{R^n} u^(2n/(n-4))
    crit_tail: float         # int_tail u^(2n/(n-4))
    crit_phi: float          # int_{R^n} phi^(2n/(n-4))

    @property
    def quotient(self):
        """``int |Delta u|^2 / (int u^(2n/(n-4)))^((n-4)/n)`` over all of R^n."""
        n = self.params.n
        return self.biharm / self.crit ** ((n - 4) / n)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "params"}
        out["quotient"] = self.quotient
        return out


def whole_space_quotient(n, alpha, tol=1e-10):
    """``(int |Delta u|^2, int u^(2n/(n-4)))`` over all of ``R^n`` for the bubble."""
    crit_p = 2 * n / (n - 4)
    biharm = radial_integral(n, alpha, lambda r: bubble(n, alpha, r).laplacian ** 2, 0.0,
                             math.inf, tol)
    crit = radial_integral(n, alpha, lambda r: bubble(n, alpha, r).u ** crit_p, 0.0,
                           math.inf, tol)
    return biharm, crit


def radial_integrals(params: BubbleParams, tol=1e-10) -> RadialIntegrals:
    n, a, eps = params.n, params.alpha, params.epsilon
    crit_p = 2 * n / (n - 4)

    def B(f):
        return radial_integral(n, a, f, 0.0, eps, tol)

    def A(f):
        return radial_integral(n, a, f, eps, 2 * eps, tol)

    def T(f):
        return radial_integral(n, a, f, eps, math.inf, tol)

    def lap2(r):
        return bubble(n, a, r).laplacian ** 2

    def u2(r):
        return bubble(n, a, r).u ** 2

    def du2(r):
        return bubble(n, a, r).du ** 2

    def crit(r):
        return bubble(n, a, r).u ** crit_p

    biharm_B = B(lap2)
    biharm_tail = T(lap2)
    biharm_annulus_phi = A(lambda r: test_function(params, r).laplacian ** 2)
    crit_B = B(crit)
    crit_tail = T(crit)
    return RadialIntegrals(
        params=params,
        biharm=biharm_B + biharm_tail,
        biharm_tail=biharm_tail,
        biharm_annulus_u=A(lap2),
        biharm_annulus_phi=biharm_annulus_phi,
        biharm_phi=biharm_B + biharm_annulus_phi,
        mass=B(u2),
        mass_annulus=A(u2),
        r_mass=B(lambda r: r * u2(r)),
        r2grad=B(lambda r: r * r * du2(r)),
        r3grad=B(lambda r: r**3 * du2(r)),
        grad_annulus=A(du2),
        crit=crit_B + crit_tail,
        crit_tail=crit_tail,
        crit_phi=crit_B + A(lambda r: test_function(params, r).u ** crit_p),
    )


# -- the one-dimensional lemma ---------------------------------------------------


def _lemma_weight(n):
    return (n - 4) * (n * n - 4 * n + 8) / (n * (n - 2))


def lemma31_integrand(n, sigma):
    """``[1 - c_n s^4/(1+s^2)^2] (1+s^2)^(4-n) s^(n-1)``, ``c_n = (n-4)(n^2-4n+8)/(n(n-2))``."""
    s2 = np.asarray(sigma, dtype=float) ** 2
    return (1 - _lemma_weight(n) * s2 * s2 / (1 + s2) ** 2) * (1 + s2) ** (4 - n) * np.asarray(
        sigma, dtype=float) ** (n - 1)


def lemma31_bracket(n):
    """The integer ``(n-8)(n^2+2n+36) + 280`` controlling the sign of the tail term."""
    return (n - 8) * (n * n + 2 * n + 36) + 280


def lemma31_sign_change(n):
    """Positive root ``sigma*`` where the lemma's integrand changes sign."""
    t = math.sqrt(n * (n - 2) / ((n - 4) * (n * n - 4 * n + 8)))
    if t >= 1:
        raise ValueError(f"integrand has no sign change for n={n}")
    return math.sqrt(t / (1 - t))


def _check_lemma_args(n, epsilon, alpha):
    if int(n) != n or n < 8:
        raise ValueError("the lemma concerns n >= 8")
    if not (epsilon > 0 and alpha > 0):
        raise ValueError("epsilon and alpha must be positive")


def lemma31_quadrature(n, epsilon, alpha, tol=1e-12):
    """``int_0^{eps/alpha}`` of :func:`lemma31_integrand`, by adaptive quadrature.

    Integrates in ``theta = arctan(sigma)``.
    """
    _check_lemma_args(n, epsilon, alpha)
    c = _lemma_weight(n)

    def g(theta):
        s, co = math.tan(theta), math.cos(theta)
        s2 = s * s
        return (1 - c * s2 * s2 / (1 + s2) ** 2) * (1 + s2) ** (4 - n) * s ** (n - 1) / (co * co)

    return adaptive_quad(g, 0.0, math.atan(epsilon / alpha), tol)


def _tail_moment(n, S):
    """``int_0^S s^(n+3) (1+s^2)^(2-n) ds`` in closed form.

    With ``y = s^2/(1+s^2)`` this is ``1/2 B(y; (n+4)/2, (n-8)/2)``; at ``n = 8``
    the beta function degenerates and the integral is
    ``1/2 [log(1+S^2) - sum_{k=1}^5 y^k / k]``.
    """
    y = S * S / (1 + S * S)
    if n == 8:
        return 0.5 * (math.log1p(S * S) - sum(y**k / k for k in range(1, 6)))
    a, b = (n + 4) / 2, (n - 8) / 2
    full = special.beta(a, b)
    if y > 0.5:
        # I_y(a, b) = 1 - I_{1-y}(b, a); 1-y is computed without cancellation
        return 0.5 * full * (1 - special.betainc(b, a, 1 / (1 + S * S)))
    return 0.5 * full * special.betainc(a, b, y)


def lemma31_closed_form(n, epsilon, alpha):
    """The lemma's integral via its exact antiderivative decomposition.

    Two boundary terms at ``S = eps/alpha`` minus
    ``(n-4) [(n-8)(n^2+2n+36)+280] / (n(n+2)(n-2))`` times the moment
    ``int_0^S s^(n+3)(1+s^2)^(2-n) ds``, which is evaluated in closed form.
    """
    _check_lemma_args(n, epsilon, alpha)
    S = epsilon / alpha
    log1 = math.log1p(S * S)
    boundary = (math.exp(n * math.log(S) + (4 - n) * log1) / n
                + 2 * (n - 4) / (n * (n + 2)) * math.exp((n + 2) * math.log(S) + (3 - n) * log1))
    coef = (n - 4) * lemma31_bracket(n) / (n * (n + 2) * (n - 2))
    return boundary - coef * _tail_moment(n, S)


@dataclass(frozen=True)
class Lemma31Result:
    n: int
    epsilon: float
    alpha: float
    value: float
    regime: str
    fitted_constant: float


def lemma31_result(n, epsilon, alpha, tol=1e-12) -> Lemma31Result:
    """Evaluate the lemma's integral and the constant it estimates.

    For ``n > 8`` the integral tends to ``-C1``; the estimate reported is
    ``-value``. For ``n = 8`` it diverges like ``C2 log(alpha)``; the estimate
    is ``value / log(alpha)``.
    """
    value = lemma31_quadrature(n, epsilon, alpha, tol)
    if n > 8:
        return Lemma31Result(n, epsilon, alpha, value, "constant-limit", -value)
    return Lemma31Result(n, epsilon, alpha, value, "log-divergent", value / math.log(alpha))


# -- Weyl coefficient and the gap certificate -------------------------------------


def weyl_coefficient(params: BubbleParams, tol=1e-10, route="direct", integrals=None):
    """Coefficient of ``|W(p)|^2`` in the energy of the test function.

    ``route="direct"`` combines the two radial integrals
    ``(n-4)/(24(n-1)) int_B u^2 - (n^2-4n+8)/(24n(n-1)(n-2)) int_B r^2 |u'|^2``;
    ``route="lemma"`` rescales ``r = alpha sigma`` and uses the lemma's
    integral, ``(n-4) 2^(n-4) |S^(n-1)| / (24(n-1)) alpha^4 * I(eps/alpha)``.
    """
    n = params.n
    if n < 8:
        raise ValueError("the Weyl coefficient is only negative for n >= 8")
    if route == "direct":
        I = integrals if integrals is not None else radial_integrals(params, tol)
        return ((n - 4) / (24 * (n - 1)) * I.mass
                - (n * n - 4 * n + 8) / (24 * n * (n - 1) * (n - 2)) * I.r2grad)
    if route == "lemma":
        pref = (n - 4) * 2 ** (n - 4) * sphere_volume(n - 1) / (24 * (n - 1))
        return pref * params.alpha**4 * lemma31_quadrature(n, params.epsilon, params.alpha,
                                                          min(tol, 1e-12))
    raise ValueError(f"unknown route {route!r}")


class ScalingFit(NamedTuple):
    exponent: float
    constant: float
    residual: float
    model: str


def scaling_fit(pairs, model="power"):
    """Least-squares fit of ``value ~ C alpha^p`` (``model="power"``) or
    ``value ~ C alpha^p log(1/alpha)`` (``model="power_log"``) in log coordinates.

    ``residual`` is the root-mean-square log residual.
    """
    pairs = [(float(a), float(v)) for a, v in pairs]
    if len(pairs) < 3:
        raise FitError("need at least three (alpha, value) pairs")
    alpha = np.array([a for a, _ in pairs])
    value = np.array([v for _, v in pairs])
    if len(np.unique(alpha)) != len(alpha) or np.any(alpha <= 0):
        raise FitError("alpha values must be distinct and positive")
    if np.any(value == 0) or not (np.all(value > 0) or np.all(value < 0)):
        raise FitError("values must be nonzero and share one sign")
    y = np.log(np.abs(value))
    if model == "power_log":
        if np.any(alpha >= 1):
            raise FitError("the power-log model needs alpha < 1")
        y = y - np.log(np.log(1 / alpha))
    elif model != "power":
        raise ValueError(f"unknown model {model!r}")
    design = np.column_stack([np.log(alpha), np.ones_like(alpha)])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return ScalingFit(float(coef[0]), float(np.sign(value[0]) * np.exp(coef[1])),
                      float(np.sqrt(np.mean(resid**2))), model)


@dataclass
class GapReport:
    """Per-alpha assembly of the quotient upper bound for the cut-off bubble."""

    n: int
    alphas: list
    epsilon: float
    W2: float
    q_sphere: float
    quotient_upper_bounds: list = field(default_factory=list)
    relative_gaps: list = field(default_factory=list)
    gap_terms: list = field(default_factory=list)
    deficit_fit: ScalingFit = None
    deficit_fit_log: ScalingFit = None
    remainder_fit: ScalingFit = None

    @property
    def below(self):
        """Whether each bound lies strictly below ``q(S^n)``."""
        return [g < 0 for g in self.relative_gaps]

    def rows(self):
        for a, bound, gap, terms in zip(self.alphas, self.quotient_upper_bounds,
                                        self.relative_gaps, self.gap_terms):
            yield {"n": self.n, "alpha": a, "epsilon": self.epsilon, "W2": self.W2,
                   "q_sphere": self.q_sphere, "bound": bound, "relative_gap": gap,
                   "below": gap < 0, **terms}


def gap_certificate(n, alpha_grid, epsilon, W2, tol=1e-10, cutoff="smoothstep") -> GapReport:
    """Assemble the test-function quotient bound on each alpha of ``alpha_grid``.

    The numerator is ``int_{R^n} |Delta u|^2 + W2 * weyl_coefficient`` plus
    the remainder integrals with unit constants (cutoff tail and annulus,
    ``int_B r u^2``, twice ``int_B r^3 |u'|^2`` and the annulus gradient and
    mass terms). The denominator is ``int u^(2n/(n-4))`` minus its tail
    outside ``B_eps``.

    The relative gap ``bound / q(S^n) - 1`` is formed from these corrections
    with ``log1p``/``expm1`` against the exact identity
    ``int |Delta u|^2 / (int u^(2n/(n-4)))^((n-4)/n) = q(S^n)``. The Weyl
    deficit is often far below the rounding unit of ``q(S^n)``, so a bound
    built in absolute terms could not resolve it.
    """
    alphas = [float(a) for a in alpha_grid]
    if not alphas:
        raise ValueError("empty alpha grid")
    if n < 8:
        raise ValueError("the certificate concerns n >= 8")
    if W2 < 0:
        raise ValueError("W2 = |W(p)|^2 must be non-negative")
    qs = q_sphere(n)
    report = GapReport(n=n, alphas=alphas, epsilon=float(epsilon), W2=float(W2), q_sphere=qs)
    deficits, remainders = [], []
    for a in alphas:
        params = BubbleParams(n, a, epsilon, cutoff)
        I = radial_integrals(params, tol)
        coef = weyl_coefficient(params, tol, integrals=I)
        rem_i = I.biharm_tail + I.biharm_annulus_phi
        rem_ii = I.r_mass + I.mass_annulus
        rem_iii_iv = 2 * I.r3grad + 2 * (I.grad_annulus + I.mass_annulus)
        remainder = rem_i + rem_ii + rem_iii_iv
        deficit = W2 * coef
        log_ratio = (math.log1p((deficit + remainder) / I.biharm)
                     - (n - 4) / n * math.log1p(-I.crit_tail / I.crit))
        gap = math.expm1(log_ratio)
        report.relative_gaps.append(gap)
        report.quotient_upper_bounds.append(qs * (1 + gap))
        report.gap_terms.append({
            "biharmonic": I.biharm,
            "weyl_coefficient": coef,
            "weyl_deficit": deficit,
            "remainder_cutoff": rem_i,
            "remainder_q_term": rem_ii,
            "remainder_schouten": rem_iii_iv,
            "remainder_total": remainder,
            "denominator": I.crit - I.crit_tail,
            "quotient_consistency": I.quotient / qs - 1,
        })
        deficits.append(deficit)
        remainders.append(I.r3grad)
    if len(alphas) >= 3:
        if W2 > 0:
            pairs = list(zip(alphas, deficits))
            report.deficit_fit = scaling_fit(pairs, "power")
            if max(alphas) < 1:
                report.deficit_fit_log = scaling_fit(pairs, "power_log")
        report.remainder_fit = scaling_fit(list(zip(alphas, remainders)), "power")
    return report
