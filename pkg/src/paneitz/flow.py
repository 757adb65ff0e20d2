"""Nonlocal Q-curvature flow on the round sphere for zonal data.

The flow is

    du/dt = -u + mu P^{-1}(u^((n+4)/(n-4))),

integrated on the coefficient vector of a :class:`~paneitz.sphere.ZonalField`
with an embedded Dormand-Prince 5(4) pair.

Two choices of the multiplier are offered. ``"energy"`` (default) uses
``mu = E[u] / int u^(2n/(n-4))``. With it the energy is conserved, the
critical norm is non-decreasing, and the quotient ``mu_of(u)`` is therefore
non-increasing; it also makes ``int phi P u = 0`` hold identically.
``"quotient"`` uses the quotient itself,
``mu = E[u] / (int u^(2n/(n-4)))^((n-4)/n)``. That vector field has
constant equilibria only at unit critical norm, and its scaling mode is
unstable with rate ``8/(n-4)``; trajectories started off that norm leave
every bounded set.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, NonFiniteError, PositivityError, StepUnderflowError
from .sphere import ZonalField, critical_norm, energy, paneitz_eigenvalue

__all__ = [
    "NORMALIZATIONS",
    "FlowConfig",
    "FlowState",
    "Trajectory",
    "mu_of",
    "flow_multiplier",
    "velocity",
    "f2_of",
    "h_function",
    "fixed_point_constant",
    "make_state",
    "step",
    "run",
]

NORMALIZATIONS = ("energy", "quotient")

# Dormand-Prince 5(4)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass(frozen=True)
class FlowConfig:
    """Integration parameters.

    ``checkpoint_every`` is a time interval; a snapshot of the field is kept
    at the first accepted step past each multiple of it. ``fixed_dt`` turns
    off step-size control, which the convergence-order study needs.
    """

    n: int = 8
    K: int = 64
    dt_init: float = 0.05
    dt_min: float = 1e-8
    dt_max: float = 1.0
    rtol: float = 1e-10
    atol: float = 1e-13
    T_max: float = 50.0
    F2_stop: float = 1e-10
    checkpoint_every: float = 5.0
    normalization: str = "energy"
    mu_tol: float = 1e-8
    fixed_dt: float = None
    max_steps: int = 200000

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 5:
            raise ConfigError("n must be an integer >= 5")
        if int(self.K) != self.K or self.K < 0:
            raise ConfigError("K must be a non-negative integer")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if not self.T_max > 0:
            raise ConfigError("T_max must be positive")
        if self.F2_stop < 0 or self.rtol <= 0 or self.atol < 0 or self.mu_tol < 0:
            raise ConfigError("tolerances must be non-negative (rtol positive)")
        if self.checkpoint_every <= 0:
            raise ConfigError("checkpoint_every must be positive")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ConfigError("fixed_dt must be positive")


@dataclass(frozen=True)
class FlowState:
    t: float
    u: ZonalField
    mu: float
    F2: float
    volume: float
    min_u: float


def _check_positive(u):
    vals = u.nodal()
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("non-finite nodal values")
    m = float(np.min(vals))
    if m <= 0:
        raise PositivityError(f"field has a non-positive nodal value ({m:.3g})")
    return vals


def mu_of(u: ZonalField) -> float:
    """Paneitz-Sobolev quotient ``E[u] / (int |u|^(2n/(n-4)))^((n-4)/n)``."""
    V = critical_norm(u)
    if not np.any(u.coeffs) or V == 0:
        raise ValueError("the quotient of the zero field is undefined")
    return energy(u) / V ** ((u.n - 4) / u.n)


def flow_multiplier(u: ZonalField, normalization="energy") -> float:
    """The factor ``mu`` multiplying ``P^{-1}(u^((n+4)/(n-4)))`` in the flow."""
    V = critical_norm(u)
    if V == 0:
        raise ValueError("the flow multiplier of the zero field is undefined")
    if normalization == "energy":
        return energy(u) / V
    if normalization == "quotient":
        return energy(u) / V ** ((u.n - 4) / u.n)
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


def _rhs(n, K, coeffs, normalization, grid, eigs):
    vals = coeffs @ grid.Y
    if not np.all(np.isfinite(vals)):
        raise NonFiniteError("non-finite nodal values")
    if np.min(vals) <= 0:
        raise PositivityError("field has a non-positive nodal value")
    p = (n + 4) / (n - 4)
    up = vals**p
    V = grid.integrate(up * vals)
    E = float(eigs @ (coeffs * coeffs))
    mu = E / V if normalization == "energy" else E / V ** ((n - 4) / n)
    # projection without chopping keeps the vector field smooth in the coefficients
    return -coeffs + mu * grid.project(up, chop=False) / eigs


def velocity(u: ZonalField, normalization="energy") -> ZonalField:
    """``phi = -u + mu P^{-1}(u^((n+4)/(n-4)))``; needs ``u > 0`` at the nodes."""
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    eigs = paneitz_eigenvalue(u.n, np.arange(u.K + 1))
    return ZonalField(u.n, _rhs(u.n, u.K, u.coeffs, normalization, u.grid(), eigs))


def f2_of(u: ZonalField, normalization="energy") -> float:
    """``F_2 = int phi P phi`` for the flow velocity ``phi``."""
    return energy(velocity(u, normalization))


def h_function(F2):
    """``H(F_2) = int_0^F_2 ds / (1 + sqrt(s)) = 2 sqrt(F_2) - 2 log(1 + sqrt(F_2))``."""
    F2 = np.asarray(F2, dtype=float)
    if np.any(F2 < 0):
        raise ValueError("H is defined for F2 >= 0")
    s = np.sqrt(F2)
    # the closed form cancels for small s; switch to its Taylor series there
    series = s * s * (1 - 2 * s / 3 + s * s / 2 - 2 * s**3 / 5)
    out = np.where(s < 1e-3, series, 2 * s - 2 * np.log1p(s))
    return float(out) if out.ndim == 0 else out


def fixed_point_constant(n):
    """The constant ``|S^n|^(-(n-4)/(2n))`` whose critical norm is 1."""
    from .bubble import sphere_volume

    return sphere_volume(n) ** (-(n - 4) / (2 * n))


def make_state(t, u: ZonalField, normalization="energy") -> FlowState:
    vals = _check_positive(u)
    return FlowState(t=float(t), u=u, mu=mu_of(u), F2=f2_of(u, normalization),
                     volume=critical_norm(u), min_u=float(np.min(vals)))


def _dp_step(n, K, c, dt, normalization, grid, eigs, k1=None):
    k = [None] * 7
    k[0] = _rhs(n, K, c, normalization, grid, eigs) if k1 is None else k1
    for i in range(1, 7):
        ci = c + dt * sum(a * kj for a, kj in zip(_A[i], k[:i]) if a != 0)
        k[i] = _rhs(n, K, ci, normalization, grid, eigs)
    c5 = c + dt * sum(b * kj for b, kj in zip(_B5, k) if b != 0)
    err = dt * sum((b5 - b4) * kj for b5, b4, kj in zip(_B5, _B4, k))
    return c5, err, k[6]


def step(state: FlowState, dt, normalization="energy") -> FlowState:
    """One Dormand-Prince step of size ``dt`` (fifth-order solution, no control)."""
    u = state.u
    grid = u.grid()
    eigs = paneitz_eigenvalue(u.n, np.arange(u.K + 1))
    c5, _, _ = _dp_step(u.n, u.K, u.coeffs, dt, normalization, grid, eigs)
    if not np.all(np.isfinite(c5)):
        raise NonFiniteError("non-finite coefficients after a step")
    return make_state(state.t + dt, ZonalField(u.n, c5), normalization)


@dataclass
class Trajectory:
    """Accepted states of a run with its monitors."""

    config: FlowConfig
    states: list = field(default_factory=list)
    dts: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    rejected: int = 0
    positivity_retries: int = 0
    mu_violations: int = 0
    max_mu_increase: float = 0.0
    status: str = "running"
    cone_min: float = float("nan")

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    def series(self, name):
        return np.array([getattr(s, name) for s in self.states])

    @property
    def mu_monotone(self):
        return self.mu_violations == 0

    @property
    def min_u(self):
        return float(np.min(self.series("min_u")))

    @property
    def volume_range(self):
        v = self.series("volume")
        return float(v.min()), float(v.max())

    def f2_integral(self):
        """Trapezoidal ``int_0^t F_2 dt`` along the accepted steps."""
        return float(np.trapezoid(self.series("F2"), self.times)) if len(self.states) > 1 else 0.0

    def inequality_constant(self):
        """Largest ``(F2_{i+1} - F2_i) / dt / (F2_i (1 + sqrt(F2_i)))`` over the run.

        Steps where ``F_2`` has reached the round-off floor are skipped.
        """
        F2, t = self.series("F2"), self.times
        floor = 1e-24
        ratios = [(F2[i + 1] - F2[i]) / (t[i + 1] - t[i]) / (F2[i] * (1 + math.sqrt(F2[i])))
                  for i in range(len(F2) - 1) if F2[i] > floor]
        return max(ratios) if ratios else float("nan")

    def rows(self):
        for s in self.states:
            yield {"t": s.t, "mu": s.mu, "F2": s.F2, "volume": s.volume,
                   "min_u": s.min_u, "H": h_function(s.F2)}

    def summary(self):
        vmin, vmax = self.volume_range
        return {
            "status": self.status,
            "t_end": self.final.t,
            "steps": len(self.states) - 1,
            "rejected": self.rejected,
            "positivity_retries": self.positivity_retries,
            "mu_start": self.states[0].mu,
            "mu_end": self.final.mu,
            "mu_monotone": self.mu_monotone,
            "max_mu_increase": self.max_mu_increase,
            "F2_end": self.final.F2,
            "F2_integral": self.f2_integral(),
            "inequality_constant": self.inequality_constant(),
            "min_u": self.min_u,
            "volume_min": vmin,
            "volume_max": vmax,
            "cone_min": self.cone_min,
        }


def run(config: FlowConfig, u0: ZonalField, on_snapshot=None) -> Trajectory:
    """Integrate from ``u0`` until ``T_max`` or ``F_2 < F2_stop``.

    A step is retried with half the step size when a stage loses positivity
    or when the quotient rises by more than ``mu_tol * |mu|``. A step below
    ``dt_min`` raises :class:`StepUnderflowError`, or
    :class:`PositivityError` when positivity was the cause.
    ``on_snapshot(t, field)`` is called at each checkpoint.
    """
    if u0.n != config.n:
        raise ConfigError(f"initial field has n={u0.n}, config has n={config.n}")
    u0 = u0.resize(config.K)
    n, K, norm = config.n, config.K, config.normalization
    grid = u0.grid()
    eigs = paneitz_eigenvalue(n, np.arange(K + 1))
    traj = Trajectory(config)
    state = make_state(0.0, u0, norm)
    traj.states.append(state)
    # the cone condition is reported, not enforced
    traj.cone_min = float(np.min((eigs * u0.coeffs) @ grid.Y))
    traj.snapshots.append((0.0, u0))
    if on_snapshot:
        on_snapshot(0.0, u0)
    next_checkpoint = config.checkpoint_every

    fixed = config.fixed_dt is not None
    dt = config.fixed_dt if fixed else config.dt_init
    c = u0.coeffs.copy()
    k1 = None
    err_prev = 1.0
    while True:
        if state.F2 < config.F2_stop:
            traj.status = "F2_stop"
            break
        remaining = config.T_max - state.t
        if remaining <= 1e-12 * max(1.0, config.T_max):
            traj.status = "T_max"
            break
        if len(traj.states) > config.max_steps:
            traj.status = "max_steps"
            break
        h = min(dt, remaining)
        positivity_failure = False
        try:
            c5, err, k_last = _dp_step(n, K, c, h, norm, grid, eigs, k1)
            if not np.all(np.isfinite(c5)):
                raise NonFiniteError("non-finite coefficients")
            scale = config.atol + config.rtol * np.maximum(np.abs(c), np.abs(c5))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            new = make_state(state.t + h, ZonalField(n, c5), norm)
        except PositivityError:
            positivity_failure = True
            traj.positivity_retries += 1
        if not positivity_failure:
            accept = fixed or err_norm <= 1.0
            rise = new.mu - state.mu
            if accept and rise > config.mu_tol * abs(state.mu):
                if fixed or h <= config.dt_min:
                    traj.mu_violations += 1
                    traj.max_mu_increase = max(traj.max_mu_increase, rise / abs(state.mu))
                else:
                    accept = False
                    traj.rejected += 1
                    dt = 0.5 * h
                    continue
            if accept:
                traj.max_mu_increase = max(traj.max_mu_increase, rise / abs(state.mu))
                state, c, k1 = new, c5, k_last
                traj.states.append(state)
                traj.dts.append(h)
                if state.t >= next_checkpoint - 1e-12:
                    traj.snapshots.append((state.t, state.u))
                    if on_snapshot:
                        on_snapshot(state.t, state.u)
                    while next_checkpoint <= state.t + 1e-12:
                        next_checkpoint += config.checkpoint_every
            else:
                traj.rejected += 1
            if not fixed:
                # PI controller (Gustafsson) for the order-5 pair
                e = max(err_norm, 1e-10)
                factor = 0.9 * e ** (-0.7 / 5) * err_prev ** (0.4 / 5) if accept else 0.9 * e ** -0.2
                dt = min(config.dt_max, h * min(5.0, max(0.2, factor)))
                if accept:
                    err_prev = e
                if dt < config.dt_min:
                    raise StepUnderflowError(f"step size fell below dt_min at t={state.t:.6g}")
            continue
        # a stage lost positivity: halve and retry
        if fixed:
            raise PositivityError(f"positivity lost at t={state.t:.6g} with fixed step {h}")
        dt = 0.5 * h
        if dt < config.dt_min:
            raise PositivityError(f"positivity lost at t={state.t:.6g} below dt_min")
    if traj.snapshots[-1][0] != state.t:
        traj.snapshots.append((state.t, state.u))
        if on_snapshot:
            on_snapshot(state.t, state.u)
    return traj
