import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from paneitz.bubble import q_sphere, sphere_volume
from paneitz.errors import ConfigError, PositivityError, StepUnderflowError
from paneitz.flow import (FlowConfig, f2_of, fixed_point_constant, flow_multiplier, h_function,
                          make_state, mu_of, run, step, velocity)
from paneitz.sphere import ZonalField, critical_norm, energy, paneitz_apply_sphere


def perturbed(n=8, K=64, amp=0.05, mode=2):
    return ZonalField.constant(n, fixed_point_constant(n), K) + ZonalField.from_modes(
        n, K, {mode: amp})


@pytest.fixture(scope="module")
def reference_run():
    return run(FlowConfig(), perturbed())


# -- quotient --------------------------------------------------------------------------------

@pytest.mark.parametrize("n", [5, 8, 10])
@pytest.mark.parametrize("c", [0.3, 1.0, 4.0])
def test_mu_of_constant(n, c):
    assert mu_of(ZonalField.constant(n, c, 6)) == pytest.approx(q_sphere(n), rel=1e-12)


@given(st.floats(0.01, 100))
def test_mu_scale_invariant(s):
    u = perturbed(K=16)
    assert mu_of(s * u) == pytest.approx(mu_of(u), rel=1e-12)


def test_mu_above_sphere_constant_for_perturbation():
    u = ZonalField.constant(8, 1.0, 8) + ZonalField.from_modes(8, 8, {2: 0.1})
    assert mu_of(u) > q_sphere(8)


def test_mu_zero_field():
    with pytest.raises(ValueError):
        mu_of(ZonalField(8, np.zeros(4)))


# -- velocity ------------------------------------------------------------------------------

@pytest.mark.parametrize("normalization", ["energy", "quotient"])
@pytest.mark.parametrize("n", [5, 8, 11])
def test_fixed_point(n, normalization):
    u = ZonalField.constant(n, fixed_point_constant(n), 8)
    assert critical_norm(u) == pytest.approx(1, rel=1e-13)
    v = velocity(u, normalization)
    assert np.max(np.abs(v.coeffs)) <= 1e-12


@pytest.mark.parametrize("c", [0.5, 0.9, 1.3])
def test_constant_velocity_quotient_multiplier(c):
    n = 8
    v = velocity(ZonalField.constant(n, c, 4), "quotient")
    expected = -c + sphere_volume(n) ** (4 / n) * c ** ((n + 4) / (n - 4))
    assert np.allclose(v.nodal(), expected, rtol=1e-12, atol=1e-13)


def test_equilibria_of_quotient_multiplier():
    # among constants, velocity vanishes exactly at unit critical norm
    n = 8
    c0 = fixed_point_constant(n)
    for c in (0.8 * c0, c0, 1.2 * c0):
        u = ZonalField.constant(n, c, 4)
        still = np.max(np.abs(velocity(u, "quotient").coeffs)) <= 1e-10
        assert still == (abs(critical_norm(u) - 1) <= 1e-10)


def test_every_constant_is_still_under_energy_multiplier():
    v = velocity(ZonalField.constant(8, 0.37, 4), "energy")
    assert np.max(np.abs(v.coeffs)) <= 1e-13


def test_energy_pairing_vanishes():
    u = perturbed(K=32)
    phi = velocity(u)
    g = u.grid()
    pairing = g.integrate(phi.nodal() * (paneitz_apply_sphere(u).coeffs @ g.Y))
    assert abs(pairing) <= 1e-10 * energy(u)


def test_multiplier_definitions():
    u = perturbed(K=16)
    n = u.n
    assert flow_multiplier(u) == pytest.approx(energy(u) / critical_norm(u), rel=1e-14)
    assert flow_multiplier(u, "quotient") == pytest.approx(mu_of(u), rel=1e-14)
    with pytest.raises(ValueError):
        flow_multiplier(u, "volume")


def test_velocity_needs_positivity():
    with pytest.raises(PositivityError):
        velocity(ZonalField.from_modes(8, 4, {1: 1.0}))


# -- F2 --------------------------------------------------------------------------------------

def test_f2_fixed_point():
    assert f2_of(ZonalField.constant(8, fixed_point_constant(8), 16)) <= 1e-24


def test_f2_quadratic_in_perturbation():
    f2 = [f2_of(perturbed(K=16, amp=e)) for e in (1e-3, 1e-4)]
    assert 0 < f2[1] < f2[0]
    assert f2[1] / 1e-8 == pytest.approx(f2[0] / 1e-6, rel=0.05)


@given(st.floats(0.001, 0.02), st.integers(1, 5))
def test_f2_nonnegative(amp, mode):
    assert f2_of(perturbed(K=12, amp=amp, mode=mode)) >= 0


# -- H ----------------------------------------------------------------------------------------

def test_h_zero_and_errors():
    assert h_function(0.0) == 0.0
    with pytest.raises(ValueError):
        h_function(-1e-3)


@pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
def test_h_matches_defining_integral(s):
    # substitute t = w^2 so the integrand is smooth at 0
    val, _ = integrate.quad(lambda w: 2 * w / (1 + w), 0, math.sqrt(s), epsabs=0, epsrel=1e-13)
    assert h_function(s) == pytest.approx(val, rel=1e-12)


def test_h_small_argument_bound():
    s = np.logspace(-16, -2, 400)
    assert np.all(np.abs(h_function(s) / s - 1) <= np.sqrt(s))


def test_h_branches_join():
    lo, hi = h_function(1e-6 * (1 - 1e-12)), h_function(1e-6 * (1 + 1e-12))
    assert hi == pytest.approx(lo, rel=1e-10)


# -- stepping ---------------------------------------------------------------------------------

def test_single_step_preserves_energy():
    state = make_state(0.0, perturbed(K=32))
    new = step(state, 0.05)
    assert new.t == pytest.approx(0.05)
    assert energy(new.u) == pytest.approx(energy(state.u), rel=1e-9)
    assert new.mu <= state.mu


def test_equilibrium_run():
    u0 = ZonalField.constant(8, fixed_point_constant(8), 32)
    traj = run(FlowConfig(K=32, T_max=2.0, F2_stop=0.0), u0)
    assert max(traj.series("F2")) <= 1e-12
    assert np.allclose(traj.final.u.coeffs, u0.coeffs, atol=1e-12)


def test_reference_run(reference_run):
    traj = reference_run
    s = traj.summary()
    assert traj.mu_monotone and s["max_mu_increase"] <= 1e-8
    mu = traj.series("mu")
    assert np.all(np.diff(mu) <= 1e-8 * np.abs(mu[:-1]))
    assert s["min_u"] > 0
    assert s["F2_end"] < 1e-8 and s["t_end"] <= 50
    assert s["status"] == "F2_stop"
    assert math.isfinite(s["F2_integral"]) and s["F2_integral"] > 0


def test_volume_non_decreasing(reference_run):
    v = reference_run.series("volume")
    assert np.all(np.diff(v) >= -1e-12 * v[:-1])


def test_h_bracket_along_run(reference_run):
    F2 = reference_run.series("F2")
    small = F2[(F2 > 0) & (F2 < 1e-2)]
    r = h_function(small) / small
    assert np.all((r >= 1 - np.sqrt(small) - 1e-15) & (r <= 1 + 1e-15))


def test_snapshots_are_serializable():
    seen = []
    traj = run(FlowConfig(K=16, T_max=3.0, checkpoint_every=1.0), perturbed(K=16),
               on_snapshot=lambda t, u: seen.append((t, u.to_json())))
    assert [t for t, _ in seen] == [t for t, _ in traj.snapshots]
    assert len(seen) >= 4
    rec = json.loads(seen[-1][1])
    assert rec["n"] == 8 and len(rec["coeffs"]) == 17


def test_time_step_convergence_order():
    T = 2.0
    cfg = dict(K=32, T_max=T, F2_stop=0.0, mu_tol=1.0)
    u0 = perturbed(K=32)
    finals = [run(FlowConfig(dt_init=dt, dt_min=dt, dt_max=dt, fixed_dt=dt, **cfg), u0).final.u.coeffs
              for dt in (0.4, 0.2, 0.1)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    assert math.log2(e1 / e2) >= 3.5


def test_inequality_constant_stable_under_halving():
    u0 = perturbed(K=32)
    c = []
    for dt in (0.2, 0.1):
        traj = run(FlowConfig(K=32, T_max=10.0, F2_stop=1e-14, dt_init=dt, dt_min=dt, dt_max=dt,
                              fixed_dt=dt), u0)
        c.append(traj.inequality_constant())
    assert all(math.isfinite(x) for x in c)
    assert c[1] == pytest.approx(c[0], rel=0.1)


def test_quotient_multiplier_leaves_bounded_sets():
    u0 = ZonalField.constant(8, 1.05 * fixed_point_constant(8), 8)
    with pytest.raises(StepUnderflowError):
        run(FlowConfig(K=8, T_max=20.0, normalization="quotient"), u0)


# -- configuration ---------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [{"n": 4}, {"K": -1}, {"dt_min": 0.1, "dt_init": 0.05},
                                    {"T_max": 0}, {"normalization": "volume"}, {"fixed_dt": 0},
                                    {"checkpoint_every": 0}, {"rtol": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        FlowConfig(**kwargs)


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        run(FlowConfig(n=6), perturbed(n=8, K=8))
