"""Desk-scale acceptance suite.

Each check returns a :class:`CheckResult` holding the measured quantity, the
tolerance it is held to, its wall time and its runtime budget. A check
passes when both the numerical condition and the time budget are met.
Checks never raise: module errors are caught and reported as failures.
"""

from dataclasses import dataclass, field
import math
import time
import traceback

import numpy as np

from . import bubble as bl
from .charts import bubble_field, constant_field, flat_chart, linear_field, sphere_chart
from .curvature import conformal_covariance_residual, q_curvature
from .flow import FlowConfig, fixed_point_constant, h_function, run
from .sphere import (MoebiusMap, ZonalField, companion, energy, kazdan_warner_integral,
                     random_positive_field)

__all__ = ["CheckResult", "DEFAULTS", "CHECKS", "run_acceptance", "format_table"]


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float
    budget: float
    details: dict = field(default_factory=dict)
    error: str = None

    @property
    def within_budget(self):
        return self.seconds <= self.budget

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.key}: {self.title} | measured {self.measured} | "
                f"tolerance {self.tolerance} | {self.seconds:.2f}s of {self.budget:g}s")


# Tolerances and parameters; any entry may be overridden by ``check.name`` keys.
DEFAULTS = {
    "sphere_q": {"dims": (5, 6, 8, 10), "points": 20, "tol": 1e-7, "budget": 10.0},
    "sobolev_constant": {"dims": (5, 8, 10), "alphas": (1e-1, 1e-2, 1e-3), "tol": 1e-6,
                         "scaling_tol": 1e-9, "budget": 5.0},
    "lemma_regimes": {"epsilon": 1.0, "alphas": (1e-2, 1e-3, 1e-4), "spread_tol": 0.01,
                      "log_tol": 0.02, "route_tol": 1e-8, "budget": 5.0},
    "gap": {"n": 10, "epsilon": 0.1, "W2": 1.0, "alpha": 1e-3, "alphas": (1e-2, 3e-3, 1e-3),
            "exponent": 4.0, "exponent_tol": 0.05, "log_alphas": (1e-2, 1e-3, 1e-4),
            "log_epsilon": 0.1, "ratio": 10.0, "budget": 30.0},
    "kazdan_warner": {"n": 5, "K": 64, "fields": 10, "tol": 1e-6, "drift_tol": 1e-6,
                      "lambdas": (0.5, 2.0), "budget": 60.0},
    "flow": {"n": 8, "K": 64, "amplitude": 0.05, "T_max": 50.0, "F2_tol": 1e-8,
             "mu_tol": 1e-8, "budget": 120.0},
    "covariance": {"dims": (5, 8), "half_width": 0.25, "points": 4, "alpha": 1.0,
                   "tol": 1e-6, "budget": 10.0},
}


def _fmt(x):
    return f"{x:.3g}"


def check_sphere_q(p, rng):
    worst = 0.0
    per_dim = {}
    for n in p["dims"]:
        chart = sphere_chart(n)
        X = rng.uniform(-1, 1, (p["points"], n)) / math.sqrt(n)
        err = float(np.max(np.abs(q_curvature(chart, X) / bl.q_curvature_sphere(n) - 1)))
        per_dim[n] = err
        worst = max(worst, err)
    return worst <= p["tol"], _fmt(worst), f"<= {p['tol']:g}", {"max_rel_error": per_dim}


def check_sobolev_constant(p, rng):
    worst, spread = 0.0, 0.0
    details = {}
    for n in p["dims"]:
        vals = [bl.whole_space_quotient(n, a) for a in p["alphas"]]
        q = [b / c ** ((n - 4) / n) for b, c in vals]
        err = max(abs(v / bl.q_sphere(n) - 1) for v in q)
        s = max(max(abs(b / vals[0][0] - 1), abs(c / vals[0][1] - 1)) for b, c in vals)
        details[n] = {"rel_error": err, "alpha_spread": s}
        worst, spread = max(worst, err), max(spread, s)
    ok = worst <= p["tol"] and spread <= p["scaling_tol"]
    return (ok, f"{_fmt(worst)} (alpha spread {_fmt(spread)})",
            f"<= {p['tol']:g} (spread <= {p['scaling_tol']:g})", details)


def check_lemma_regimes(p, rng):
    eps, alphas = p["epsilon"], p["alphas"]
    v10 = [bl.lemma31_quadrature(10, eps, a) for a in alphas]
    spread10 = max(abs(a / b - 1) for a in v10 for b in v10)
    ratios8 = [bl.lemma31_quadrature(8, eps, a) / math.log(a) for a in alphas]
    spread8 = max(ratios8) / min(ratios8) - 1 if min(ratios8) > 0 else math.inf
    route = max(abs(bl.lemma31_closed_form(n, eps, a) / bl.lemma31_quadrature(n, eps, a) - 1)
                for n in (8, 10) for a in alphas)
    ok10 = spread10 < p["spread_tol"] and max(v10) < 0
    ok8 = min(ratios8) > 0 and spread8 <= p["log_tol"]
    okr = route <= p["route_tol"]
    measured = (f"n=10 spread {_fmt(spread10)}; n=8 value/log(alpha) spread {_fmt(spread8)}; "
                f"routes {_fmt(route)}")
    tol = (f"< {p['spread_tol']:g}; <= {p['log_tol']:g}; <= {p['route_tol']:g}")
    return ok10 and ok8 and okr, measured, tol, {
        "n10_values": v10, "n8_ratios": ratios8, "n10_ok": ok10, "n8_ok": ok8, "routes_ok": okr}


def check_gap(p, rng):
    n = p["n"]
    single = bl.gap_certificate(n, [p["alpha"]], p["epsilon"], p["W2"])
    below = single.relative_gaps[0] < 0
    sweep = bl.gap_certificate(n, p["alphas"], p["epsilon"], p["W2"])
    exponent = sweep.deficit_fit.exponent
    ok_exp = abs(exponent - p["exponent"]) <= p["exponent_tol"]
    r8 = bl.gap_certificate(8, p["log_alphas"], p["log_epsilon"], p["W2"])
    ratio = r8.deficit_fit.residual / max(r8.deficit_fit_log.residual, 1e-300)
    ok_log = ratio >= p["ratio"]
    measured = (f"relative gap {single.relative_gaps[0]:.3g}; exponent {exponent:.4f}; "
                f"n=8 residual ratio {ratio:.3g}")
    tol = f"< 0; {p['exponent']:g} +- {p['exponent_tol']:g}; >= {p['ratio']:g}"
    return below and ok_exp and ok_log, measured, tol, {
        "bound": single.quotient_upper_bounds[0], "q_sphere": single.q_sphere,
        "terms": single.gap_terms[0], "below": below, "exponent_ok": ok_exp,
        "log_model_ok": ok_log}


def check_kazdan_warner(p, rng):
    n, K = p["n"], p["K"]
    kw, drift = 0.0, 0.0
    for _ in range(p["fields"]):
        u = random_positive_field(n, K, rng)
        kw = max(kw, kazdan_warner_integral(u).relative)
        E = energy(u)
        for lam in p["lambdas"]:
            drift = max(drift, abs(energy(companion(u, MoebiusMap(n, lam))) / E - 1))
    ok = kw <= p["tol"] and drift <= p["drift_tol"]
    return (ok, f"KW {_fmt(kw)}; energy drift {_fmt(drift)}",
            f"<= {p['tol']:g}; <= {p['drift_tol']:g}", {"kw": kw, "drift": drift})


def check_flow(p, rng):
    n, K = p["n"], p["K"]
    u0 = ZonalField.constant(n, fixed_point_constant(n), K) + ZonalField.from_modes(
        n, K, {2: p["amplitude"]})
    traj = run(FlowConfig(n=n, K=K, T_max=p["T_max"], mu_tol=p["mu_tol"]), u0)
    F2 = traj.series("F2")
    small = F2[(F2 < 1e-2) & (F2 > 0)]
    ratio = h_function(small) / small
    h_ok = bool(np.all((ratio >= 1 - np.sqrt(small) - 1e-15) & (ratio <= 1 + 1e-15)))
    s = traj.summary()
    ok = (traj.mu_monotone and s["min_u"] > 0 and s["F2_end"] < p["F2_tol"]
          and s["t_end"] <= p["T_max"] and h_ok)
    measured = (f"F2_end {_fmt(s['F2_end'])} at t={s['t_end']:.2f}; min_u {_fmt(s['min_u'])}; "
                f"max mu rise {_fmt(s['max_mu_increase'])}; H ok {h_ok}")
    tol = f"F2 < {p['F2_tol']:g} by t={p['T_max']:g}; mu rise <= {p['mu_tol']:g}"
    return ok, measured, tol, s


def check_covariance(p, rng):
    worst = 0.0
    per_dim = {}
    for n in p["dims"]:
        hw = p["half_width"]
        chart = flat_chart(n, half_width=hw)
        X = np.vstack([np.zeros(n), rng.uniform(-0.4 * hw, 0.4 * hw, (p["points"], n))])
        e1, e2 = np.eye(n)[0], np.eye(n)[1]
        u_b = bubble_field(n, p["alpha"])
        cases = {
            "identity": (constant_field(1.0), u_b),
            "bubble": (u_b, constant_field(1.0)),
            "linear": (linear_field(0.01 * e1, 1.0), linear_field(e2)),
            "bubble-linear": (u_b, linear_field(e2)),
        }
        res = {k: float(np.max(conformal_covariance_residual(chart, u, phi, X)))
               for k, (u, phi) in cases.items()}
        per_dim[n] = res
        worst = max(worst, max(res.values()))
    return worst <= p["tol"], _fmt(worst), f"<= {p['tol']:g}", per_dim


CHECKS = {
    "sphere_q": ("1", "sphere Q-curvature on stereographic charts", check_sphere_q),
    "sobolev_constant": ("2", "Paneitz-Sobolev constant from radial quadrature",
                         check_sobolev_constant),
    "lemma_regimes": ("3", "one-dimensional lemma: constant and logarithmic regimes",
                      check_lemma_regimes),
    "gap": ("4", "gap certificate and Weyl-deficit scaling", check_gap),
    "kazdan_warner": ("5", "Kazdan-Warner identity and companion energy invariance",
                      check_kazdan_warner),
    "flow": ("6", "flow diagnostics", check_flow),
    "covariance": ("7", "conformal covariance on flat charts", check_covariance),
}


def _parameters(key, overrides):
    p = dict(DEFAULTS[key])
    for name, value in (overrides or {}).items():
        check, _, param = name.partition(".")
        if check == key:
            if param not in p:
                raise KeyError(f"unknown parameter {name!r}")
            p[param] = value
    return p


def run_acceptance(seed=0, overrides=None, only=None, total_budget=300.0, echo=None):
    """Run the checks (all, or those named in ``only``) and return their results.

    The last entry is the overall verdict: every check passed and the whole
    suite finished within ``total_budget`` seconds. ``echo`` is called with
    each result line as soon as it is available.
    """
    for name in overrides or {}:
        check = name.partition(".")[0]
        if check not in CHECKS:
            raise KeyError(f"unknown check {check!r}")
        _parameters(check, overrides)
    results = []
    start = time.perf_counter()
    for key, (number, title, fn) in CHECKS.items():
        if only and key not in only:
            continue
        p = _parameters(key, overrides)
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, measured, tol, details = fn(p, rng)
            err = None
        except Exception as exc:  # a failing module is a failed check
            ok, measured, tol, details = False, "error", "-", {}
            err = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        dt = time.perf_counter() - t0
        res = CheckResult(f"{number}.{key}", title, bool(ok) and dt <= p["budget"], measured,
                          tol, dt, p["budget"], details, err)
        results.append(res)
        if echo:
            echo(res.line())
    total = time.perf_counter() - start
    overall = CheckResult("8.verify_all", "all checks pass within the total budget",
                          all(r.passed for r in results) and total <= total_budget,
                          f"{sum(r.passed for r in results)}/{len(results)} passed",
                          "all", total, total_budget)
    results.append(overall)
    if echo:
        echo(overall.line())
    return results


def format_table(results):
    rows = [("check", "result", "measured", "tolerance", "seconds")]
    for r in results:
        rows.append((r.key, "PASS" if r.passed else "FAIL", r.measured, r.tolerance,
                     f"{r.seconds:.2f}/{r.budget:g}"))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows)
