"""Command-line entry point: ``paneitz <experiment> [options]``.

Every experiment reads a flat ``key = value`` config file (``--config``),
applies ``--set key=value`` overrides, validates the result, and writes a CSV
data series plus ``manifest.json`` into the output directory. The output
directory defaults to ``$PANEITZ_OUTPUT_ROOT/<experiment>`` (or
``./paneitz-runs/<experiment>`` when the variable is unset).

Exit codes: 0 success, 1 a ``verify-all`` check failed, 2 invalid
configuration, 3 numerical failure, 4 I/O failure.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from . import bubble as bl
from .charts import (bubble_field, constant_field, flat_chart, linear_field, make_chart)
from .curvature import conformal_covariance_residual, curvature_at
from .errors import ConfigError, PaneitzError
from .flow import FlowConfig, fixed_point_constant, run
from .sphere import (MoebiusMap, ZonalField, companion, critical_norm, energy,
                     kazdan_warner_integral, random_positive_field)

OUTPUT_ROOT_ENV = "PANEITZ_OUTPUT_ROOT"

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


# -- config parsing --------------------------------------------------------------


def _int(text):
    return int(text)


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _floats(text):
    items = [s for s in str(text).replace(";", ",").split(",") if s.strip()]
    return tuple(_float(s) for s in items)


def _ints(text):
    return tuple(int(s) for s in str(text).replace(";", ",").split(",") if s.strip())


def _str(text):
    return str(text).strip()




def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else _float(text)


# key -> (parser, default) per experiment
SCHEMAS = {
    "curvature": {
        "chart": (_str, "sphere"), "n": (_int, 8), "points": (_int, 20), "seed": (_int, 0),
        "radius": (_float, 0.5), "derivatives": (_str, "analytic"), "order": (_int, 4),
        "step": (_opt_float, None), "step_high": (_opt_float, None),
        "q_tol": (_float, 1e-7), "symmetry_tol": (_float, 1e-8),
    },
    "covariance": {
        "n": (_int, 8), "points": (_int, 4), "seed": (_int, 0), "alpha": (_float, 1.0),
        "half_width": (_float, 0.25), "tol": (_float, 1e-6),
    },
    "lemma31": {
        "n": (_int, 8), "epsilon": (_float, 1.0), "alphas": (_floats, (1e-2, 1e-3, 1e-4)),
        "tol": (_float, 1e-12), "route_tol": (_float, 1e-8), "seed": (_int, 0),
    },
    "gap": {
        "n": (_int, 10), "epsilon": (_float, 0.1), "alphas": (_floats, (1e-2, 3e-3, 1e-3)),
        "W2": (_float, 1.0), "tol": (_float, 1e-10), "cutoff": (_str, "smoothstep"),
        "seed": (_int, 0),
    },
    "kazdan-warner": {
        "n": (_int, 5), "K": (_int, 64), "fields": (_int, 10), "seed": (_int, 0),
        "amplitude": (_float, 0.05), "decay": (_float, 0.5), "lambdas": (_floats, (0.5, 2.0)),
        "tol": (_float, 1e-6), "drift_tol": (_float, 1e-6),
    },
    "flow": {
        "n": (_int, 8), "K": (_int, 64), "mode": (_int, 2), "amplitude": (_float, 0.05),
        "dt_init": (_float, 0.05), "dt_min": (_float, 1e-8), "dt_max": (_float, 1.0),
        "rtol": (_float, 1e-10), "atol": (_float, 1e-13), "T_max": (_float, 50.0),
        "F2_stop": (_float, 1e-10), "checkpoint_every": (_float, 5.0),
        "normalization": (_str, "energy"), "mu_tol": (_float, 1e-8),
        "fixed_dt": (_opt_float, None), "F2_tol": (_float, 1e-8), "seed": (_int, 0),
    },
}


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    entries = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        entries[key.strip()] = value.strip()
    return entries


def parse_overrides(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def build_config(experiment, raw, seed=None):
    """Validate raw string entries against the experiment's schema."""
    schema = SCHEMAS[experiment]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw[key]!r} ({exc})") from None
        else:
            cfg[key] = default
    if seed is not None:
        cfg["seed"] = seed
    _validate(experiment, cfg)
    return cfg


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _validate(experiment, c):
    if "n" in c:
        _require(c["n"] >= 5, "n must be >= 5")
    if "alphas" in c:
        _require(len(c["alphas"]) > 0, "alpha grid is empty")
        _require(all(a > 0 for a in c["alphas"]), "alphas must be positive")
        _require(len(set(c["alphas"])) == len(c["alphas"]), "alphas must be distinct")
    for key in ("epsilon", "tol", "alpha", "half_width", "radius", "route_tol", "drift_tol"):
        if key in c:
            _require(c[key] > 0, f"{key} must be positive")
    if experiment == "curvature":
        _require(c["chart"] in ("flat", "sphere", "product", "polar"), "unknown chart")
        _require(c["derivatives"] in ("analytic", "fd"), "derivatives must be analytic or fd")
        _require(c["order"] in (2, 4), "order must be 2 or 4")
        _require(c["points"] >= 1, "points must be >= 1")
        if c["chart"] == "product":
            _require(c["n"] >= 5, "product charts need n >= 5")
    if experiment in ("lemma31", "gap"):
        _require(c["n"] >= 8, "this experiment needs n >= 8")
    if experiment == "gap":
        _require(c["W2"] >= 0, "W2 must be non-negative")
        _require(c["cutoff"] in ("smoothstep", "septic", "smooth"), "unknown cutoff")
    if experiment == "kazdan-warner":
        _require(c["K"] >= 1 and c["fields"] >= 1, "K and fields must be >= 1")
        _require(all(lam > 0 for lam in c["lambdas"]), "lambdas must be positive")
    if experiment == "flow":
        _require(0 <= c["mode"] <= c["K"], "mode must lie in [0, K]")
        FlowConfig(**_flow_kwargs(c))


def _flow_kwargs(c):
    keys = ("n", "K", "dt_init", "dt_min", "dt_max", "rtol", "atol", "T_max", "F2_stop",
            "checkpoint_every", "normalization", "mu_tol", "fixed_dt")
    return {k: c[k] for k in keys}


# -- output ------------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(rows):
    rows = list(rows)
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def atomic_write(path, text):
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Outputs:
    """Collects files for one run and writes them with a manifest."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = {}

    def add(self, name, text):
        self.files[name] = text

    def write(self, manifest):
        for name, text in self.files.items():
            atomic_write(self.directory / name, text)
        manifest["files"] = [
            {"name": name, "bytes": len(text.encode()),
             "sha256": hashlib.sha256(text.encode()).hexdigest()}
            for name, text in sorted(self.files.items())]
        atomic_write(self.directory / "manifest.json",
                     json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")


def _check(name, passed, value, tolerance):
    return {"check": name, "passed": bool(passed), "value": value, "tolerance": tolerance}


# -- experiments --------------------------------------------------------------------------


def exp_curvature(c, out):
    n = c["n"]
    kwargs = {"order": c["order"], "step": c["step"], "step_high": c["step_high"]}
    if c["chart"] == "product":
        chart = make_chart("product", p=n // 2, q=n - n // 2, **kwargs)
    else:
        chart = make_chart(c["chart"], n=n, **kwargs)
    if c["derivatives"] == "fd":
        chart = chart.without_derivatives()
    rng = np.random.default_rng(c["seed"])
    center = 0.5 * (chart.lower + chart.upper)
    X = center + rng.uniform(-1, 1, (c["points"], n)) * c["radius"] / math.sqrt(n)
    rows, q_err, sym = [], 0.0, 0.0
    expected = bl.q_curvature_sphere(n) if c["chart"] == "sphere" else (
        0.0 if c["chart"] in ("flat", "polar") else None)
    for i, x in enumerate(X):
        pack = curvature_at(chart, x)
        res = pack.symmetry_residuals()
        row = {"index": i, "R": pack.R, "Q": pack.Q, "ricci_norm2": pack.ricci_norm2,
               "weyl_norm2": pack.weyl_norm2, "laplacian_R": pack.laplacian_R,
               **{f"residual_{k}": v for k, v in res.items()},
               "weyl_trace_residual": pack.weyl_trace_residual()}
        if expected is not None:
            err = abs(pack.Q - expected) / max(abs(expected), 1.0)
            row["Q_error"] = err
            q_err = max(q_err, err)
        sym = max(sym, max(res.values()), row["weyl_trace_residual"])
        rows.append({**{f"x{j}": x[j] for j in range(n)}, **row})
    out.add("curvature.csv", csv_text(rows))
    checks = [_check("symmetry residuals", sym <= c["symmetry_tol"], sym, c["symmetry_tol"])]
    if expected is not None:
        checks.append(_check("Q matches closed form", q_err <= c["q_tol"], q_err, c["q_tol"]))
    return checks


def exp_covariance(c, out):
    n, hw = c["n"], c["half_width"]
    chart = flat_chart(n, half_width=hw)
    rng = np.random.default_rng(c["seed"])
    X = np.vstack([np.zeros(n), rng.uniform(-0.4 * hw, 0.4 * hw, (c["points"], n))])
    e1, e2 = np.eye(n)[0], np.eye(n)[1]
    u_b = bubble_field(n, c["alpha"])
    cases = {
        "identity": (constant_field(1.0), u_b),
        "bubble": (u_b, constant_field(1.0)),
        "linear": (linear_field(0.01 * e1, 1.0), linear_field(e2)),
        "bubble-linear": (u_b, linear_field(e2)),
    }
    rows, worst = [], 0.0
    for name, (u, phi) in cases.items():
        res = conformal_covariance_residual(chart, u, phi, X)
        for i, r in enumerate(np.atleast_1d(res)):
            rows.append({"case": name, "point": i, "residual": float(r)})
            worst = max(worst, float(r))
    out.add("covariance.csv", csv_text(rows))
    return [_check("relative covariance residual", worst <= c["tol"], worst, c["tol"])]


def exp_lemma31(c, out):
    n, eps = c["n"], c["epsilon"]
    rows, route = [], 0.0
    for a in c["alphas"]:
        res = bl.lemma31_result(n, eps, a, c["tol"])
        closed = bl.lemma31_closed_form(n, eps, a)
        rel = abs(closed / res.value - 1) if res.value else abs(closed)
        route = max(route, rel)
        rows.append({"alpha": a, "value": res.value, "closed_form": closed,
                     "route_difference": rel, "value_over_log_alpha": res.value / math.log(a),
                     "fitted_constant": res.fitted_constant, "regime": res.regime})
    out.add("lemma31.csv", csv_text(rows))
    checks = [_check("closed form matches quadrature", route <= c["route_tol"], route,
                     c["route_tol"])]
    consts = [r["fitted_constant"] for r in rows]
    if n == 8:
        checks.append(_check("value/log(alpha) positive", min(consts) > 0, min(consts), "> 0"))
        if len(rows) >= 2:
            # slope of value against log(alpha) estimates C2 without the O(1) offset
            A = np.column_stack([np.log(c["alphas"]), np.ones(len(rows))])
            slope = float(np.linalg.lstsq(A, [r["value"] for r in rows], rcond=None)[0][0])
            checks.append(_check("fitted C2 (slope in log alpha)", slope > 0, slope, "> 0"))
    else:
        checks.append(_check("values negative", max(r["value"] for r in rows) < 0,
                             max(r["value"] for r in rows), "< 0"))
    return checks


def exp_gap(c, out):
    rep = bl.gap_certificate(c["n"], c["alphas"], c["epsilon"], c["W2"], c["tol"], c["cutoff"])
    rows = list(rep.rows())
    fits = {"deficit": rep.deficit_fit, "deficit_log": rep.deficit_fit_log,
            "remainder": rep.remainder_fit}
    for row in rows:
        for name, fit in fits.items():
            row[f"{name}_exponent"] = fit.exponent if fit else float("nan")
            row[f"{name}_residual"] = fit.residual if fit else float("nan")
    out.add("gap.csv", csv_text(rows))
    checks = [_check(f"bound < q(S^{c['n']}) at alpha={a:g}", g < 0, g, "< 0")
              for a, g in zip(rep.alphas, rep.relative_gaps)]
    if rep.deficit_fit:
        checks.append(_check("Weyl deficit exponent", True, rep.deficit_fit.exponent, "reported"))
    return checks


def exp_kazdan_warner(c, out):
    n, K = c["n"], c["K"]
    rng = np.random.default_rng(c["seed"])
    rows, kw, drift = [], 0.0, 0.0
    for i in range(c["fields"]):
        u = random_positive_field(n, K, rng, c["amplitude"], c["decay"])
        res = kazdan_warner_integral(u)
        E, V = energy(u), critical_norm(u)
        row = {"field": i, "kw_value": res.value, "kw_scale": res.scale,
               "kw_relative": res.relative}
        kw = max(kw, res.relative)
        for lam in c["lambdas"]:
            v = companion(u, MoebiusMap(n, lam))
            d = abs(energy(v) / E - 1)
            row[f"energy_drift_{lam:g}"] = d
            row[f"volume_drift_{lam:g}"] = abs(critical_norm(v) / V - 1)
            row[f"tail_{lam:g}"] = v.meta["tail"]
            drift = max(drift, d)
        rows.append(row)
    out.add("kazdan_warner.csv", csv_text(rows))
    return [_check("Kazdan-Warner relative integral", kw <= c["tol"], kw, c["tol"]),
            _check("companion energy drift", drift <= c["drift_tol"], drift, c["drift_tol"])]


def exp_flow(c, out):
    n, K = c["n"], c["K"]
    u0 = ZonalField.constant(n, fixed_point_constant(n), K) + ZonalField.from_modes(
        n, K, {c["mode"]: c["amplitude"]})
    snapshots = []
    traj = run(FlowConfig(**_flow_kwargs(c)), u0,
               on_snapshot=lambda t, u: snapshots.append((t, u)))
    out.add("flow.csv", csv_text(traj.rows()))
    for i, (t, u) in enumerate(snapshots):
        rec = json.loads(u.to_json())
        rec["t"] = t
        out.add(f"checkpoints/field_{i:04d}.json", json.dumps(rec) + "\n")
    s = traj.summary()
    out.add("flow_summary.json", json.dumps(_jsonable(s), indent=2, sort_keys=True) + "\n")
    return [
        _check("mu non-increasing", traj.mu_monotone, s["max_mu_increase"], c["mu_tol"]),
        _check("positivity", s["min_u"] > 0, s["min_u"], "> 0"),
        _check("F2 decay", s["F2_end"] < c["F2_tol"], s["F2_end"], c["F2_tol"]),
    ]


EXPERIMENTS = {
    "curvature": exp_curvature,
    "covariance": exp_covariance,
    "lemma31": exp_lemma31,
    "gap": exp_gap,
    "kazdan-warner": exp_kazdan_warner,
    "flow": exp_flow,
}


def output_dir(args, experiment):
    if args.out:
        return Path(args.out)
    root = os.environ.get(OUTPUT_ROOT_ENV, "paneitz-runs")
    return Path(root) / experiment


def _manifest(experiment, config, started):
    return {"experiment": experiment, "config": config, "version": __version__,
            "started": started, "finished": datetime.now(timezone.utc).isoformat()}


def run_experiment(experiment, args, stdout=None):
    stdout = stdout or sys.stdout
    raw = read_config_file(args.config) if args.config else {}
    raw.update(parse_overrides(args.set))
    config = build_config(experiment, raw, args.seed)
    started = datetime.now(timezone.utc).isoformat()
    out = Outputs(output_dir(args, experiment))
    try:
        checks = EXPERIMENTS[experiment](config, out)
    except PaneitzError as exc:
        manifest = _manifest(experiment, config, started)
        manifest["status"] = "numerical-failure"
        manifest["checks"] = [_check(experiment, False, f"{type(exc).__name__}: {exc}", "-")]
        out.files.clear()
        out.write(manifest)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = _manifest(experiment, config, started)
    manifest["status"] = "ok"
    manifest["checks"] = checks
    out.write(manifest)
    for chk in checks:
        status = "pass" if chk["passed"] else "fail"
        print(f"{chk['check']}: {status} (value {_fmt(chk['value'])}, "
              f"tolerance {chk['tolerance']})", file=stdout)
    print(f"wrote {len(out.files) + 1} files to {out.directory}", file=stdout)
    return EXIT_OK


def _acceptance_overrides(raw):
    out = {}
    for key, value in raw.items():
        check, _, param = key.partition(".")
        if check not in acceptance.DEFAULTS or param not in acceptance.DEFAULTS[check]:
            raise ConfigError(f"unknown acceptance parameter {key!r}")
        default = acceptance.DEFAULTS[check][param]
        try:
            if isinstance(default, tuple):
                out[key] = _floats(value) if isinstance(default[0], float) else _ints(value)
            elif isinstance(default, int):
                out[key] = int(value)
            else:
                out[key] = _float(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    return out


def verify_all(args, stdout=None):
    stdout = stdout or sys.stdout
    raw = read_config_file(args.config) if args.config else {}
    raw.update(parse_overrides(args.set))
    overrides = _acceptance_overrides(raw)
    seed = 0 if args.seed is None else args.seed
    started = datetime.now(timezone.utc).isoformat()
    results = acceptance.run_acceptance(seed=seed, overrides=overrides)
    print(acceptance.format_table(results), file=stdout)
    for r in results:
        if r.error:
            print(f"{r.key}: {r.error}", file=stdout)
    out = Outputs(output_dir(args, "verify-all"))
    out.add("acceptance.csv", csv_text(
        {"check": r.key, "passed": r.passed, "measured": r.measured, "tolerance": r.tolerance,
         "seconds": round(r.seconds, 3), "budget": r.budget} for r in results))
    manifest = _manifest("verify-all", {"seed": seed, "overrides": overrides}, started)
    manifest["checks"] = [_check(r.key, r.passed, r.measured, r.tolerance) for r in results]
    manifest["status"] = "ok"
    out.write(manifest)
    return EXIT_OK if results[-1].passed else EXIT_CHECKS


def build_parser():
    parser = argparse.ArgumentParser(prog="paneitz", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*EXPERIMENTS, "verify-all"):
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="flat key = value config file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                       help="override one config entry (repeatable)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which matches the config exit code
        return int(exc.code or 0)
    try:
        if args.command == "verify-all":
            return verify_all(args)
        return run_experiment(args.command, args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PaneitzError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
