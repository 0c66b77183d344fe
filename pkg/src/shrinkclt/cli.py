"""Command-line front end.

Every subcommand takes an optional JSON config (``--config``) whose fields
may be overridden by ``--seed``, ``--reps`` and ``--workers``.  Results go
to ``--out`` (default ``$SHRINKCLT_OUT`` or ``./shrinkclt-out``) together
with ``manifest.json``, which records the resolved config so that
``shrinkclt rerun manifest.json`` reproduces the numeric outputs byte for
byte.  The worker count never enters any output file.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 unmet
precondition.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys

import jsonschema
import numpy as np

from . import __version__, clt, marginals, mixing
from .errors import (
    AlphabetTooLargeError,
    BelowThresholdError,
    ConvergenceError,
    DegenerateError,
    InapplicableError,
    MomentUndefinedError,
    QuadratureError,
    ShrinkCltError,
    UnsupportedDistributionError,
)
from .identities import identity_suite
from .processes import process_from_dict
from .shrink import shrink, shrink_magnitude

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PRECONDITION = 0, 2, 3, 4
OUT_ENV = "SHRINKCLT_OUT"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}
_grid = lambda item: {"type": "array", "items": item, "minItems": 1}  # noqa: E731

DIST_SCHEMA = {
    "type": "object",
    "required": ["dist"],
    "properties": {
        "dist": {"enum": ["normal", "standard_normal", "laplace", "student_t",
                          "zero_inflated_normal", "point_mass"]},
        "mean": _num, "sd": _pos, "rate": _pos, "df": _pos,
        "p": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}, "loc": _num,
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"dist": {"const": "student_t"}}}, "then": {"required": ["df"]}},
        {"if": {"properties": {"dist": {"const": "zero_inflated_normal"}}},
         "then": {"required": ["p"]}},
    ],
}

PROCESS_SCHEMA = {
    "type": "object",
    "required": ["process"],
    "properties": {
        "process": {"enum": ["iid", "ar1", "ma", "cancellation"]},
        "marginal": DIST_SCHEMA,
        "phi": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
        "weights": _grid(_num),
        "innovation": DIST_SCHEMA,
        "rho_1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "rho_star_1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "lambda": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"process": {"const": "iid"}}}, "then": {"required": ["marginal"]}},
        {"if": {"properties": {"process": {"const": "ar1"}}}, "then": {"required": ["phi"]}},
        {"if": {"properties": {"process": {"const": "ma"}}}, "then": {"required": ["weights"]}},
        {"if": {"properties": {"process": {"const": "cancellation"}}},
         "then": {"required": ["lambda"]}},
    ],
}

_common = {"seed": {"type": "integer", "minimum": 0}, "reps": {"type": "integer", "minimum": 2}}


def _schema(props, required=()):
    return {"type": "object", "properties": {**_common, **props},
            "required": list(required), "additionalProperties": False}


# (schema, defaults) per subcommand
COMMANDS = {
    "shrink-eval": (_schema({"x": _grid(_num), "r": _grid(_nonneg)}),
                    {"x": [-5.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0],
                     "r": [0.0, 0.5, 1.0, 2.0]}),
    "gfun": (_schema({"distribution": DIST_SCHEMA, "r_grid": _grid(_nonneg)}),
             {"distribution": {"dist": "normal"},
              "r_grid": [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]}),
    "check-tails": (_schema({"distribution": DIST_SCHEMA, "r_grid": _grid(_nonneg),
                             "eps_grid": _grid(_pos), "pass_threshold": _pos}),
                    {"distribution": {"dist": "normal"},
                     "r_grid": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                     "eps_grid": [0.25, 0.5, 1.0], "pass_threshold": 0.05}),
    "mixing-exact": (_schema({
        "joint": {"type": "array", "items": _grid(_nonneg), "minItems": 1},
        "joint_csv": {"type": "string"},
        "chain": {"type": "object", "required": ["lambda"],
                  "properties": {"lambda": PROCESS_SCHEMA["properties"]["lambda"]},
                  "additionalProperties": False},
        "lag": _posint, "max_lag": _posint}),
        {"chain": {"lambda": 0.4}, "lag": 1, "max_lag": 12}),
    "solve-rn": (_schema({"process": PROCESS_SCHEMA, "n": _posint,
                          "tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                         ["process"]),
                 {"n": 100, "tol": 0.02, "reps": 5000, "seed": 0}),
    "clt-run": (_schema({"process": PROCESS_SCHEMA, "n_grid": _grid(_posint),
                         "eps_grid": _grid(_pos),
                         "tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                        ["process"]),
                {"n_grid": [200, 2000], "eps_grid": [0.25, 0.5, 1.0], "tol": 0.02,
                 "reps": 5000, "seed": 0}),
    "cancellation-demo": (_schema({"lambda": PROCESS_SCHEMA["properties"]["lambda"],
                                   "n": _posint, "r": _pos}),
                          {"lambda": 0.4, "n": 100, "r": 1.0, "reps": 10_000, "seed": 0}),
    "identity-suite": (_schema({"trials": _posint, "atol": _pos}),
                       {"trials": 100_000, "atol": 1e-12, "seed": 0}),
}


class ConfigError(Exception):
    pass


def _normalize(command, cfg):
    cfg = dict(cfg)
    # a bare distribution at top level, e.g. {"dist": "laplace", "rate": 1.0}
    if command in ("gfun", "check-tails") and "dist" in cfg:
        keys = set(DIST_SCHEMA["properties"])
        cfg["distribution"] = {k: cfg.pop(k) for k in list(cfg) if k in keys}
    return cfg


def resolve_config(command, raw, overrides):
    schema, defaults = COMMANDS[command]
    cfg = {**defaults, **_normalize(command, raw)}
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = exc.json_path if hasattr(exc, "json_path") else "/".join(map(str, exc.path))
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    return cfg


# ---------------------------------------------------------------------------
# serialization


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, range):
        return list(obj)
    return obj


def dumps_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dumps_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    v = _clean(v)
    return repr(v) if isinstance(v, float) else v


class Output:
    """Collects files for one run and writes them with a manifest."""

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.files = {}
        self.provenance = {}

    def json(self, name, obj, provenance):
        self.files[name] = dumps_json({**obj, "provenance": provenance})
        self.provenance[name] = provenance

    def csv(self, name, header, rows, provenance):
        self.files[name] = dumps_csv(header, rows)
        self.provenance[name] = provenance

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        entries = []
        for name in sorted(self.files):
            data = self.files[name].encode("utf-8")
            with open(os.path.join(out_dir, name), "wb") as fh:
                fh.write(data)
            entries.append({"file": name, "sha256": hashlib.sha256(data).hexdigest(),
                            "provenance": self.provenance[name]})
        manifest = {"command": self.command, "config": self.config, "files": entries,
                    "version": __version__,
                    "provenance": "run manifest: resolved config and output digests"}
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(dumps_json(manifest))


# ---------------------------------------------------------------------------
# subcommands

PROV_G = "G(r) = int_0^inf t P(|X_0| > t + r) dt and E[shrink(X_0, r)^2] = 2 G(r)"


def cmd_shrink_eval(cfg, out, workers):
    rows = [(x, r, shrink(x, r), shrink_magnitude(x, r)) for r in cfg["r"] for x in cfg["x"]]
    out.csv("shrink.csv", ["x", "r", "shrink", "magnitude"], rows,
            "shrink(x, r) = sign(x) max(|x| - r, 0)")
    return rows


def cmd_gfun(cfg, out, workers):
    dist = marginals.distribution_from_dict(cfg["distribution"])
    rows = []
    for r in cfg["r_grid"]:
        g = marginals.g_function(dist, r)
        rows.append((r, g, 2 * g))
    out.csv("gfun.csv", ["r", "G", "shrunken_second_moment"], rows, PROV_G)
    out.json("gfun.json", {"distribution": dist.to_dict(),
                           "rows": [list(row) for row in rows]}, PROV_G)


def cmd_check_tails(cfg, out, workers):
    dist = marginals.distribution_from_dict(cfg["distribution"])
    rep = marginals.check_tail_conditions(dist, cfg["r_grid"], cfg["eps_grid"],
                                          cfg["pass_threshold"])
    prov = ("tail conditions: 0 < G(r) < inf for all r, and "
            "G(r + eps) / G(r) -> 0 as r -> inf (finite-grid surrogate)")
    out.json("tail_report.json", {"distribution": dist.to_dict(), **rep.to_dict()}, prov)
    out.csv("tail_ratios.csv", ["r", "eps", "ratio"], rep.ratio_curve, prov)
    return rep


def cmd_mixing_exact(cfg, out, workers):
    prov = ("alpha = sup |P(A n B) - P(A)P(B)|, rho = maximal correlation; "
            "0 <= 4 alpha <= rho <= 1")
    if "joint" in cfg or "joint_csv" in cfg:
        joint = (mixing.JointDistribution(cfg["joint"]) if "joint" in cfg
                 else mixing.JointDistribution.from_csv(cfg["joint_csv"]))
        rep = mixing.mixing_report(joint)
        out.json("mixing_report.json", {"joint": joint.p.tolist(), **rep.to_dict()}, prov)
        return rep
    lam = cfg["chain"]["lambda"]
    theta = lam / 4
    joint = mixing.chain_lagged_joint(theta, cfg["lag"])
    rep = mixing.mixing_report(joint, lag=cfg["lag"],
                               notes="exact joint of (V_0, V_lag) for the cancellation chain")
    decay = mixing.chain_rho_decay(theta, cfg["max_lag"])
    out.json("mixing_report.json", {
        "lambda": lam, "theta": theta, "joint": joint.p.tolist(), **rep.to_dict(),
        "alpha_bound_2theta": 2 * theta,
        "indicator_correlation": mixing.cancellation_indicator_correlation(lam),
        "rho_decay": decay.to_dict(),
    }, prov + "; chain: theta = lambda / 4, rho(sigma(V_0), sigma(V_n)) decays geometrically")
    out.csv("rho_decay.csv", ["lag", "rho"], list(zip(decay.lags, decay.rho)),
            "rho(sigma(V_0), sigma(V_n)) of the cancellation chain")
    out.csv("joint.csv", [f"V_lag={j + 1}" for j in range(3)], joint.p.tolist(),
            "exact joint law pi_i (P^lag)_ij")
    return rep


def cmd_solve_rn(cfg, out, workers):
    spec = process_from_dict(cfg["process"])
    res = clt.solve_rn(spec, cfg["n"], cfg["tol"], cfg["reps"], cfg["seed"], workers)
    prov = ("r(n) solving || sum_{k<=n} (shrink(X_k, r) - m_r) ||_2 = 1 "
            "by bracketing on common random numbers")
    out.json("rn_solve.json", {"process": cfg["process"], **res.to_dict()}, prov)
    out.csv("rn_history.csv", ["step", "r", "sigma_hat", "se"],
            [(h["step"], h["r"], h["sigma_hat"], h["se"]) for h in res.history], prov)
    return res


def cmd_clt_run(cfg, out, workers):
    spec = process_from_dict(cfg["process"])
    rep = clt.clt_experiment(spec, cfg["n_grid"], cfg["reps"], cfg["seed"], cfg["tol"],
                             cfg["eps_grid"], workers)
    prov = ("sum_{k<=n} shrink(X_k, r(n)) - n m_{r(n)} => N(0, 1); Lindeberg sums "
            "n E[Y^2; |Y| >= eps]; ratio E[S_n^2] / (n Var Y_0)")
    out.json("clt_report.json", rep.to_dict(), prov)
    header = ["n", "r_n", "ks", "mean", "variance", "skewness", "excess_kurtosis",
              "variance_ratio"]
    out.csv("clt_summary.csv", header, [[row[h] for h in header] for row in rep.rows], prov)
    lind = [(row["n"], row["r_n"], e, v) for row in rep.rows for e, v in row["lindeberg"].items()]
    out.csv("lindeberg.csv", ["n", "r_n", "eps", "value"], lind, prov)
    for n, sums in rep.samples.items():
        out.csv(f"standardized_sums_n{n}.csv", ["replicate", "sum"],
                list(enumerate(sums)), prov)


def cmd_cancellation_demo(cfg, out, workers):
    rep = clt.cancellation_demo(cfg["lambda"], cfg["n"], cfg["r"], cfg["reps"], cfg["seed"],
                                workers)
    prov = ("P(sum_{k<=n} shrink(X_k, r) = 0) >= P(V_1 = V_n = 1) >= 1 - 4 theta = 1 - lambda")
    out.json("cancellation.json", rep, prov)
    return rep


def cmd_identity_suite(cfg, out, workers):
    res = identity_suite(cfg["trials"], cfg["seed"], cfg["atol"])
    prov = "algebraic identities of shrink(x, r): semigroup, oddness, contraction, Lipschitz"
    out.json("identity_suite.json", {"results": res,
                                     "all_passed": all(v["passed"] for v in res.values())}, prov)
    for name, v in res.items():
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {name}  max_violation={v['max_violation']:.3g}")
    return EXIT_OK if all(v["passed"] for v in res.values()) else EXIT_NUMERIC


HANDLERS = {
    "shrink-eval": cmd_shrink_eval,
    "gfun": cmd_gfun,
    "check-tails": cmd_check_tails,
    "mixing-exact": cmd_mixing_exact,
    "solve-rn": cmd_solve_rn,
    "clt-run": cmd_clt_run,
    "cancellation-demo": cmd_cancellation_demo,
    "identity-suite": cmd_identity_suite,
}


def _exit_code(exc):
    if isinstance(exc, (BelowThresholdError, InapplicableError, MomentUndefinedError,
                        DegenerateError)):
        return EXIT_PRECONDITION
    if isinstance(exc, (QuadratureError, ConvergenceError)):
        return EXIT_NUMERIC
    if isinstance(exc, (AlphabetTooLargeError, UnsupportedDistributionError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def run(command, raw_config, overrides, out_dir, workers=1):
    """Execute one subcommand; returns the exit code."""
    try:
        cfg = resolve_config(command, raw_config, overrides)
        out = Output(command, cfg)
        code = HANDLERS[command](cfg, out, workers)
    except ShrinkCltError as exc:
        return _report_failure(exc)
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out.write(out_dir)
    return code if isinstance(code, int) else EXIT_OK


def _report_failure(exc):
    stage = getattr(exc, "stage", None)
    prefix = f"[{stage}] " if stage else ""
    print(f"error: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
    return _exit_code(exc)


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="shrinkclt", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV})")
        p.add_argument("--workers", type=int, default=1, help="worker threads")

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int)
        common(p)
    p = sub.add_parser("rerun", help="re-execute a manifest")
    p.add_argument("manifest")
    common(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get(OUT_ENV) or "shrinkclt-out"
    try:
        if args.command == "rerun":
            manifest = _load_json(args.manifest)
            command, raw, overrides = manifest.get("command"), manifest.get("config", {}), {}
            if command not in COMMANDS:
                raise ConfigError(f"manifest names unknown command {command!r}")
        else:
            command = args.command
            raw = _load_json(args.config) if args.config else {}
            overrides = {"seed": args.seed, "reps": args.reps}
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(command, raw, overrides, out_dir, args.workers)


if __name__ == "__main__":
    sys.exit(main())
