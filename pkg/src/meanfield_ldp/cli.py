"""Command-line interface.

Every subcommand reads an optional JSON config, applies flag overrides,
validates the result, writes its outputs to ``--out-dir`` and records a
``manifest.json`` holding the resolved config, its hash, the seed and the
library versions. ``meanfield-ldp rerun <manifest>`` replays a run; the
numerical outputs are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-convergence, diverged chain), 4 file or format error, 1 other errors.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import fileio
from .densities import (GridDensity, energy_of_density, entropy, fokker_planck_residual,
                        free_energy, rate, rate_gap)
from .errors import ConfigError, ConvergenceError, DivergedChainError, MeanFieldError
from .ldp_harness import EventSpec, equilibrium, estimate_ldp_curve, rate_infimum, sanov_compare, verify_tilting
from .measures import prohorov_1d, quotient_distance, wasserstein_1d
from .models import builtin_model, check_assumptions, mv_polynomial, rb_polynomial
from .sampler import SamplerConfig, sample_equilibrium
from .spt import CapitalCurve, capital_curve, empirical_curve, market_weights, sample_curves, typical_curve

log = logging.getLogger(__name__)

OUT_DIR_ENV = "MEANFIELD_LDP_OUT_DIR"
EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

COMMANDS = ("check-model", "sample", "stationary", "rate", "ldp", "tilting", "capital-curve", "metrics")

DEFAULTS = {
    "model": {"name": "rb:logistic-flux", "family": None, "coefficients": None, "sigma2": 2.0, "d": 1},
    "sampler": {"n": 16, "step": None, "burn_in": 1000, "thin": 10, "total_samples": 1000,
                "algorithm": "mala", "seed": 0, "chains": 1, "batch_size": 1024, "threads": 1},
    "grid": {"a": None, "b": None, "m": None},
    "check": {"samples": 200, "grid_points": 10000},
    "rate": {"density": None, "event": None},
    "ldp": {"event": {"kind": "mean_abs_at_least", "threshold": 1.8, "ell": None},
            "n_list": [8, 16, 32, 64], "chains": 10000, "compare_iid": False},
    "tilting": {"eta": [0.1, 1.0], "ell": 2.0, "intervals": None},
    "capital_curve": {"n": 64, "input": None, "offsets": "midpoint", "aggregate": "pooled"},
    "metrics": {"inputs": [], "p": 1.0},
}


# --------------------------------------------------------------------------- config


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'", key=where)
        if isinstance(base[key], dict) and key != "event":
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{where}' must be a table", key=where)
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    """Read a JSON config file and merge it over the defaults (unknown keys rejected)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}", key="--config") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}", key="--config") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object", key="<root>")
    return _merge(DEFAULTS, data)


def _need(cond, key, msg):
    if not cond:
        raise ConfigError(f"invalid value for '{key}': {msg}", key=key)


def _num(cfg, section, key, kind=float, minimum=None, allow_none=False):
    v = cfg[section][key]
    name = f"{section}.{key}"
    if v is None and allow_none:
        return None
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind is int:
        ok = ok and float(v).is_integer()
    _need(ok, name, f"expected a number, got {v!r}")
    if minimum is not None:
        _need(v >= minimum, name, f"must be >= {minimum}")
    return kind(v)


def validate(cfg: dict) -> dict:
    """Check types and ranges of every key; returns the config unchanged."""
    m = cfg["model"]
    _need(m["name"] is None or isinstance(m["name"], str), "model.name", "must be a string")
    _need(m["family"] in (None, "mv", "rb"), "model.family", "must be 'mv' or 'rb'")
    if m["name"] is None:
        _need(m["family"] is not None and m["coefficients"] is not None, "model.coefficients",
              "custom models need family and coefficients")
    _need(isinstance(m["sigma2"], (int, float)) and m["sigma2"] > 0, "model.sigma2", "must be positive")
    _num(cfg, "model", "d", int, 1)
    s = cfg["sampler"]
    _num(cfg, "sampler", "n", int, 2)
    _num(cfg, "sampler", "step", float, 0, allow_none=True)
    for k in ("burn_in", "total_samples"):
        _num(cfg, "sampler", k, int, 0)
    for k in ("thin", "chains", "batch_size", "threads"):
        _num(cfg, "sampler", k, int, 1)
    _num(cfg, "sampler", "seed", int, 0)
    _need(s["seed"] < 2**64, "sampler.seed", "must fit in 64 bits")
    _need(s["algorithm"] in ("em", "mala"), "sampler.algorithm", "must be 'em' or 'mala'")
    g = cfg["grid"]
    given = [g[k] is not None for k in ("a", "b", "m")]
    _need(all(given) or not any(given), "grid", "give all of a, b, m or none")
    if all(given):
        _need(g["b"] > g["a"], "grid.b", "must exceed grid.a")
        _num(cfg, "grid", "m", int, 16)
    ldp = cfg["ldp"]
    _event(ldp["event"], "ldp.event")
    _need(isinstance(ldp["n_list"], list) and ldp["n_list"] and all(isinstance(n, int) and n >= 2
                                                                    for n in ldp["n_list"]),
          "ldp.n_list", "must be a nonempty list of integers >= 2")
    _num(cfg, "ldp", "chains", int, 1)
    if cfg["rate"]["event"] is not None:
        _event(cfg["rate"]["event"], "rate.event")
    t = cfg["tilting"]
    _need(isinstance(t["eta"], list) and t["eta"] and all(isinstance(e, (int, float)) and e > 0 for e in t["eta"]),
          "tilting.eta", "must be a nonempty list of positive numbers")
    _num(cfg, "tilting", "ell", float, 1)
    _num(cfg, "capital_curve", "n", int, 1)
    _need(cfg["capital_curve"]["offsets"] in ("midpoint", "plotting"), "capital_curve.offsets",
          "must be 'midpoint' or 'plotting'")
    _need(cfg["capital_curve"]["aggregate"] in ("pooled", "mean"), "capital_curve.aggregate",
          "must be 'pooled' or 'mean'")
    _need(isinstance(cfg["metrics"]["inputs"], list), "metrics.inputs", "must be a list of paths")
    _num(cfg, "metrics", "p", float, 1)
    return cfg


def _event(e, key):
    _need(isinstance(e, dict), key, "must be a table")
    extra = set(e) - {"kind", "threshold", "ell"}
    if extra:
        raise ConfigError(f"unknown config key '{key}.{sorted(extra)[0]}'", key=f"{key}.{sorted(extra)[0]}")
    try:
        return EventSpec(e.get("kind"), e.get("threshold"), e.get("ell"))
    except (MeanFieldError, TypeError) as exc:
        raise ConfigError(f"invalid value for '{key}': {exc}", key=key) from exc


def build_model(cfg):
    m = cfg["model"]
    try:
        if m["name"] is not None:
            return builtin_model(m["name"], float(m["sigma2"]), int(m["d"]))
        if m["family"] == "mv":
            return mv_polynomial(m["coefficients"], float(m["sigma2"]), int(m["d"]))
        return rb_polynomial(m["coefficients"], float(m["sigma2"]))
    except MeanFieldError as exc:
        raise ConfigError(f"invalid model: {exc}", key="model") from exc


def _grid(cfg):
    g = cfg["grid"]
    return None if g["a"] is None else (float(g["a"]), float(g["b"]), int(g["m"]))


def _sampler_cfg(cfg):
    s = dict(cfg["sampler"])
    s["d"] = int(cfg["model"]["d"])
    return SamplerConfig(**s)


# --------------------------------------------------------------------------- commands


def cmd_check_model(cfg, out):
    rep = check_assumptions(build_model(cfg), samples=int(cfg["check"]["samples"]),
                            grid_points=int(cfg["check"]["grid_points"]), seed=int(cfg["sampler"]["seed"]))
    d = rep.to_dict()
    d["ok"] = rep.ok
    d["failures"] = rep.failures()
    return [fileio.dump_json(d, out / "assumptions.json")]


def cmd_sample(cfg, out):
    s = sample_equilibrium(build_model(cfg), _sampler_cfg(cfg))
    path = fileio.write_samples(s, out / "samples.csv")
    return [path, path.with_name(path.name + ".json")]


def cmd_stationary(cfg, out):
    model = build_model(cfg)
    eq = equilibrium(model, _grid(cfg))
    p = eq.density
    path = fileio.write_density(p, out / "density.csv")
    summary = {"model": model.name, "sigma2": model.sigma2, "free_energy": eq.F_star,
               "entropy": entropy(p), "energy": energy_of_density(p, model),
               "iterations": p.meta.get("iterations"), "grid": [p.a, p.b, p.m]}
    if model.family == "rb":
        summary["fokker_planck_residual"] = fokker_planck_residual(p, model)
    return [path, path.with_name(path.name + ".json"), fileio.dump_json(summary, out / "stationary.json")]


def cmd_rate(cfg, out):
    model = build_model(cfg)
    eq = equilibrium(model, _grid(cfg))
    res = {"model": model.name, "sigma2": model.sigma2, "F_star": eq.F_star}
    src = cfg["rate"]["density"]
    if src is not None:
        p = fileio.read_density(src)
        if not p.same_grid(eq.density):
            p = GridDensity.from_values(eq.density.a, eq.density.b,
                                        np.interp(eq.density.x, p.x, p.values, left=0.0, right=0.0))
        res["density"] = {"path": str(src), "free_energy": free_energy(p, model), "rate": rate(p, model, eq.F_star)}
        if model.family == "rb":
            res["density"]["rate_gap"] = rate_gap(p, model, eq.density)
    if cfg["rate"]["event"] is not None:
        ev = _event(cfg["rate"]["event"], "rate.event")
        res["event"] = {**ev.to_dict(), "rate_infimum": rate_infimum(model, ev, eq=eq),
                        "note": "minimum over the tilted family; an upper bound for the infimum over the event"}
    return [fileio.dump_json(res, out / "rate.json")]


def cmd_ldp(cfg, out):
    model = build_model(cfg)
    ev = _event(cfg["ldp"]["event"], "ldp.event")
    scfg = _sampler_cfg(cfg)
    n_list, chains = cfg["ldp"]["n_list"], int(cfg["ldp"]["chains"])
    eq = equilibrium(model, _grid(cfg))
    est = estimate_ldp_curve(model, ev, n_list, chains, scfg, eq=eq)
    files = [fileio.write_table(est.to_records(), out / "ldp.csv", kind="ldp"),
             fileio.dump_json(est.summary(), out / "ldp.json")]
    if cfg["ldp"]["compare_iid"]:
        comp = sanov_compare(model, ev, n_list, chains, scfg, eq=eq)
        files += [fileio.write_table(comp.surrogate.to_records(), out / "ldp_iid.csv", kind="ldp"),
                  fileio.dump_json(comp.summary(), out / "ldp_compare.json")]
    return files


def cmd_tilting(cfg, out):
    model = build_model(cfg)
    t = cfg["tilting"]
    kw = {} if t["intervals"] is None else {"intervals": [tuple(map(float, iv)) for iv in t["intervals"]]}
    reports = [verify_tilting(model, float(eta), ell=float(t["ell"]), **kw).to_dict() for eta in t["eta"]]
    worst = max(r["max_residual"] for r in reports)
    return [fileio.dump_json({"model": model.name, "sigma2": model.sigma2, "reports": reports,
                              "max_residual": worst}, out / "tilting.json")]


def cmd_capital_curve(cfg, out):
    c = cfg["capital_curve"]
    src = c["input"]
    if src is None:
        curve = typical_curve(build_model(cfg), int(c["n"]), offsets=c["offsets"])
    else:
        with open(src) as fh:
            first = fh.readline()
        if first.startswith("# meanfield-ldp samples"):
            s = fileio.read_samples(src)
            if c["aggregate"] == "pooled":
                curve = empirical_curve(s.samples, offsets=c["offsets"])
            else:
                # average of the sorted log-weight curves over the recorded samples
                mean_curve = sample_curves(s.samples).mean(axis=0)
                curve = CapitalCurve(np.log(np.arange(1.0, mean_curve.size + 1)), mean_curve)
        else:
            curve = capital_curve(market_weights(np.log(fileio.read_weights_csv(src))))
    return [fileio.write_curve(curve, out / "curve.csv")]


def cmd_metrics(cfg, out):
    paths = cfg["metrics"]["inputs"]
    if len(paths) < 2:
        raise ConfigError("metrics needs at least two input measure files", key="metrics.inputs")
    p = float(cfg["metrics"]["p"])
    ms = [fileio.read_measure(q) for q in paths]
    base = f"wasserstein-{p:g}"
    rows = []
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            a, b = ms[i], ms[j]
            equal = a.n == b.n
            rows.append({"a": str(paths[i]), "b": str(paths[j]),
                         "prohorov": prohorov_1d(a, b) if equal else None,
                         "wasserstein": wasserstein_1d(a, b, p),
                         "quotient_prohorov": quotient_distance(a, b, "prohorov") if equal else None,
                         "quotient_wasserstein": quotient_distance(a, b, base, p)})
    return [fileio.write_table(rows, out / "metrics.csv", kind="metrics")]


HANDLERS = {"check-model": cmd_check_model, "sample": cmd_sample, "stationary": cmd_stationary,
            "rate": cmd_rate, "ldp": cmd_ldp, "tilting": cmd_tilting,
            "capital-curve": cmd_capital_curve, "metrics": cmd_metrics}


# --------------------------------------------------------------------------- manifest


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _versions():
    try:
        own = metadata.version("meanfield-ldp")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"meanfield-ldp": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def execute(command: str, cfg: dict, out_dir) -> Path:
    """Validate ``cfg``, run ``command`` into ``out_dir`` and write the manifest."""
    validate(cfg)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = HANDLERS[command](cfg, out)
    manifest = {"schema": "meanfield-ldp/manifest", "version": fileio.FORMAT_VERSION, "command": command,
                "config": cfg, "config_hash": config_hash(cfg), "seed": cfg["sampler"]["seed"],
                "versions": _versions(),
                "outputs": {Path(f).name: _sha256(f) for f in files}}
    return fileio.dump_json(manifest, out / "manifest.json")


# --------------------------------------------------------------------------- argument parsing


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_common(p):
    p.add_argument("--config", help="JSON config file (sections: model, sampler, grid, check, rate, "
                                    "ldp, tilting, capital_curve, metrics)")
    p.add_argument("--seed", type=int, help="master seed (overrides sampler.seed)")
    p.add_argument("--threads", type=int, help="worker threads for independent chain batches")
    p.add_argument("--out-dir", help=f"output directory (default: ${OUT_DIR_ENV} or ./meanfield-ldp-out)")
    p.add_argument("--model", help="built-in model: mv:quadratic, mv:cubic, mv:abs, rb:logistic-flux")
    p.add_argument("--sigma2", type=float, help="temperature sigma^2")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meanfield-ldp",
        description="Gibbs measures, stationary densities and large deviation checks for "
                    "mean-field particle systems.",
        epilog=f"Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 file error, 1 other. "
               f"Environment: {OUT_DIR_ENV} sets the default output directory.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"check-model": "report the structural assumptions of a model (assumptions.json)",
             "sample": "sample the centered Gibbs measure (samples.csv + sidecar)",
             "stationary": "equilibrium density on a grid (density.csv + stationary.json)",
             "rate": "Gibbs free energy and rate of a density or event (rate.json)",
             "ldp": "Monte Carlo LDP slopes across n (ldp.csv + ldp.json)",
             "tilting": "quadrature check of the tilting identity at n = 2 (tilting.json)",
             "capital-curve": "capital distribution curve (curve.csv)",
             "metrics": "pairwise distances between measure files (metrics.csv)"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        _add_common(p)
        if name in ("sample", "ldp"):
            p.add_argument("--algorithm", choices=("em", "mala"))
            p.add_argument("--step", type=float, help="time step h")
            p.add_argument("--burn-in", type=int)
        if name == "sample":
            p.add_argument("--n", type=int, help="particle count")
            p.add_argument("--total-samples", type=int)
            p.add_argument("--thin", type=int)
            p.add_argument("--chains", type=int, help="independent chains")
        if name == "ldp":
            p.add_argument("--chains", type=int, help="chains per n")
            p.add_argument("--n-list", type=_int_list, help="comma-separated particle counts")
            p.add_argument("--threshold", type=float, help="event threshold")
            p.add_argument("--compare-iid", action="store_true", help="also run the i.i.d. surrogate")
        if name == "capital-curve":
            p.add_argument("--input", help="samples CSV or plain weights CSV")
            p.add_argument("--n", type=int, help="points on the typical curve")
        if name == "metrics":
            p.add_argument("inputs", nargs="*", help="measure files (CSV or JSON)")
            p.add_argument("--p", type=float, help="Wasserstein order")
        if name == "rate":
            p.add_argument("--density", help="density CSV to evaluate")
        if name == "tilting":
            p.add_argument("--eta", type=float, action="append", help="confinement strength (repeatable)")
    rr = sub.add_parser("rerun", help="replay a run from its manifest", description="replay a run from its manifest")
    rr.add_argument("manifest", help="manifest.json written by a previous run")
    rr.add_argument("--out-dir", help="output directory")
    rr.add_argument("-v", "--verbose", action="store_true")
    return parser


def _apply_overrides(cfg, args):
    def put(section, key, value):
        if value is not None:
            cfg[section][key] = value

    put("sampler", "seed", args.seed)
    put("sampler", "threads", args.threads)
    put("model", "sigma2", args.sigma2)
    if args.model is not None:
        cfg["model"]["name"] = args.model
    cmd = args.command
    if cmd in ("sample", "ldp"):
        put("sampler", "algorithm", args.algorithm)
        put("sampler", "step", args.step)
        put("sampler", "burn_in", args.burn_in)
    if cmd == "sample":
        put("sampler", "n", args.n)
        put("sampler", "total_samples", args.total_samples)
        put("sampler", "thin", args.thin)
        put("sampler", "chains", args.chains)
    if cmd == "ldp":
        put("ldp", "chains", args.chains)
        put("ldp", "n_list", args.n_list)
        if args.threshold is not None:
            cfg["ldp"]["event"] = {**cfg["ldp"]["event"], "threshold": args.threshold}
        if args.compare_iid:
            cfg["ldp"]["compare_iid"] = True
    if cmd == "capital-curve":
        put("capital_curve", "input", args.input)
        put("capital_curve", "n", args.n)
    if cmd == "metrics":
        if args.inputs:
            cfg["metrics"]["inputs"] = list(args.inputs)
        put("metrics", "p", args.p)
    if cmd == "rate":
        put("rate", "density", args.density)
    if cmd == "tilting" and args.eta:
        cfg["tilting"]["eta"] = list(args.eta)
    return cfg


def _out_dir(args):
    return args.out_dir or os.environ.get(OUT_DIR_ENV) or "meanfield-ldp-out"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            try:
                man = fileio.load_json(args.manifest)
            except (OSError, json.JSONDecodeError) as exc:
                raise OSError(f"cannot read manifest {args.manifest}: {exc}") from exc
            if man.get("schema") != "meanfield-ldp/manifest" or man.get("command") not in HANDLERS:
                raise ConfigError(f"{args.manifest} is not a run manifest", key="manifest")
            cfg = _merge(DEFAULTS, man["config"])
            if config_hash(cfg) != man.get("config_hash"):
                raise ConfigError("manifest config does not match its hash", key="config_hash")
            path = execute(man["command"], cfg, _out_dir(args))
        else:
            cfg = load_config(args.config) if args.config else copy.deepcopy(DEFAULTS)
            cfg = _apply_overrides(cfg, args)
            path = execute(args.command, cfg, _out_dir(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DivergedChainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, fileio.FileFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MeanFieldError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
