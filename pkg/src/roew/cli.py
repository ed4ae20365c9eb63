"""Command-line front end.

Subcommands: ``gen`` (datasets), ``train`` (per-group witnesses),
``sweep`` (alpha x split metric grids), ``verify`` (witness checks).
Settings come from an optional JSON config file overridden by flags;
the seed falls back to the ROEW_SEED environment variable. Every
command writes a manifest naming its inputs, full configuration, and a
hash of that configuration, so a run is reproducible from the manifest
alone. Exit codes: 0 success, 1 usage or I/O error, 2 infeasible
training problem, 3 solver divergence.
"""

import argparse
import os
import sys
from pathlib import Path

from . import evalx, jsonio, measure, states, witness
from .drsvm import RobustParams, SolverConfig
from .errors import ConfigError, InfeasibleError, SolverDivergedError
from .states import GROUP_ORDER

DEFAULTS = {
    "seed": 0,
    "n_sep": 2000,
    "n_ent": 2000,
    "gamma_min": 0.4,
    "max_terms": 4,
    "noise": "gaussian",
    "noise_sigma": 0.05,
    "shots": 1000,
    "repeats": 50,
    "pooled_cov": False,
    "alpha": 0.7,
    "c": 20.0,
    "split": 0.2,
    "grid_n": 20,
    "jobs": 1,
    "alphas": [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.95],
    "splits": [0.2, 0.4, 0.6, 0.8],
}

_VALIDATORS = {
    "seed": (int, lambda v: v >= 0, "must be a nonnegative integer"),
    "n_sep": (int, lambda v: v >= 1, "must be >= 1"),
    "n_ent": (int, lambda v: v >= 4, "must be >= 4"),
    "gamma_min": (float, lambda v: 1.0 / 3.0 < v < 1.0, "must lie in (1/3, 1)"),
    "max_terms": (int, lambda v: v >= 1, "must be >= 1"),
    "noise": (str, lambda v: v in ("gaussian", "shot"), "must be 'gaussian' or 'shot'"),
    "noise_sigma": (float, lambda v: v >= 0.0, "must be >= 0"),
    "shots": (int, lambda v: v >= 1, "must be >= 1"),
    "repeats": (int, lambda v: v >= 2, "must be >= 2"),
    "pooled_cov": (bool, lambda v: True, ""),
    "alpha": (float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)"),
    "c": (float, lambda v: v > 0.0, "must be > 0"),
    "split": (float, lambda v: 0.0 < v < 1.0, "must lie in (0, 1)"),
    "grid_n": (int, lambda v: v >= 2, "must be >= 2"),
    "jobs": (int, lambda v: v >= 1, "must be >= 1"),
}


def resolve_config(ns):
    """Defaults, then config file, then environment seed, then flags."""
    cfg = dict(DEFAULTS)
    if getattr(ns, "config", None):
        try:
            loaded = jsonio.read_json(ns.config)
        except (OSError, ValueError) as err:
            raise ConfigError("config", str(err)) from err
        for key, value in loaded.items():
            if key not in cfg:
                raise ConfigError(key, "unknown field")
            cfg[key] = value
    env_seed = os.environ.get("ROEW_SEED")
    if env_seed is not None and getattr(ns, "seed", None) is None and "seed" not in _file_keys(ns):
        try:
            cfg["seed"] = int(env_seed)
        except ValueError as err:
            raise ConfigError("ROEW_SEED", "must be an integer") from err
    for key in cfg:
        flag = getattr(ns, key, None)
        if flag is not None:
            cfg[key] = flag
    _validate(cfg)
    return cfg


def _file_keys(ns):
    if not getattr(ns, "config", None):
        return ()
    try:
        return tuple(jsonio.read_json(ns.config).keys())
    except (OSError, ValueError):
        return ()


def _validate(cfg):
    for key, (cast, ok, msg) in _VALIDATORS.items():
        value = cfg[key]
        if cast in (int, float) and isinstance(value, bool):
            raise ConfigError(key, "must be a number")
        try:
            value = cast(value)
        except (TypeError, ValueError) as err:
            raise ConfigError(key, f"expected {cast.__name__}") from err
        if not ok(value):
            raise ConfigError(key, msg)
        cfg[key] = value
    for key in ("alphas", "splits"):
        seq = cfg[key]
        if not isinstance(seq, (list, tuple)) or not seq:
            raise ConfigError(key, "must be a nonempty list")
        vals = []
        for x in seq:
            try:
                xf = float(x)
            except (TypeError, ValueError) as err:
                raise ConfigError(key, "entries must be numbers") from err
            if not 0.0 < xf < 1.0:
                raise ConfigError(key, "entries must lie in (0, 1)")
            vals.append(xf)
        cfg[key] = vals


def _noise_model(cfg):
    if cfg["noise"] == "gaussian":
        return measure.GaussianNoise(cfg["noise_sigma"])
    return measure.ShotNoise(cfg["shots"])


def _public_config(cfg):
    out = dict(cfg)
    out["alphas"] = list(cfg["alphas"])
    out["splits"] = list(cfg["splits"])
    return out


def _write_manifest(out_dir, command, cfg, inputs, outputs):
    public = _public_config(cfg)
    jsonio.write_json(
        out_dir / f"{command}.manifest.json",
        {
            "command": command,
            "config": public,
            "config_hash": jsonio.config_hash(public),
            "inputs": [str(p) for p in inputs],
            "outputs": [str(p) for p in outputs],
        },
    )


# ============================================================
# Commands
# ============================================================


def cmd_gen(ns):
    cfg = resolve_config(ns)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    records = states.generate_states(
        cfg["n_sep"], cfg["n_ent"], cfg["seed"], cfg["gamma_min"], cfg["max_terms"]
    )
    moments = measure.build_moments(
        records, _noise_model(cfg), cfg["repeats"], pooled=cfg["pooled_cov"]
    )
    states_path = out / "states.jsonl"
    moments_path = out / "moments.jsonl"
    states.save_states(states_path, records)
    measure.save_moments(moments_path, moments)
    _write_manifest(out, "gen", cfg, [], [states_path, moments_path])
    n_ent = sum(1 for r in records if r.label == -1)
    print(f"gen: {len(records)} states ({len(records) - n_ent} separable, {n_ent} entangled)")
    print(f"gen: wrote {states_path} and {moments_path}")
    return 0


def cmd_train(ns):
    cfg = resolve_config(ns)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = measure.load_moments(ns.moments)
    params = RobustParams(cfg["alpha"], cfg["c"])
    models = evalx.train_group_models(dataset, params, SolverConfig())
    outputs = []
    for lbl in GROUP_ORDER:
        model = models[lbl.code]
        model_path = out / f"model_{lbl.code}.json"
        jsonio.write_json(
            model_path,
            {
                "v": [float(x) for x in model.v],
                "b": model.b,
                "alpha": model.alpha,
                "c": model.c,
                "objective": model.objective,
                "feasibility_residual": model.feasibility_residual,
                "solver": {
                    "iters": model.solver_info.get("iters", 0),
                    "penalty_final": model.solver_info.get("penalty_final", 0.0),
                },
            },
        )
        wit = witness.witness_from_model(model)
        report = witness.verify_witness(wit, cfg["grid_n"])
        wit_path = out / f"witness_{lbl.code}.json"
        witness.save_witness(wit_path, wit, report)
        outputs += [model_path, wit_path]
        own = report.detected[lbl.code]
        print(
            f"train[{lbl.code}]: objective {model.objective:.4g}, "
            f"residual {model.feasibility_residual:.4g}, "
            f"own-group expectation {own:.4g}, grid min {report.grid_min:.4g}"
        )
    _write_manifest(out, "train", cfg, [Path(ns.moments)], outputs)
    return 0


def cmd_sweep(ns):
    cfg = resolve_config(ns)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = []
    if ns.moments:
        dataset = measure.load_moments(ns.moments)
        inputs.append(Path(ns.moments))
    else:
        records = states.generate_states(
            cfg["n_sep"], cfg["n_ent"], cfg["seed"], cfg["gamma_min"], cfg["max_terms"]
        )
        dataset = measure.build_moments(
            records, _noise_model(cfg), cfg["repeats"], pooled=cfg["pooled_cov"]
        )
    sweep_cfg = evalx.SweepConfig(c=cfg["c"], seed=cfg["seed"], jobs=cfg["jobs"])
    cells = evalx.run_sweep(cfg["alphas"], cfg["splits"], dataset, sweep_cfg)
    csv_path = out / "metrics.csv"
    csv_path.write_text(evalx.sweep_csv(cells), encoding="utf-8")
    outputs = [csv_path]
    roc_cell = next((c for c in cells if c.status == "ok"), None)
    if roc_cell is not None:
        curve = evalx.roc(roc_cell.scores, roc_cell.truth)
        roc_path = out / "roc.csv"
        roc_path.write_text(evalx.roc_csv(curve), encoding="utf-8")
        outputs.append(roc_path)
        print(
            f"sweep: roc from cell alpha={roc_cell.alpha:.4g} "
            f"split={roc_cell.split:.4g}, auc {curve.auc:.4g}"
        )
    summary_path = out / "summary.json"
    jsonio.write_json(
        summary_path,
        {
            "cells": [
                {
                    "alpha": c.alpha,
                    "split": c.split,
                    "status": c.status,
                    "accuracy": c.report.accuracy if c.report else None,
                    "precision": c.report.precision if c.report else None,
                    "f1": c.report.f1 if c.report else None,
                    "per_witness_accuracy": c.per_witness_accuracy,
                }
                for c in cells
            ]
        },
    )
    outputs.append(summary_path)
    _write_manifest(out, "sweep", cfg, inputs, outputs)
    n_ok = sum(1 for c in cells if c.status == "ok")
    print(f"sweep: {n_ok}/{len(cells)} cells ok, wrote {csv_path}")
    return 0


def cmd_verify(ns):
    cfg = resolve_config(ns)
    wit, _ = witness.load_witness(ns.witness)
    report = witness.verify_witness(wit, cfg["grid_n"])
    print(f"verify: {ns.witness}")
    print(f"  min eigenvalue      {report.min_eig:.4g}")
    print(f"  negative eigenvalues {report.n_negative_eigs}")
    print(f"  product-grid min    {report.grid_min:.4g} (grid_n={report.grid_n})")
    for code in sorted(report.detected):
        print(f"  bell {code} expectation {report.detected[code]:.4g}")
    if report.n_negative_eigs == 0:
        print("  not a witness: 0 negative eigenvalues")
    elif report.is_valid:
        print("  valid witness: negative on an entangled state, nonnegative on the product grid")
    else:
        print("  grid minimum below tolerance; not certified on product states")
    if ns.out:
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / (Path(ns.witness).stem + ".report.json")
        jsonio.write_json(report_path, witness.report_to_json(report))
        print(f"  wrote {report_path}")
    return 0


# ============================================================
# Argument parsing
# ============================================================


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="base RNG seed (env ROEW_SEED as fallback)")


def _add_gen_opts(sub):
    sub.add_argument("--n-sep", dest="n_sep", type=int, help="separable sample count")
    sub.add_argument("--n-ent", dest="n_ent", type=int, help="entangled sample count (split over 4 groups)")
    sub.add_argument("--noise", choices=("gaussian", "shot"), help="noise model")
    sub.add_argument("--noise-sigma", dest="noise_sigma", type=float, help="gaussian noise width")
    sub.add_argument("--shots", type=int, help="shots per expectation for shot noise")
    sub.add_argument("--repeats", type=int, help="noisy repetitions per state")
    sub.add_argument("--pooled-cov", dest="pooled_cov", action="store_const", const=True,
                     help="replace per-sample covariances by the class average")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="roew",
        description="Robust entanglement-witness training from noisy two-qubit data",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate labeled states and noisy moments")
    _add_common(gen)
    _add_gen_opts(gen)
    gen.add_argument("--out", default="out", help="output directory")
    gen.set_defaults(func=cmd_gen)

    train = subs.add_parser("train", help="train the four group witnesses")
    _add_common(train)
    train.add_argument("moments", help="moments JSONL file")
    train.add_argument("--alpha", type=float, help="chance-constraint level")
    train.add_argument("--c", type=float, help="slack price")
    train.add_argument("--grid-n", dest="grid_n", type=int, help="verification grid size")
    train.add_argument("--out", default="out", help="output directory")
    train.set_defaults(func=cmd_train)

    sweep = subs.add_parser("sweep", help="metric grid over alpha and split")
    _add_common(sweep)
    _add_gen_opts(sweep)
    sweep.add_argument("--moments", help="moments JSONL file (generated when omitted)")
    sweep.add_argument("--c", type=float, help="slack price")
    sweep.add_argument("--jobs", type=int, help="worker processes")
    sweep.add_argument("--out", default="out", help="output directory")
    sweep.set_defaults(func=cmd_sweep)

    verify = subs.add_parser("verify", help="verify a stored witness")
    _add_common(verify)
    verify.add_argument("witness", help="witness JSON file")
    verify.add_argument("--grid-n", dest="grid_n", type=int, help="verification grid size")
    verify.add_argument("--out", help="directory for the JSON report")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as err:
        return 1 if err.code else 0
    try:
        return ns.func(ns)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except InfeasibleError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 2
    except SolverDivergedError as err:
        print(f"solver diverged: {err}", file=sys.stderr)
        return 3


def app():
    sys.exit(main())


if __name__ == "__main__":
    app()
