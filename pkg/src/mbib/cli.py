"""Experiment harness: simulate, fit, predict, run, sweep, theory-check.

Outputs are deterministic: the same config and seeds produce byte-identical
CSV/JSON. Every JSON document embeds the resolved config and the toolkit
version. Exit codes: 0 success, 2 bad configuration, 3 bad data, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, MbibError, NumericError
from .evaluation import (
    GaussianBnImputer,
    baseline_gaussian_bn,
    impose_mcar,
    load_bn,
    metrics,
    save_bn,
)
from .gib import GibModel, fit_gib, load_gib, save_gib
from .graph import load_dag, save_dag
from .sem import (
    dataset_from_csv,
    dataset_to_csv,
    derive_seed,
    exogenous_stretch,
    preset,
    preset_names,
    sample,
)
from .theorycheck import format_report_table, run_all
from .vib import VibConfig, VibModel, dnn_config, fit_vib, load_vib, save_vib

METHODS = ("gib", "vib", "bn", "dnn")
SCOPES = ("blanket", "parents", "global", "explicit")
SWEEP_AXES = ("z_dim", "beta", "stretch", "missing_rate", "n_source")


@dataclass
class ExperimentConfig:
    preset: str | None = None
    preset_params: dict = field(default_factory=dict)
    source_csv: str | None = None
    target_csv: str | None = None
    dag_file: str | None = None
    target: str | None = None
    scope: str = "blanket"
    features: list | None = None
    method: str = "gib"
    dim: int | None = None
    gib_beta: float | None = None
    ridge: float | None = None
    vib: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_source: int = 2000
    n_target: int = 2000
    stretch: float = 1.0
    missing_rate: float = 0.0
    out_dir: str = "results"
    plots: bool = True
    workers: int = 1

    def validate(self):
        if (self.preset is None) == (self.source_csv is None):
            raise ConfigError("give exactly one of --preset or --source-csv")
        if self.preset is not None and self.preset not in preset_names():
            raise ConfigError(
                f"unknown preset {self.preset!r}; choose from {preset_names()}"
            )
        if self.source_csv is not None:
            if self.target is None:
                raise ConfigError("--target is required with CSV inputs")
            if self.scope in ("blanket", "parents") and self.dag_file is None:
                raise ConfigError(f"scope {self.scope!r} needs --dag-file")
        if self.scope not in SCOPES:
            raise ConfigError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if self.scope == "explicit" and not self.features:
            raise ConfigError("scope 'explicit' needs --features")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.dim is not None and self.gib_beta is not None:
            raise ConfigError("give --dim or --gib-beta, not both")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.n_source < 2 or self.n_target < 1:
            raise ConfigError("n_source must be >= 2 and n_target >= 1")
        if self.stretch <= 0:
            raise ConfigError("stretch must be positive")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing-rate must be in [0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)


def _load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _config_from_args(args):
    """File config first, explicit flags win."""
    doc = _load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = ExperimentConfig(**doc)
    overrides = {}
    for key in ExperimentConfig.__dataclass_fields__:
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "no_plots", False):
        overrides["plots"] = False
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


# ---------------------------------------------------------------------------
# experiment core

@dataclass
class _Resolved:
    """Domain inputs after preset/CSV resolution, still seed-independent."""

    dag: object
    source_spec: object
    target_spec: object
    source_data: object
    target_inputs: object
    target_truth: object
    target_node: str


def _resolve(cfg):
    if cfg.preset is not None:
        pair = preset(cfg.preset, cfg.preset_params)
        target_spec = pair.target
        if cfg.stretch != 1.0:
            target_spec = exogenous_stretch(target_spec, pair.target_node, cfg.stretch)
        return _Resolved(pair.dag, pair.source, target_spec, None, None, None,
                         cfg.target or pair.target_node)
    source = dataset_from_csv(cfg.source_csv)
    if cfg.target not in source:
        raise DataError(f"target {cfg.target!r} not in {cfg.source_csv}")
    truth = None
    inputs = None
    if cfg.target_csv is not None:
        target_full = dataset_from_csv(cfg.target_csv)
        inputs = target_full
        if cfg.target in target_full:
            # real-data protocol: drop the target column at load, keep it for audit
            truth = target_full.column(cfg.target)
            inputs = target_full.drop(cfg.target)
    dag = load_dag(cfg.dag_file) if cfg.dag_file else None
    return _Resolved(dag, None, None, source, inputs, truth, cfg.target)


def _scope_features(cfg, resolved, source_columns):
    target = resolved.target_node
    if cfg.scope == "global":
        return [c for c in source_columns if c != target]
    if cfg.scope == "explicit":
        missing = [f for f in cfg.features if f not in source_columns]
        if missing:
            raise ConfigError(f"explicit features not in source data: {missing}")
        if target in cfg.features:
            raise ConfigError("explicit features cannot include the target")
        return list(cfg.features)
    if resolved.dag is None:
        raise ConfigError(f"scope {cfg.scope!r} needs a DAG")
    if target not in resolved.dag:
        raise ConfigError(f"target {target!r} not in the DAG")
    names = (
        resolved.dag.markov_blanket(target)
        if cfg.scope == "blanket"
        else resolved.dag.parents(target)
    )
    if not names:
        raise ConfigError(f"scope {cfg.scope!r} selects no features for {target!r}")
    missing = [f for f in names if f not in source_columns]
    if missing:
        raise DataError(f"DAG nodes missing from source data: {missing}")
    return names


def _vib_config(cfg, seed):
    overrides = dict(cfg.vib)
    overrides["seed"] = derive_seed(seed, "fit")
    if cfg.method == "dnn":
        for key in ("beta", "deterministic_encoder", "learn_scale"):
            overrides.pop(key, None)
        return dnn_config(**overrides)
    return VibConfig(**overrides)


def _fit(cfg, source, features, target, seed):
    if cfg.method == "gib":
        return fit_gib(
            source, features, target, dim=cfg.dim, beta=cfg.gib_beta, ridge=cfg.ridge
        )
    if cfg.method in ("vib", "dnn"):
        return fit_vib(source, features, target, _vib_config(cfg, seed))
    # bn conditions on every observed column regardless of scope
    return baseline_gaussian_bn(source, target, ridge=cfg.ridge)


def _run_seed(cfg, resolved, seed):
    """One repeat: draw (or reuse) data, fit, predict, score."""
    target = resolved.target_node
    if cfg.preset is not None:
        source = sample(resolved.source_spec, cfg.n_source, derive_seed(seed, "source"))
        target_full = sample(resolved.target_spec, cfg.n_target, derive_seed(seed, "target"))
        truth = target_full.column(target)
        target_inputs = target_full.drop(target)
    else:
        source = resolved.source_data
        target_inputs = resolved.target_inputs
        truth = resolved.target_truth

    features = _scope_features(cfg, resolved, source.columns)
    model = _fit(cfg, source, features, target, seed)
    used = list(model.features)

    if cfg.missing_rate > 0.0:
        fill = {c: float(np.mean(source.column(c))) for c in used}
        target_inputs = impose_mcar(
            target_inputs, used, cfg.missing_rate, derive_seed(seed, "mask"), fill
        )
    predicted = model.predict(target_inputs)
    result = {"seed": int(seed), "features": used, "n_target": int(len(predicted))}
    if truth is not None:
        result["metrics"] = metrics(truth, predicted).to_dict()
    return result, predicted, truth, model


def _aggregate(per_seed):
    rows = [r["metrics"] for r in per_seed if "metrics" in r]
    if not rows:
        return None
    keys = ("mae", "rmse", "r2")
    agg = {}
    for k in keys:
        vals = np.array([row[k] for row in rows], dtype=float)
        agg[f"mean_{k}"] = float(vals.mean())
        agg[f"se_{k}"] = (
            float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
        )
    agg["n_seeds"] = len(rows)
    return agg


def _write_json(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def _write_csv_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args):
    pair = preset(args.preset, {})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source = sample(pair.source, args.n_source, derive_seed(args.seed, "source"))
    target = sample(pair.target, args.n_target, derive_seed(args.seed, "target"))
    dataset_to_csv(source, out / "source.csv")
    dataset_to_csv(target, out / "target.csv")
    save_dag(pair.dag, out / "dag.txt")
    _write_json(
        {
            "toolkit_version": __version__,
            "preset": pair.name,
            "target_node": pair.target_node,
            "target_mechanism_shifted": pair.target_mechanism_shifted,
            "n_source": args.n_source,
            "n_target": args.n_target,
            "seed": args.seed,
            "files": ["source.csv", "target.csv", "dag.txt"],
        },
        out / "meta.json",
    )
    print(f"wrote source.csv, target.csv, dag.txt, meta.json to {out}")
    return 0


def cmd_fit(args):
    cfg = _config_from_args(args)
    resolved = _resolve(cfg)
    seed = cfg.seeds[0]
    if cfg.preset is not None:
        source = sample(resolved.source_spec, cfg.n_source, derive_seed(seed, "source"))
    else:
        source = resolved.source_data
    features = _scope_features(cfg, resolved, source.columns)
    model = _fit(cfg, source, features, resolved.target_node, seed)
    out = Path(args.model_out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(model, GibModel):
        save_gib(model, out)
    elif isinstance(model, VibModel):
        save_vib(model, out)
    else:
        save_bn(model, out)
    print(f"wrote {out}")
    return 0


def _load_model(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model {path} is not valid JSON: {exc}") from exc
    fmt = doc.get("format")
    if fmt == "gib-model":
        return GibModel.from_dict(doc)
    if fmt == "vib-model":
        return VibModel.from_dict(doc)
    if fmt == "bn-imputer":
        return GaussianBnImputer.from_dict(doc)
    raise DataError(f"unrecognized model format {fmt!r} in {path}")


def cmd_predict(args):
    model = _load_model(args.model)
    data = dataset_from_csv(args.inputs)
    if model.target in data:
        data = data.drop(model.target)
    predicted = model.predict(data)
    _write_csv_rows(args.out, [model.target], [[_fmt(v)] for v in predicted])
    print(f"wrote {args.out} ({len(predicted)} predictions)")
    return 0


def cmd_run(args):
    cfg = _config_from_args(args)
    if cfg.source_csv is not None and cfg.target_csv is None:
        raise ConfigError("run needs --target-csv with CSV inputs")
    resolved = _resolve(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = {"toolkit_version": __version__, "config": cfg.to_dict()}

    per_seed = []
    for seed in cfg.seeds:
        result, predicted, truth, _model = _run_seed(cfg, resolved, seed)
        per_seed.append(result)
        _write_json({**base, **result}, out / f"run_seed{seed}.json")
        _write_csv_rows(
            out / f"predictions_seed{seed}.csv",
            [resolved.target_node],
            [[_fmt(v)] for v in predicted],
        )
        if truth is not None:
            _write_csv_rows(
                out / f"scatter_seed{seed}.csv",
                ["truth", "predicted"],
                [[_fmt(a), _fmt(b)] for a, b in zip(truth, predicted)],
            )
            if cfg.plots:
                from .figures import scatter_truth_vs_predicted

                scatter_truth_vs_predicted(
                    truth,
                    predicted,
                    out / f"scatter_seed{seed}.png",
                    title=f"{cfg.method} seed {seed}",
                )

    agg = _aggregate(per_seed)
    _write_json(
        {**base, "per_seed": per_seed, "aggregate": agg}, out / "aggregate.json"
    )
    if agg is not None:
        print(
            f"{cfg.method}: rmse {agg['mean_rmse']:.4f} +/- {agg['se_rmse']:.4f}, "
            f"r2 {agg['mean_r2']:.4f} +/- {agg['se_r2']:.4f} "
            f"({agg['n_seeds']} seeds) -> {out}"
        )
    else:
        print(f"predictions written (no audit column, metrics skipped) -> {out}")
    return 0


def _parse_axis(text):
    if "=" not in text:
        raise ConfigError(f"axis must look like name=v1,v2,... got {text!r}")
    name, _, values = text.partition("=")
    name = name.strip()
    if name not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {name!r}")
    try:
        if name in ("z_dim", "n_source"):
            vals = [int(v) for v in values.split(",") if v != ""]
        else:
            vals = [float(v) for v in values.split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"bad axis values in {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"axis {name!r} has no values")
    if len(set(vals)) != len(vals):
        raise ConfigError(f"axis {name!r} repeats values")
    return name, vals


def _apply_axis(cfg, name, value):
    if name == "z_dim":
        if cfg.method not in ("vib", "dnn"):
            raise ConfigError("axis z_dim applies to vib/dnn methods only")
        return replace(cfg, vib={**cfg.vib, "latent_dim": int(value)})
    if name == "beta":
        if cfg.method in ("vib", "dnn"):
            return replace(cfg, vib={**cfg.vib, "beta": float(value)})
        if cfg.method == "gib":
            return replace(cfg, gib_beta=float(value), dim=None)
        raise ConfigError("axis beta applies to gib/vib/dnn methods only")
    if name == "stretch":
        if cfg.preset is None:
            raise ConfigError("axis stretch needs a preset experiment")
        return replace(cfg, stretch=float(value))
    if name == "missing_rate":
        return replace(cfg, missing_rate=float(value))
    if name == "n_source":
        if cfg.preset is None:
            raise ConfigError("axis n_source needs a preset experiment")
        return replace(cfg, n_source=int(value))
    raise ConfigError(f"unknown axis {name!r}")


def _sweep_cell(cfg_doc, assignment, seed):
    """Run one (cell, seed); module-level so process pools can pickle it."""
    cfg = ExperimentConfig(**cfg_doc)
    for name, value in assignment:
        cfg = _apply_axis(cfg, name, value)
    resolved = _resolve(cfg)
    result, _, _, _ = _run_seed(cfg, resolved, seed)
    if "metrics" not in result:
        raise DataError("sweep needs target truth for metrics")
    row = dict(assignment)
    row["seed"] = int(seed)
    row.update(result["metrics"])
    return row


def cmd_sweep(args):
    cfg = _config_from_args(args)
    if cfg.source_csv is not None and cfg.target_csv is None:
        raise ConfigError("sweep needs --target-csv with CSV inputs")
    axes = [_parse_axis(a) for a in args.axis or []]
    if not axes:
        raise ConfigError("sweep needs at least one --axis")
    if len(axes) > 2:
        raise ConfigError("sweep supports at most two axes")
    names = [a[0] for a in axes]
    if len(set(names)) != len(names):
        raise ConfigError("sweep axes must be distinct")

    cells = []
    if len(axes) == 1:
        cells = [((names[0], v),) for v in axes[0][1]]
    else:
        cells = [
            ((names[0], v0), (names[1], v1))
            for v0 in axes[0][1]
            for v1 in axes[1][1]
        ]

    jobs = [(cell, seed) for cell in cells for seed in cfg.seeds]
    cfg_doc = cfg.to_dict()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(
                pool.map(_sweep_cell, *zip(*[(cfg_doc, c, s) for c, s in jobs]))
            )
    else:
        rows = [_sweep_cell(cfg_doc, cell, seed) for cell, seed in jobs]
    rows.sort(key=lambda r: tuple(r[n] for n in names) + (r["seed"],))

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = names + ["seed", "mae", "rmse", "r2", "n"]
    _write_csv_rows(
        out / "sweep_cells.csv",
        header,
        [
            [(_fmt(r[h]) if isinstance(r[h], float) else r[h]) for h in header]
            for r in rows
        ],
    )

    # per-cell aggregates
    agg_rows = []
    for cell in cells:
        cell_rows = [r for r in rows if all(r[n] == v for n, v in cell)]
        entry = dict(cell)
        for key in ("mae", "rmse", "r2"):
            vals = np.array([r[key] for r in cell_rows], dtype=float)
            entry[f"mean_{key}"] = float(vals.mean())
            entry[f"se_{key}"] = (
                float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            )
        entry["n_seeds"] = len(cell_rows)
        agg_rows.append(entry)
    agg_header = names + [
        "mean_mae", "se_mae", "mean_rmse", "se_rmse", "mean_r2", "se_r2", "n_seeds",
    ]
    _write_csv_rows(
        out / "sweep_aggregate.csv",
        agg_header,
        [
            [(_fmt(r[h]) if isinstance(r[h], float) else r[h]) for h in agg_header]
            for r in agg_rows
        ],
    )
    _write_json(
        {
            "toolkit_version": __version__,
            "config": cfg_doc,
            "axes": {n: vs for n, vs in axes},
            "cells": agg_rows,
        },
        out / "sweep.json",
    )
    if cfg.plots:
        from .figures import sweep_heatmap, sweep_lines

        for key in ("mean_rmse", "mean_r2"):
            path = out / f"sweep_{key}.png"
            if len(names) == 2:
                sweep_heatmap(agg_rows, names, key, path, title=cfg.method)
            else:
                sweep_lines(agg_rows, names[0], key, path, title=cfg.method)
    print(f"swept {len(cells)} cells x {len(cfg.seeds)} seeds -> {out}")
    return 0


def cmd_theory_check(args):
    reports = run_all()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        {
            "toolkit_version": __version__,
            "reports": [r.to_dict() for r in reports],
        },
        out / "theory_report.json",
    )
    conc = next((r for r in reports if r.name == "concentration"), None)
    if conc is not None:
        per_n = conc.measured["per_n"]
        _write_csv_rows(
            out / "concentration.csv",
            ["n", "cov_err", "sin_theta", "excess_mse"],
            [
                [row["n"], _fmt(row["cov_err"]), _fmt(row["sin_theta"]),
                 _fmt(row["excess_mse"])]
                for row in per_n
            ],
        )
        if not args.no_plots:
            from .figures import rate_loglog

            rate_loglog(
                per_n,
                ("cov_err", "sin_theta", "excess_mse"),
                out / "concentration.png",
                title="error rates vs n",
            )
    print(format_report_table(reports))
    failures = [r for r in reports if not r.passed]
    print(f"\n{len(reports) - len(failures)}/{len(reports)} checks passed -> {out}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# parser

def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON config file; explicit flags win")
    p.add_argument("--preset", choices=preset_names())
    p.add_argument("--source-csv", dest="source_csv")
    p.add_argument("--target-csv", dest="target_csv")
    p.add_argument("--dag-file", dest="dag_file")
    p.add_argument("--target", help="target node / column name")
    p.add_argument("--scope", choices=SCOPES)
    p.add_argument(
        "--features",
        type=lambda s: [x.strip() for x in s.split(",") if x.strip()],
        help="comma-separated feature list for scope=explicit",
    )
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--dim", type=int, help="bottleneck dimension (gib)")
    p.add_argument("--gib-beta", dest="gib_beta", type=float,
                   help="spectral trade-off selecting the gib dimension")
    p.add_argument("--ridge", type=float)
    p.add_argument("--vib-config", dest="vib", type=json.loads,
                   help='JSON object of vib settings, e.g. \'{"beta": 0.01}\'')
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",") if x != ""])
    p.add_argument("--n-source", dest="n_source", type=int)
    p.add_argument("--n-target", dest="n_target", type=int)
    p.add_argument("--stretch", type=float)
    p.add_argument("--missing-rate", dest="missing_rate", type=float)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--no-plots", dest="no_plots", action="store_true")
    p.add_argument("--workers", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mbib",
        description="Markov-blanket information bottleneck experiment harness",
    )
    parser.add_argument("--version", action="version", version=f"mbib {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw preset source/target CSVs")
    p.add_argument("--preset", required=True, choices=preset_names())
    p.add_argument("--n-source", dest="n_source", type=int, default=2000)
    p.add_argument("--n-target", dest="n_target", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="train a model and serialize it")
    _add_experiment_flags(p)
    p.add_argument("--model-out", dest="model_out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="impute the target for an input CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("run", help="multi-seed experiment with metrics")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid sweep over hyperparameter axes")
    _add_experiment_flags(p)
    p.add_argument("--axis", action="append",
                   help="name=v1,v2,... (repeat for a second axis)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory-check", help="run the numerical theorem checks")
    p.add_argument("--out", default="theory")
    p.add_argument("--no-plots", dest="no_plots", action="store_true")
    p.set_defaults(func=cmd_theory_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except MbibError as exc:  # safety net for any other toolkit error
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
