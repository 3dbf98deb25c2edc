"""Command-line entry point: ``vqnn <command> [options]``.

Settings resolve in three layers: built-in defaults, then an optional
``--config`` file of ``key = value`` lines, then command-line flags.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .datasets import write_digits_idx, write_synthetic_fraud
from .errors import ConfigurationError, ExperimentRuntimeError, InputError
from .experiments import (ExperimentConfig, attack_trials, batch_study, depth_means, depth_study,
                          load_dataset, build_model, noise_sweep, resolve, run_metadata,
                          summarize)
from .plotting import PLOT_HEADER, render, write_plot_csv
from .privacy import SWEEP_HEADER
from .trainer import CSV_HEADER, cross_validate

TRACE_HEADER = ("trial", "k", "loss_gg", "mse_x", "window_N", "wall_ms")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_TUPLE_TYPES = {"sigmas": float, "depth_reps": int, "depth_datasets": str, "digits": int}


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected on/off, got {text!r}")


def _converter(f):
    if f.name in _TUPLE_TYPES:
        inner = _TUPLE_TYPES[f.name]
        return lambda s: tuple(inner(v) for v in str(s).split(",") if v.strip())
    if f.name == "kalman":
        return _parse_bool
    kind = str(f.type)
    if "int" in kind:
        return int
    if "float" in kind:
        return float
    return str


CONVERTERS = {f.name: _converter(f) for f in fields(ExperimentConfig)}


def _convert(key, value):
    try:
        return CONVERTERS[key](value)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {value!r} ({exc})") from None


def read_config_file(path):
    """``key = value`` lines, with or without a section header."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.replace("-", "_")
            if key not in CONVERTERS:
                raise ConfigurationError(f"{path}: unknown key {key!r}")
            values[key] = _convert(key, value)
    return values


def build_config(args):
    values = read_config_file(args.config) if args.config else {}
    for key in CONVERTERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _convert(key, flag)
    try:
        return resolve(ExperimentConfig(**values))
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


# -- output helpers ------------------------------------------------------------

def _num(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])
    return Path(path)


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return Path(path)


def write_manifest(out, cfg, command, files):
    entries = {}
    for p in files:
        entries[Path(p).name] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
    write_json(out / "manifest.json", {**run_metadata(cfg), "command": command, "files": entries})


def _start(args, command):
    cfg = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = [write_json(out / "config.json",
                        {**run_metadata(cfg), "command": command, "config": cfg.to_dict()})]
    return cfg, out, files


# -- commands ------------------------------------------------------------------

def cmd_train(args):
    cfg, out, files = _start(args, "train")
    data = load_dataset(cfg)
    model = build_model(replace(cfg, theta_mode="ones"), data)
    report = cross_validate(model, data, cfg.train_config())
    meta = run_metadata(cfg)
    files.append(write_json(out / "metrics.json", {**json.loads(report.to_json()), **meta,
                                                   "dataset": cfg.dataset, "family": cfg.family,
                                                   "q": cfg.qubits}))
    files.append(write_csv(out / "metrics.csv", CSV_HEADER,
                           [report.csv_row(cfg.dataset, cfg.family, cfg.qubits)]))
    write_manifest(out, cfg, "train", files)
    print(f"{report.metric} train={report.train:.4f} test={report.test:.4f} "
          f"(+/- {report.se:.4f})")


def cmd_attack(args):
    cfg, out, files = _start(args, "attack")
    results = attack_trials(cfg, jobs=args.jobs, wall_clock=args.wall_clock)
    rows, scatter, convergence = [], [], []
    for t, r in enumerate(results):
        rows.extend(r.trace.rows(t))
        for k, (loss, mse) in enumerate(zip(r.trace.loss, r.trace.mse)):
            scatter.append((loss, mse, f"trial {t}"))
            convergence.append((k, mse, f"trial {t}"))
    summary = {**summarize(results, cfg.success_tol), **run_metadata(cfg)}
    files.append(write_csv(out / "trace.csv", TRACE_HEADER, rows))
    files.append(write_json(out / "summary.json", summary))
    files.append(write_plot_csv(out / "traces.csv", scatter))
    files.append(write_plot_csv(out / "convergence.csv", convergence))
    write_manifest(out, cfg, "attack", files)
    print(f"success {summary['success_rate']:.0%}  mean MSE {summary['mean_mse']:.3g} "
          f"(+/- {summary['se_mse']:.2g}) over {summary['trials']} restarts")


def cmd_sweep(args):
    cfg, out, files = _start(args, "sweep")
    rows = noise_sweep(cfg)
    files.append(write_csv(out / "sweep.csv", SWEEP_HEADER, [r.as_tuple() for r in rows]))
    points = [(r.sigma, r.test, "test score") for r in rows]
    points += [(r.sigma, r.attack_mse, "attack MSE") for r in rows]
    files.append(write_plot_csv(out / "noise.csv", points))
    write_manifest(out, cfg, "sweep", files)
    for r in rows:
        print(f"sigma={r.sigma:g} {r.metric} test={r.test:.4f} attack_mse={r.attack_mse:.3g}")


def cmd_depth(args):
    cfg, out, files = _start(args, "depth")
    rows = depth_study(cfg, jobs=args.jobs)
    files.append(write_csv(out / "depth_table.csv",
                           ("params", "reps", "dataset", "iterations", "reached"), rows))
    means = depth_means(rows)
    points = [(p, its, "mean") for p, its in means.items()]
    points += [(p, its, ds) for p, _, ds, its, _ in rows]
    files.append(write_plot_csv(out / "depth.csv", points))
    write_manifest(out, cfg, "depth", files)
    for p, its in means.items():
        print(f"{p} parameters: {its:.1f} iterations to {cfg.depth_tol:g}")


def cmd_batches(args):
    cfg, out, files = _start(args, "batches")
    sizes = tuple(int(b) for b in args.sizes.split(","))
    results = batch_study(cfg, sizes)
    files.append(write_csv(out / "batch_table.csv", ("batch", "metric", "train", "test", "se"),
                           [(b, r.metric, r.train, r.test, r.se) for b, r in results]))
    files.append(write_plot_csv(out / "batch.csv", [(b, r.test, "test") for b, r in results]))
    write_manifest(out, cfg, "batches", files)
    for b, r in results:
        print(f"B={b} test {r.metric}={r.test:.4f}")


def cmd_report(args):
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ConfigurationError(f"not a directory: {directory}")
    rendered = []
    for path in sorted(directory.glob("*.csv")):
        with path.open() as fh:
            first = fh.readline().strip()
        if tuple(first.split(",")) == PLOT_HEADER:
            rendered.append(render(path))
    if not rendered:
        raise ConfigurationError(f"no plot-ready CSV files in {directory}")
    for p in rendered:
        print(p)


def cmd_make_data(args):
    root = Path(args.directory)
    root.mkdir(parents=True, exist_ok=True)
    images, labels = write_digits_idx(root, prefix="digits")
    fraud = write_synthetic_fraud(root / "creditcard-synthetic.csv", seed=args.seed or 0)
    for p in (images, labels, fraud):
        print(p)
    print("use: --mnist-prefix digits --fraud-file creditcard-synthetic.csv")


# -- parser --------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="key = value file; flags override it")
    for f in fields(ExperimentConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       metavar=f.name.upper())
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel restarts")
    p.add_argument("--wall-clock", action="store_true",
                   help="record real timings in wall_ms (output is then not byte-stable)")


def make_parser():
    parser = argparse.ArgumentParser(prog="vqnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in (
        ("train", cmd_train, "k-fold training and scoring"),
        ("attack", cmd_attack, "gradient inversion over seeded restarts"),
        ("sweep", cmd_sweep, "noise sweep: accuracy and inversion error per sigma"),
        ("depth", cmd_depth, "iterations to tolerance against ansatz size"),
        ("batches", cmd_batches, "test score against training batch size"),
    ):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        p.set_defaults(func=func)
        if name == "batches":
            p.add_argument("--sizes", default="5,20,60,100")
    p = sub.add_parser("report", help="render plot-ready CSV files to PNG")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("make-data", help="write stand-in digit and fraud files")
    p.add_argument("directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_data)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        args.func(args)
    except (ConfigurationError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentRuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
