"""Command-line interface.

Commands: ``train``, ``eval``, ``bench``, ``synth``, ``grid``.
Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical error.
``SCACSP_THREADS`` caps worker-thread parallelism (the current implementation
is single-threaded, so any cap is trivially honored).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io as sio
from .classify import accuracy
from .datagen import SynthSpec, generate
from .errors import ConfigError, DataError, NumericalError, ScacspError
from .pipeline import METHODS, PipelineConfig, predict_pipeline, train_with_cv
from .subspace import empirical_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

SESSION_CHOICES = ("train", "test")


def thread_cap() -> int:
    """Upper bound on worker threads from SCACSP_THREADS (default: unlimited)."""
    raw = os.environ.get("SCACSP_THREADS", "")
    if not raw:
        return 0
    try:
        val = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SCACSP_THREADS must be an integer, got {raw!r}") from exc
    if val < 1:
        raise ConfigError("SCACSP_THREADS must be at least 1")
    return val


def _parse_band(text: str):
    if text.lower() in ("none", "off"):
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--band expects lo:hi:order, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"--band expects numbers lo:hi:order, got {text!r}") from exc


def _parse_window(text: str):
    if text.lower() in ("none", "off"):
        return None
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"--window expects start:end, got {text!r}")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"--window expects numbers start:end, got {text!r}") from exc


def _build_config(args) -> PipelineConfig:
    base = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            base = json.loads(path.read_text())
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    overrides = {
        "method": getattr(args, "method", None),
        "m": getattr(args, "m", None),
        "cv_folds": getattr(args, "cv_folds", None),
        "seed": getattr(args, "seed", None),
        "rank_tol": getattr(args, "rank_tol", None),
        "ovr_rest": getattr(args, "ovr_rest", None),
        "nsr_mode": getattr(args, "nsr_mode", None),
    }
    for key, val in overrides.items():
        if val is not None:
            base[key] = val
    if getattr(args, "band", None) is not None:
        base["band"] = _parse_band(args.band)
    if getattr(args, "window", None) is not None:
        base["window"] = _parse_window(args.window)
    if getattr(args, "raw_features", False):
        base["log_features"] = False
    if getattr(args, "extra_sub", None):
        base["extra_subspaces"] = tuple(args.extra_sub.split(","))
    try:
        return PipelineConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def _load_session(args, config: PipelineConfig, session: str):
    manifest = sio.load_manifest(args.data)
    return sio.ingest(manifest, session=session, band=config.band, window=config.window)


def _write_cv_report(path, result):
    rows = [
        (float(a), "" if b is None else float(b), f, float(acc))
        for a, b, f, acc in result.rows
    ]
    rows += [
        (float(a), "" if b is None else float(b), "mean", float(acc))
        for a, b, acc in result.means
    ]
    sio.write_csv(path, ["alpha", "beta", "fold", "accuracy"], rows)


def cmd_train(args) -> int:
    config = _build_config(args)
    trials = _load_session(args, config, "train")
    model, result = train_with_cv(config, trials)
    out = Path(args.out)
    sio.save_model(out, model)
    report = out.with_suffix(out.suffix + ".cv.csv") if out.suffix != ".json" else out.with_name(out.stem + "_cv.csv")
    _write_cv_report(report, result)
    print(
        f"trained {config.method} on {trials.n_trials} trials "
        f"(cv accuracy {result.best_accuracy:.4f}, alpha={result.best_alpha}"
        + (f", beta={result.best_beta}" if result.best_beta is not None else "")
        + f"); model -> {out}, cv report -> {report}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    model = sio.load_model(args.model)
    config = model.config
    manifest = sio.load_manifest(args.data)
    trials = sio.ingest(
        manifest, session=args.session, band=config.band, window=config.window
    )
    preds = predict_pipeline(model, trials)
    acc = accuracy(preds, trials.labels)
    out = Path(args.out) if args.out else Path(args.model).with_suffix(".predictions.csv")
    sio.write_csv(
        out,
        ["trial", "label", "prediction", "correct"],
        [
            (i, int(trials.labels[i]), int(preds[i]), int(preds[i] == trials.labels[i]))
            for i in range(trials.n_trials)
        ],
    )
    extra = ""
    if model.class_count > 2:
        conf = np.zeros((model.class_count, model.class_count), dtype=int)
        for t, p in zip(trials.labels, preds):
            conf[t - 1, p - 1] += 1
        conf_path = out.with_name(out.stem + "_confusion.csv")
        sio.write_csv(
            conf_path,
            ["true\\pred"] + [str(k) for k in range(1, model.class_count + 1)],
            [
                [str(k + 1)] + [int(v) for v in conf[k]]
                for k in range(model.class_count)
            ],
        )
        extra = f", confusion -> {conf_path}"
    print(f"accuracy {acc:.6f} on {trials.n_trials} trials; predictions -> {out}{extra}")
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = args.methods.split(",") if args.methods else ["csp-ovr", "csp-pw", "scacsp"]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r} in --methods")
    config0 = _build_config(args)
    manifest = sio.load_manifest(args.data)
    train = sio.ingest(manifest, session="train", band=config0.band, window=config0.window)
    test = sio.ingest(manifest, session="test", band=config0.band, window=config0.window)
    rows = []
    for method in methods:
        config = PipelineConfig.from_dict({**config0.to_dict(), "method": method})
        train_times = []
        test_times = []
        acc = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            model, _ = train_with_cv(config, train)
            train_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            preds = predict_pipeline(model, test)
            test_times.append(time.perf_counter() - t0)
            acc = accuracy(preds, test.labels)
        rows.append(
            (
                method,
                float(np.median(train_times)),
                float(np.std(train_times)),
                float(np.median(test_times)),
                float(np.std(test_times)),
                float(acc),
            )
        )
        print(
            f"{method}: train {rows[-1][1]:.3f}s (+/-{rows[-1][2]:.3f}), "
            f"test {rows[-1][3]:.4f}s (+/-{rows[-1][4]:.4f}), accuracy {acc:.4f}"
        )
    sio.write_csv(
        args.out,
        ["method", "train_s", "train_std", "test_s", "test_std", "accuracy"],
        rows,
    )
    print(f"benchmark -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    path = Path(args.spec)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    name = doc.pop("name", "synth")
    labels = doc.pop("labels", None)
    test_per_class = int(doc.pop("test_trials_per_class", 0))
    try:
        spec = SynthSpec(**doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: bad synth spec ({exc})") from exc
    train = generate(spec)
    test = None
    if test_per_class > 0:
        test_doc = dict(doc)
        test_doc["trials_per_class"] = test_per_class
        test_doc["seed"] = spec.seed + 1
        test = generate(SynthSpec(**test_doc))
    out_dir = Path(args.out)
    manifest_path = sio.write_dataset(out_dir, name, train, test, label_names=labels)
    print(
        f"wrote {train.n_trials} train"
        + (f" + {test.n_trials} test" if test is not None else "")
        + f" trials -> {manifest_path}"
    )
    return EXIT_OK


def cmd_grid(args) -> int:
    config = _build_config(args)
    manifest = sio.load_manifest(args.data)
    train = sio.ingest(manifest, session="train", band=config.band, window=config.window)
    test = sio.ingest(manifest, session="test", band=config.band, window=config.window)
    result = empirical_grid(train, test, m=config.m, tol=config.tolerance)
    out = Path(args.out)
    for session, table in (("train", result.train_accuracy), ("test", result.test_accuracy)):
        rows = []
        for i, ftag in enumerate(result.filter_tags):
            row = [ftag]
            for j in range(len(result.component_tags)):
                v = table[i, j]
                row.append("" if np.isnan(v) else float(v))
            rows.append(row)
        path = out.with_name(f"{out.stem}_{session}{out.suffix or '.csv'}")
        sio.write_csv(path, ["filter_subspace"] + list(result.component_tags), rows)
        print(f"{session} grid -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scacsp",
        description="Spatial filtering (CSP / scaCSP family) for multichannel "
        "time-series classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_method=True):
        p.add_argument("--config", help="JSON file of pipeline configuration")
        p.add_argument("--data", required=True, help="dataset manifest path")
        if with_method:
            p.add_argument("--method", choices=METHODS)
        p.add_argument("--m", type=int, help="filters per tail / per direction")
        p.add_argument("--band", help="band-pass as lo:hi:order, or 'none'")
        p.add_argument("--window", help="crop as start:end seconds, or 'none'")
        p.add_argument("--cv-folds", dest="cv_folds", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--rank-tol", dest="rank_tol", type=float)
        p.add_argument("--ovr-rest", dest="ovr_rest", choices=("class-mean", "trial-pool"))
        p.add_argument("--nsr-mode", dest="nsr_mode", choices=("auto", "cnsr", "bnsr"))
        p.add_argument("--extra-sub", dest="extra_sub", help="comma-separated subspace tags")
        p.add_argument(
            "--raw-features",
            dest="raw_features",
            action="store_true",
            help="skip the log on variance features",
        )

    p_train = sub.add_parser("train", help="train a pipeline with CV grid search")
    add_common(p_train)
    p_train.add_argument("--out", required=True, help="model output path (JSON)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--session", default="test", choices=SESSION_CHOICES)
    p_eval.add_argument("--out", help="predictions CSV path")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="timing + accuracy over methods")
    add_common(p_bench, with_method=False)
    p_bench.add_argument("--methods", help="comma-separated method list")
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--spec", required=True, help="JSON synth spec")
    p_synth.add_argument("--out", required=True, help="output dataset directory")
    p_synth.set_defaults(func=cmd_synth)

    p_grid = sub.add_parser("grid", help="empirical subspace accuracy grid")
    add_common(p_grid, with_method=False)
    p_grid.add_argument("--out", required=True, help="output CSV stem")
    p_grid.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        thread_cap()
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ScacspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
