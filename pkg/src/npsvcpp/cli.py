"""Command-line front end: train, predict, eval, sweep, diag.

Single runs are configured by flags; sweeps read a JSON grid file.
Every table written is CSV with a header, floats formatted for
byte-identical reproducibility given the same seed and config. Exit
codes: 0 success, 1 internal or numeric failure, 2 I/O or config
problems, 3 shape mismatches.

In ``predict``, ``eval`` (without --repeats), and ``diag`` the --model
flag takes a model file path; in ``train``, ``sweep``, and protocol
``eval`` (--repeats) it takes a model kind (knpsvc, twsvm, dnpsvc).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys

import numpy as np

from .data import (
    Dataset,
    fit_standardizer,
    load_dataset,
    split_dataset,
)
from .deep import DeepNPSVC, deep_trace_to_csv
from .errors import (
    ConfigError,
    DatasetError,
    ModelFormatError,
    NumericalError,
    ShapeMismatchError,
)
from .ioutil import fmt_float
from .knpsvc import KernelNPSVC, TWSVM, trace_to_csv
from .model_io import MODEL_KINDS, load_model_file, save_model_file

DEFAULT_GRID_CAP = 256
SWEEP_AXES = {
    "knpsvc": ("c", "r1", "r2", "mu", "gamma", "dim"),
    "twsvm": ("c", "r1"),
    "dnpsvc": ("c", "gamma", "dim"),
}


def _fail(exc) -> None:
    print(f"error: {exc}", file=sys.stderr)


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _format_label(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else fmt_float(v)


def _repeat_seeds(base: int, i: int):
    """Counter-based seed derivation: one branch per (repeat, purpose)."""
    split_ss = np.random.SeedSequence([base, i, 0])
    train_int = int(np.random.SeedSequence([base, i, 1]).generate_state(1)[0])
    return split_ss, train_int


def _hyper(args, overrides, name, default):
    if overrides and name in overrides:
        return overrides[name]
    v = getattr(args, name, None)
    return default if v is None else v


def build_estimator(kind: str, args, seed: int, overrides: dict | None = None):
    kernel = getattr(args, "kernel", None) or "gaussian"
    bandwidth = getattr(args, "bandwidth", None)
    jitter = getattr(args, "jitter", None)
    jitter = 0.0 if jitter is None else jitter
    c = _hyper(args, overrides, "c", 1.0)
    if kind == "knpsvc":
        return KernelNPSVC(kernel=kernel, bandwidth=bandwidth, jitter=jitter, c=c,
                           r1=_hyper(args, overrides, "r1", 0.1),
                           r2=_hyper(args, overrides, "r2", 0.1),
                           mu=_hyper(args, overrides, "mu", 0.1),
                           gamma=_hyper(args, overrides, "gamma", 0.1),
                           eta=_hyper(args, overrides, "eta", 0.01),
                           dim=_hyper(args, overrides, "dim", None),
                           random_state=seed)
    if kind == "twsvm":
        return TWSVM(kernel=kernel, bandwidth=bandwidth, jitter=jitter, c=c,
                     r=_hyper(args, overrides, "r1", 0.1))
    if kind == "dnpsvc":
        dim = _hyper(args, overrides, "dim", None)
        return DeepNPSVC(c=c,
                         lr=_hyper(args, overrides, "eta", 0.01),
                         gamma_max=_hyper(args, overrides, "gamma", 1.0),
                         z_dim=8 if dim is None else int(dim),
                         random_state=seed)
    raise ConfigError(f"unknown model kind {kind!r}")


def _conform_width(ds: Dataset, n_features: int, path: str) -> np.ndarray:
    """Match prediction input width to the model.

    LIBSVM files may omit trailing zero features, so narrower input is
    zero-padded; CSV declares its columns and must match exactly.
    """
    X = ds.X
    if ds.n_samples == 0:
        return np.zeros((0, n_features))
    if X.shape[1] == n_features:
        return X
    if X.shape[1] < n_features and not str(path).lower().endswith(".csv"):
        pad = np.zeros((X.shape[0], n_features - X.shape[1]))
        return np.hstack([X, pad])
    raise ShapeMismatchError(
        f"model expects {n_features} features, data has {X.shape[1]}")


def _fit_on(kind: str, args, seed: int, X, y, overrides=None):
    """Fit a fresh estimator, with the CLI-level scaler when requested."""
    scaler = None
    if getattr(args, "standardize", False) and kind != "dnpsvc":
        scaler = fit_standardizer(X)
        X = scaler.transform(X)
    est = build_estimator(kind, args, seed, overrides).fit(X, y)
    return est, scaler


def cmd_train(args) -> int:
    kind = args.model
    if kind == "twsvm" and args.trace:
        raise ConfigError("twsvm training has no iteration trace")
    ds = load_dataset(args.data)
    if ds.n_samples == 0:
        raise DatasetError(f"no samples in {args.data}")
    est, scaler = _fit_on(kind, args, args.seed, ds.X, ds.original_labels())
    save_model_file(est, args.out, scaler=scaler)
    if args.trace:
        K = est.classes_.shape[0]
        if kind == "knpsvc":
            _write_text(args.trace, trace_to_csv(est.trace_, K))
        else:
            _write_text(args.trace, deep_trace_to_csv(est.trace_, K))
    note = ""
    if kind == "knpsvc":
        note = (f" ({len(est.trace_)} outer iterations, "
                f"{'converged' if est.converged_ else 'not converged'})")
    print(f"trained {kind} on {ds.n_samples} samples, "
          f"{ds.n_classes} classes -> {args.out}{note}")
    return 0


def cmd_predict(args) -> int:
    est, scaler = load_model_file(args.model)
    ds = load_dataset(args.data)
    X = _conform_width(ds, est.n_features_in_, args.data)
    if scaler is not None:
        X = scaler.transform(X)
    lines = ["label"]
    if X.shape[0]:
        lines += [_format_label(v) for v in est.predict(X)]
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.out:
        print(f"wrote {X.shape[0]} predictions -> {args.out}")
    return 0


def _metrics_csv(y_true: np.ndarray, y_pred: np.ndarray,
                 model_classes: np.ndarray) -> tuple[str, float]:
    labels = np.unique(np.concatenate([model_classes, y_true]))
    acc = float(np.mean(y_true == y_pred)) if y_true.size else float("nan")
    lines = ["metric,value", f"accuracy,{fmt_float(acc)}", ""]
    lines.append("class,support,correct,accuracy,flag")
    for lab in labels:
        mask = y_true == lab
        support = int(mask.sum())
        correct = int((y_pred[mask] == lab).sum())
        if support:
            lines.append(f"{_format_label(lab)},{support},{correct},"
                         f"{fmt_float(correct / support)},")
        else:
            lines.append(f"{_format_label(lab)},0,0,{fmt_float(float('nan'))},absent")
    lines.append("")
    header = ["confusion"] + [_format_label(lab) for lab in labels]
    lines.append(",".join(header))
    for lab_t in labels:
        row = [_format_label(lab_t)]
        for lab_p in labels:
            row.append(str(int(((y_true == lab_t) & (y_pred == lab_p)).sum())))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n", acc


def cmd_eval(args) -> int:
    if args.repeats:
        return _eval_protocol(args)
    data_path = args.test or args.data
    if not data_path:
        raise ConfigError("eval needs --data or --test")
    if args.model in MODEL_KINDS:
        raise ConfigError(
            f"eval with model kind {args.model!r} requires --repeats; "
            "otherwise pass a model file path")
    est, scaler = load_model_file(args.model)
    ds = load_dataset(data_path)
    if ds.n_samples == 0:
        raise DatasetError(f"no samples in {data_path}")
    X = _conform_width(ds, est.n_features_in_, data_path)
    if scaler is not None:
        X = scaler.transform(X)
    y_true = ds.original_labels()
    y_pred = est.predict(X)
    text, acc = _metrics_csv(y_true, y_pred, np.asarray(est.classes_))
    _write_text(args.out, text)
    print(f"accuracy {acc:.4f} on {ds.n_samples} samples")
    return 0


def _eval_protocol(args) -> int:
    kind = args.model
    if kind not in MODEL_KINDS:
        raise ConfigError(
            f"--repeats needs a model kind from {MODEL_KINDS}, got {kind!r}")
    if not args.data:
        raise ConfigError("protocol eval needs --data")
    repeats = args.repeats
    if repeats < 1:
        raise ConfigError(f"--repeats must be at least 1, got {repeats}")
    fraction = args.fraction if args.fraction is not None else 0.6
    ds = load_dataset(args.data)
    accs = []
    for i in range(repeats):
        split_ss, train_seed = _repeat_seeds(args.seed, i)
        train, test = split_dataset(ds, fraction, split_ss)
        est, scaler = _fit_on(kind, args, train_seed,
                              train.X, train.original_labels())
        X_te = test.X if scaler is None else scaler.transform(test.X)
        acc = float(np.mean(est.predict(X_te) == test.original_labels()))
        accs.append(acc)
        print(f"repeat {i + 1}/{repeats}: accuracy {acc:.4f}")
    accs = np.asarray(accs)
    mean = float(accs.mean())
    std = float(accs.std(ddof=1)) if repeats > 1 else 0.0
    lines = ["repeat,accuracy"]
    lines += [f"{i + 1},{fmt_float(a)}" for i, a in enumerate(accs)]
    lines += ["", "metric,value", f"mean_accuracy,{fmt_float(mean)}",
              f"std_accuracy,{fmt_float(std)}"]
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"{kind}: accuracy {100 * mean:.2f} +/- {100 * std:.2f} "
          f"over {repeats} splits (fraction {fraction})")
    return 0


def _load_grid(path: str, kind: str, args) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad sweep config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("sweep config must be a JSON object of axes")
    allowed = SWEEP_AXES[kind]
    axes: dict[str, list] = {}
    cap = DEFAULT_GRID_CAP
    for key, value in raw.items():
        if key == "max_points":
            cap = int(value)
            continue
        if key not in allowed:
            raise ConfigError(
                f"axis {key!r} not applicable to {kind} (allowed: {', '.join(allowed)})")
        values = value if isinstance(value, list) else [value]
        if not values:
            raise ConfigError(f"axis {key!r} is empty")
        axes[key] = values
    if getattr(args, "max_grid", None):
        cap = args.max_grid
    names = list(axes)
    count = 1
    for name in names:
        count *= len(axes[name])
    if count > cap:
        raise ConfigError(f"grid has {count} points, exceeds cap {cap}")
    points = []
    for combo in itertools.product(*(axes[name] for name in names)):
        points.append(dict(zip(names, combo)))
    return points or [{}]


def cmd_sweep(args) -> int:
    kind = args.model
    if kind not in MODEL_KINDS:
        raise ConfigError(f"--model must be one of {MODEL_KINDS}, got {kind!r}")
    points = _load_grid(args.config, kind, args)
    if not args.data:
        raise ConfigError("sweep needs --data")
    repeats = args.repeats if args.repeats else 1
    fraction = args.fraction if args.fraction is not None else 0.6
    ds = load_dataset(args.data)
    splits = []
    train_seeds = []
    for i in range(repeats):
        split_ss, train_seed = _repeat_seeds(args.seed, i)
        splits.append(split_dataset(ds, fraction, split_ss))
        train_seeds.append(train_seed)
    results = []
    for point in points:
        accs = []
        for (train, test), train_seed in zip(splits, train_seeds):
            est, scaler = _fit_on(kind, args, train_seed, train.X,
                                  train.original_labels(), overrides=point)
            X_te = test.X if scaler is None else scaler.transform(test.X)
            accs.append(float(np.mean(est.predict(X_te) == test.original_labels())))
        accs = np.asarray(accs)
        std = float(accs.std(ddof=1)) if repeats > 1 else 0.0
        results.append((point, float(accs.mean()), std))
    results.sort(key=lambda r: -r[1])
    columns = ["c", "r1", "r2", "mu", "gamma", "dim"]
    lines = [",".join(columns + ["mean_accuracy", "std_accuracy"])]
    for point, mean, std in results:
        cells = []
        for col in columns:
            if col in point:
                v = point[col]
                cells.append(str(v) if isinstance(v, int) else fmt_float(v))
            else:
                cells.append("")
        cells += [fmt_float(mean), fmt_float(std)]
        lines.append(",".join(cells))
    _write_text(args.out, "\n".join(lines) + "\n")
    best_point, best_mean, _ = results[0]
    print(f"swept {len(results)} points x {repeats} repeat(s); "
          f"best mean accuracy {best_mean:.4f} at {best_point or 'defaults'}")
    return 0


def _read_trace(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ConfigError(f"trace {path} is empty")
    return rows[0], rows[1:]


def _objective_columns(header: list[str]) -> list[int]:
    cols = []
    k = 1
    while f"J_{k}" in header:
        cols.append(header.index(f"J_{k}"))
        k += 1
    if not cols:
        raise ConfigError("trace has no J_k columns")
    return cols


def cmd_diag(args) -> int:
    if not args.trace:
        raise ConfigError("diag needs at least one --trace")
    prefix = args.out or "diag"
    traces = [(path, *_read_trace(path)) for path in args.trace]
    written = []

    first_path, first_header, first_rows = traces[0]
    gap_cols = [c for c in ("iter", "primal", "dual", "gap") if c in first_header]
    if len(traces) == 1 and len(gap_cols) == 4 and first_rows:
        idx = [first_header.index(c) for c in gap_cols]
        lines = [",".join(gap_cols)]
        for row in first_rows:
            cells = [row[idx[0]]]
            cells += [fmt_float(float(row[j])) for j in idx[1:]]
            lines.append(",".join(cells))
        gap_path = f"{prefix}_gap.csv"
        _write_text(gap_path, "\n".join(lines) + "\n")
        written.append(gap_path)

    k_counts = set()
    obj_rows = []
    for path, header, rows in traces:
        cols = _objective_columns(header)
        if not rows:
            raise ConfigError(f"trace {path} has no data rows")
        k_counts.add(len(cols))
        final = rows[-1]
        obj_rows.append((path, [fmt_float(float(final[j])) for j in cols]))
    if len(k_counts) != 1:
        raise ConfigError("traces to compare have different class counts")
    K = k_counts.pop()
    lines = [",".join(["trace"] + [f"J_{l + 1}" for l in range(K)])]
    for path, cells in obj_rows:
        lines.append(",".join([path] + cells))
    obj_path = f"{prefix}_objectives.csv"
    _write_text(obj_path, "\n".join(lines) + "\n")
    written.append(obj_path)
    print(f"wrote {', '.join(written)}")
    return 0


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=("linear", "gaussian"), default="gaussian",
                   help="kernel for the kernel-family models")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="Gaussian bandwidth (default: mean squared distance heuristic)")
    p.add_argument("--jitter", type=float, default=None,
                   help="Gram diagonal jitter (default: automatic schedule)")


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, default=None, help="dissimilarity hinge weight")
    p.add_argument("--r1", type=float, default=None,
                   help="weight regularizer (twsvm: ridge term)")
    p.add_argument("--r2", type=float, default=None, help="subspace regularizer")
    p.add_argument("--mu", type=float, default=None, help="manifold weight")
    p.add_argument("--gamma", type=float, default=None,
                   help="dual trade-off (dnpsvc: peak of the gamma schedule)")
    p.add_argument("--eta", type=float, default=None,
                   help="descent step size (dnpsvc: initial learning rate)")
    p.add_argument("--dim", type=int, default=None,
                   help="subspace dimension (dnpsvc: encoder output width)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npsvcpp",
        description="Nonparallel SVM family: train, predict, eval, sweep, diag")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and save it")
    p_train.add_argument("--model", choices=MODEL_KINDS, default="knpsvc")
    p_train.add_argument("--data", required=True, help="training data file")
    _add_kernel_flags(p_train)
    _add_hyper_flags(p_train)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--standardize", action="store_true",
                         help="standardize features (stored with the model)")
    p_train.add_argument("--out", default="model.json", help="model file path")
    p_train.add_argument("--trace", default=None, help="write iteration trace CSV")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="label a data file with a saved model")
    p_pred.add_argument("--model", required=True, help="model file path")
    p_pred.add_argument("--data", required=True, help="input data file")
    p_pred.add_argument("--out", default=None, help="output CSV (default stdout)")
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser(
        "eval", help="evaluate a saved model, or run the split protocol with --repeats")
    p_eval.add_argument("--model", required=True,
                        help="model file path, or model kind with --repeats")
    p_eval.add_argument("--data", default=None, help="data file")
    p_eval.add_argument("--test", default=None,
                        help="test data file (defaults to --data)")
    _add_kernel_flags(p_eval)
    _add_hyper_flags(p_eval)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--repeats", type=int, default=None,
                        help="run R split-train-eval repeats")
    p_eval.add_argument("--fraction", type=float, default=None,
                        help="train fraction for the protocol (default 0.6)")
    p_eval.add_argument("--standardize", action="store_true")
    p_eval.add_argument("--out", default=None, help="metrics CSV (default stdout)")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid search from a JSON config")
    p_sweep.add_argument("config", help="JSON file of axis lists, e.g. {\"c\": [0.1, 1]}")
    p_sweep.add_argument("--model", choices=MODEL_KINDS, default="knpsvc")
    p_sweep.add_argument("--data", required=True)
    _add_kernel_flags(p_sweep)
    _add_hyper_flags(p_sweep)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--repeats", type=int, default=None,
                         help="repeats per grid point (default 1)")
    p_sweep.add_argument("--fraction", type=float, default=None)
    p_sweep.add_argument("--standardize", action="store_true")
    p_sweep.add_argument("--max-grid", type=int, default=None,
                         help=f"grid size cap (default {DEFAULT_GRID_CAP})")
    p_sweep.add_argument("--out", default=None, help="results CSV (default stdout)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_diag = sub.add_parser("diag", help="export plot-ready CSVs from a trace")
    p_diag.add_argument("--trace", action="append", required=True,
                        help="trace CSV from train (repeat to compare two)")
    p_diag.add_argument("--out", default=None, help="output prefix (default 'diag')")
    p_diag.set_defaults(func=cmd_diag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ShapeMismatchError as exc:
        _fail(exc)
        return 3
    except NumericalError as exc:
        _fail(exc)
        return 1
    except (DatasetError, ConfigError, ModelFormatError, OSError) as exc:
        _fail(exc)
        return 2
    except ValueError as exc:
        _fail(exc)
        return 2


def console_entry() -> None:
    sys.exit(main())
