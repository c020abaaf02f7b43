"""Dataset ingestion, stratified splits, and standardization.

Datasets are dense (desk scale, n up to about 1e4; the Gram matrix and
its per-class blocks are the real memory ceiling, not the raw data).
Labels are remapped on load to contiguous codes 1..K with the original
values recorded, so predictions can be reported in the original label
space.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, ParseError
from .ioutil import fmt_float


@dataclass
class Dataset:
    """Dense labeled dataset.

    X has one sample per row; y holds contiguous codes in 1..K and
    classes[code - 1] recovers the original label. Every class in 1..K
    has at least one sample (vacuously true for the empty dataset,
    which prediction-only paths accept).
    """

    X: np.ndarray
    y: np.ndarray
    classes: np.ndarray
    feature_names: list[str] | None = None

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return self.classes.shape[0]

    def original_labels(self) -> np.ndarray:
        """y translated back to the original label values."""
        if self.y.size == 0:
            return np.zeros(0)
        return self.classes[self.y - 1]


def make_dataset(X, y_raw, feature_names: list[str] | None = None) -> Dataset:
    """Build a Dataset, remapping raw labels to contiguous codes 1..K."""
    X = np.asarray(X, dtype=np.float64)
    y_raw = np.asarray(y_raw, dtype=np.float64)
    if X.ndim != 2:
        raise DatasetError(f"X must be 2-dimensional, got shape {X.shape}")
    if y_raw.shape[0] != X.shape[0]:
        raise DatasetError(
            f"{X.shape[0]} samples but {y_raw.shape[0]} labels")
    if not np.isfinite(X).all() or not np.isfinite(y_raw).all():
        raise DatasetError("non-finite values in data")
    classes, codes = np.unique(y_raw, return_inverse=True)
    return Dataset(X=X, y=codes.astype(np.intp) + 1, classes=classes,
                   feature_names=feature_names)


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(line_no, f"non-numeric {what} {token!r}") from None
    if not np.isfinite(value):
        raise ParseError(line_no, f"non-finite {what} {token!r}")
    return value


def parse_libsvm(text: str) -> Dataset:
    """Parse LIBSVM text: `<label> <index>:<value> ...` per line.

    Indices are 1-based and must be strictly ascending within a line;
    the matrix width is the maximum index seen and missing entries are
    zero. Blank lines are skipped. Malformed fields raise ParseError
    with the 1-based line number.
    """
    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    width = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        label = _parse_float(tokens[0], line_no, "label")
        entries: list[tuple[int, float]] = []
        prev_idx = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"expected index:value, got {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise ParseError(line_no, f"non-numeric index {idx_s!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"index {idx} must be >= 1")
            if idx <= prev_idx:
                raise ParseError(
                    line_no, f"indices must be strictly ascending, got {idx} after {prev_idx}")
            value = _parse_float(val_s, line_no, "value")
            entries.append((idx, value))
            prev_idx = idx
        width = max(width, prev_idx)
        labels.append(label)
        rows.append(entries)
    X = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for idx, value in entries:
            X[i, idx - 1] = value
    return make_dataset(X, np.asarray(labels))


def _format_label(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else fmt_float(v)


def format_libsvm(ds: Dataset) -> str:
    """Canonical LIBSVM serialization: every index 1..m written densely
    so the matrix width survives a round-trip."""
    out = []
    originals = ds.original_labels()
    for i in range(ds.n_samples):
        cells = [_format_label(originals[i])]
        cells += [f"{j + 1}:{fmt_float(ds.X[i, j])}" for j in range(ds.n_features)]
        out.append(" ".join(cells))
    return "\n".join(out) + ("\n" if out else "")


def parse_csv_dataset(text: str) -> Dataset:
    """Parse dense CSV with header `label,f1,...,fm`."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "missing header") from None
    header = [h.strip() for h in header]
    if not header or header[0] != "label":
        raise ParseError(1, "header must start with 'label'")
    names = header[1:]
    m = len(names)
    labels: list[float] = []
    rows: list[list[float]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != m + 1:
            raise ParseError(line_no, f"expected {m + 1} fields, got {len(row)}")
        labels.append(_parse_float(row[0], line_no, "label"))
        rows.append([_parse_float(cell, line_no, "value") for cell in row[1:]])
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), m)
    return make_dataset(X, np.asarray(labels), feature_names=names or None)


def format_csv_dataset(ds: Dataset) -> str:
    names = ds.feature_names or [f"f{j + 1}" for j in range(ds.n_features)]
    lines = [",".join(["label"] + list(names))]
    originals = ds.original_labels()
    for i in range(ds.n_samples):
        cells = [_format_label(originals[i])]
        cells += [fmt_float(v) for v in ds.X[i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def load_dataset(path: str) -> Dataset:
    """Load a dataset file; `.csv` selects the CSV grammar, anything
    else the LIBSVM grammar."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if str(path).lower().endswith(".csv"):
        return parse_csv_dataset(text)
    return parse_libsvm(text)


def split_dataset(ds: Dataset, train_fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Stratified seeded split into (train, test).

    Per class, round(train_fraction * n_c) samples go to train, clamped
    so both sides keep at least one; a class with a single sample
    cannot stratify and is rejected. Row order within each side follows
    the original dataset (deterministic given the seed).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for code in range(1, ds.n_classes + 1):
        members = np.flatnonzero(ds.y == code)
        n_c = members.size
        if n_c < 2:
            raise DatasetError(
                f"class {_format_label(ds.classes[code - 1])} has {n_c} sample(s); "
                "cannot stratify")
        n_train = int(round(train_fraction * n_c))
        n_train = min(max(n_train, 1), n_c - 1)
        perm = rng.permutation(members)
        train_idx.append(np.sort(perm[:n_train]))
        test_idx.append(np.sort(perm[n_train:]))
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    train = Dataset(X=ds.X[tr].copy(), y=ds.y[tr].copy(), classes=ds.classes.copy(),
                    feature_names=ds.feature_names)
    test = Dataset(X=ds.X[te].copy(), y=ds.y[te].copy(), classes=ds.classes.copy(),
                   feature_names=ds.feature_names)
    return train, test


@dataclass
class Standardizer:
    """Affine per-feature transform fitted on a training split.

    Non-constant features map to mean 0, variance 1; zero-variance
    features are centered only (scale pinned to 1).
    """

    mean_: np.ndarray
    scale_: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_


def fit_standardizer(X: np.ndarray) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise DatasetError("cannot standardize an empty training set")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return Standardizer(mean_=mean, scale_=np.where(std > 0, std, 1.0))


def standardize(train: Dataset, test: Dataset | None = None):
    """Standardize a train/test pair with train statistics.

    Returns (train', test', Standardizer); test' is None when no test
    split is given.
    """
    scaler = fit_standardizer(train.X)
    train_t = Dataset(X=scaler.transform(train.X), y=train.y.copy(),
                      classes=train.classes.copy(), feature_names=train.feature_names)
    test_t = None
    if test is not None:
        test_t = Dataset(X=scaler.transform(test.X), y=test.y.copy(),
                         classes=test.classes.copy(), feature_names=test.feature_names)
    return train_t, test_t, scaler
