"""Dataset ingestion, normalization, splits, metrics, and synthetic tasks.

Preprocessing follows a two-stage rule: divide every training column by its
Euclidean norm (the same divisors are applied to the test columns), then
scale every row of both sets to unit norm. Zero rows and zero columns pass
through unscaled. The preprocessing state is tracked on the Dataset so that
reapplying the transform is an exact no-op.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import TmParams, evaluate_batch, init_random

TASKS = ("regression", "binary")
STATES = ("raw", "column_normalized", "row_normalized")


class DataError(ValueError):
    """Unusable input data: parse failures, shape mismatches, bad labels."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    state: str = "raw"
    column_norms: np.ndarray | None = None  # train-derived divisors, stage 1

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {self.X.shape}")
        if self.y.size != self.X.shape[0]:
            raise DataError(f"{self.X.shape[0]} rows but {self.y.size} targets")
        if self.task not in TASKS:
            raise DataError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.state not in STATES:
            raise DataError(f"unknown preprocessing state {self.state!r}")
        if self.task == "binary":
            labels = set(np.unique(self.y))
            if labels <= {0.0, 1.0}:
                warnings.warn("remapping {0,1} labels to {-1,+1}", stacklevel=2)
                self.y = np.where(self.y == 0.0, -1.0, 1.0)
            elif not labels <= {-1.0, 1.0}:
                raise DataError(f"binary task needs labels in {{-1,+1}}, got {sorted(labels)}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_sparse_text(stream, task: str = "regression") -> Dataset:
    """Read `label idx:val idx:val ...` lines with strictly increasing
    1-based indices; absent indices are zero."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows, labels, d = [], [], 0
    for ln, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            labels.append(float(tokens[0]))
        except ValueError:
            raise DataError(f"line {ln}, column 1: bad label {tokens[0]!r}") from None
        row = {}
        prev = 0
        for col, tok in enumerate(tokens[1:], start=2):
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise DataError(f"line {ln}, column {col}: expected idx:val, got {tok!r}")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataError(f"line {ln}, column {col}: bad idx:val {tok!r}") from None
            if idx <= prev:
                raise DataError(
                    f"line {ln}, column {col}: index {idx} not strictly increasing"
                )
            prev = idx
            row[idx] = val
        d = max(d, prev)
        rows.append(row)
    if not rows:
        raise DataError("empty file")
    X = np.zeros((len(rows), d))
    for i, row in enumerate(rows):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return Dataset(X=X, y=np.array(labels), task=task)


def write_sparse_text(data: Dataset, fh) -> None:
    """Inverse of parse_sparse_text: nonzero entries as 1-based idx:val with
    shortest round-trip float printing."""
    for i in range(data.n):
        parts = [repr(float(data.y[i]))]
        parts.extend(
            f"{j + 1}:{repr(float(v))}" for j, v in enumerate(data.X[i]) if v != 0.0
        )
        fh.write(" ".join(parts) + "\n")


def parse_csv(stream, label_column: int = 0, task: str = "regression") -> Dataset:
    """Rectangular numeric CSV with an optional single header line; the label
    column is extracted and the remaining columns, in order, form X."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    raw_rows = []
    width = None
    for ln, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(f"line {ln}: ragged row, {len(cells)} cells, expected {width}")
        raw_rows.append((ln, cells))
    if not raw_rows:
        raise DataError("empty file")

    def to_floats(ln, cells):
        out = []
        for c, cell in enumerate(cells, start=1):
            try:
                out.append(float(cell))
            except ValueError:
                raise DataError(f"line {ln}, column {c}: non-numeric cell {cell!r}") from None
        return out

    try:
        table = [to_floats(*raw_rows[0])]
    except DataError:
        # first line is a (non-numeric) header
        if len(raw_rows) == 1:
            raise DataError("no data rows after header") from None
        table = []
    for ln, cells in raw_rows[1:]:
        table.append(to_floats(ln, cells))

    M = np.array(table, dtype=np.float64)
    ncols = M.shape[1]
    lc = label_column if label_column >= 0 else ncols + label_column
    if not 0 <= lc < ncols:
        raise DataError(f"label column {label_column} out of range for {ncols} columns")
    y = M[:, lc]
    X = np.delete(M, lc, axis=1)
    if X.shape[1] == 0:
        raise DataError("CSV has no feature columns besides the label")
    return Dataset(X=X, y=y, task=task)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def _row_normalize(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    scale = np.where(norms > 0, norms, 1.0)
    return X / scale[:, None]


def preprocess(train: Dataset, test: Dataset | None = None):
    """Two-stage normalization; returns (train, test) with updated state.

    Stage 1 divides columns by the TRAIN column norms (zero columns pass
    through); stage 2 scales each row of both sets to unit norm (zero rows
    pass through). Already row-normalized inputs are returned unchanged, so
    the transform is an exact fixed point of itself.
    """
    if test is not None and test.d != train.d:
        raise DataError(f"train has d={train.d} but test has d={test.d}")
    if test is not None and test.state != train.state:
        raise DataError(
            f"preprocessing states differ: train {train.state!r}, test {test.state!r}"
        )
    if train.state == "row_normalized":
        return train, test

    if train.state == "raw":
        col_norms = np.linalg.norm(train.X, axis=0)
        divisors = np.where(col_norms > 0, col_norms, 1.0)
        Xtr = train.X / divisors
        Xte = test.X / divisors if test is not None else None
    else:  # column stage already applied
        col_norms = train.column_norms
        Xtr = train.X
        Xte = test.X if test is not None else None

    train_out = replace(train, X=_row_normalize(Xtr), state="row_normalized",
                        column_norms=col_norms)
    test_out = None
    if test is not None:
        test_out = replace(test, X=_row_normalize(Xte), state="row_normalized",
                           column_norms=col_norms)
    return train_out, test_out


# ---------------------------------------------------------------------------
# splits and metrics
# ---------------------------------------------------------------------------

def kfold(n: int, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Seeded permutation split into k near-equal disjoint folds."""
    if k > n:
        raise DataError(f"cannot split {n} rows into {k} folds")
    if k < 1:
        raise DataError("k must be >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


@dataclass(frozen=True)
class Metrics:
    kind: str  # "relerr" or "error_rate"
    value: float


def metric(pred, truth, task: str) -> Metrics:
    """Regression: ||pred - truth|| / ||truth||. Binary: sign-mismatch rate,
    with the tie f=0 decided as +1."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size != truth.size:
        raise DataError(f"{pred.size} predictions vs {truth.size} targets")
    if task == "regression":
        denom = np.linalg.norm(truth)
        if denom == 0.0:
            raise DataError("relative error undefined for all-zero targets")
        return Metrics("relerr", float(np.linalg.norm(pred - truth) / denom))
    if task == "binary":
        decisions = np.where(pred >= 0, 1.0, -1.0)
        return Metrics("error_rate", float(np.mean(decisions != truth)))
    raise DataError(f"task must be one of {TASKS}, got {task!r}")


# ---------------------------------------------------------------------------
# synthetic tasks
# ---------------------------------------------------------------------------

def synth_tm_task(
    seed: int,
    d: int,
    q: int,
    r_true: int,
    n_train: int,
    n_test: int,
    noise_sd: float = 0.0,
) -> tuple[Dataset, Dataset, TmParams]:
    """Ground-truth model with unit-variance coordinates, rows uniform on the
    unit sphere, y = f(x) plus optional Gaussian noise; the test set is
    always noiseless."""
    if min(d, q, n_train, n_test) < 1 or r_true < 1:
        raise ValueError("all task dimensions must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    true_params = init_random(d, q, r_true, alpha=1.0, seed=seed)
    rng = np.random.default_rng([seed, 1])  # separate stream from the params

    def sphere_rows(n):
        Z = rng.normal(size=(n, d))
        return _row_normalize(Z)

    Xtr, Xte = sphere_rows(n_train), sphere_rows(n_test)
    ytr = evaluate_batch(true_params, Xtr)
    if noise_sd > 0:
        ytr = ytr + rng.normal(0.0, noise_sd, size=n_train)
    yte = evaluate_batch(true_params, Xte)
    train = Dataset(X=Xtr, y=ytr, task="regression", state="row_normalized")
    test = Dataset(X=Xte, y=yte, task="regression", state="row_normalized")
    return train, test, true_params
