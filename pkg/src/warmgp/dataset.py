"""CSV ingestion, standardization and sequential (n1 + n2) splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise DatasetError(
                f"X rows ({self.X.shape}) and y length ({self.y.shape}) disagree")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizationParams:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    def inverse(self, d: Dataset) -> Dataset:
        """Map a standardized dataset back to original units."""
        X = d.X * self.x_std + self.x_mean
        y = d.y * self.y_std + self.y_mean
        return Dataset(X, y, d.name)


@dataclass(frozen=True)
class SequentialSplit:
    X1: np.ndarray
    y1: np.ndarray
    X2: np.ndarray
    y2: np.ndarray
    seed: int
    idx1: np.ndarray
    idx2: np.ndarray

    @property
    def X(self):
        return np.vstack([self.X1, self.X2])

    @property
    def y(self):
        return np.concatenate([self.y1, self.y2])


def load_csv(path, target_column: int, header: bool = False, name: str | None = None) -> Dataset:
    """Read a comma-delimited numeric file.

    ``target_column`` is a zero-based index (negative values count from the
    end); the remaining columns become features in file order. Line numbers
    in errors are 1-based and count the header line if present.
    """
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DatasetError(f"{path}: line {lineno}: non-numeric cell ({exc})") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if not -width <= target_column < width:
        raise DatasetError(f"target column {target_column} out of range for {width} columns")
    t = target_column % width
    X = np.delete(data, t, axis=1)
    return Dataset(X, data[:, t].copy(), name or path.stem)


def _col_stats(a):
    mean = a.mean(axis=0)
    std = a.std(axis=0)
    return mean, std


def standardize(d: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Zero-mean, unit population-std features and targets.

    Constant columns map to all zeros (their scale is recorded as 1).
    """
    if d.n < 2:
        raise DatasetError("standardization needs at least 2 rows")
    x_mean, x_std = _col_stats(d.X)
    x_scale = np.where(x_std > 0, x_std, 1.0)
    y_mean, y_std = float(d.y.mean()), float(d.y.std())
    y_scale = y_std if y_std > 0 else 1.0
    X = (d.X - x_mean) / x_scale
    y = (d.y - y_mean) / y_scale
    params = StandardizationParams(x_mean, x_scale, y_mean, y_scale)
    return Dataset(X, y, d.name), params


def sample_split(d: Dataset, n1: int, n2: int, seed: int) -> SequentialSplit:
    """Draw disjoint random subsets of sizes n1 and n2 without replacement."""
    if n1 <= 0 or n2 <= 0:
        raise DatasetError("n1 and n2 must both be positive")
    if n1 + n2 > d.n:
        raise DatasetError(f"n1 + n2 = {n1 + n2} exceeds dataset size {d.n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(d.n, size=n1 + n2, replace=False)
    i1, i2 = idx[:n1], idx[n1:]
    return SequentialSplit(d.X[i1], d.y[i1], d.X[i2], d.y[i2], seed, i1, i2)
