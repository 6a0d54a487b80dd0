"""Data ingestion, validation, and column standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DataMatrix:
    """An n-by-p numeric matrix with named columns.

    All entries must be finite, n >= 2, p >= 1, and column names unique.
    The underlying array is frozen after construction so instances can be
    shared across concurrent fitting tasks.
    """

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        n, p = values.shape
        if n < 2:
            raise ValueError(f"need at least 2 observations, got {n}")
        if p < 1:
            raise ValueError("need at least 1 variable")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(
                f"non-finite entry at row {bad[0] + 1}, column "
                f"{self.column_names[bad[1]] if len(self.column_names) == p else bad[1] + 1!r}"
            )
        names = tuple(str(c) for c in self.column_names)
        if len(names) != p:
            raise ValueError(f"expected {p} column names, got {len(names)}")
        if len(set(names)) != p:
            dupes = sorted({c for c in names if names.count(c) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def select(self, indices) -> "DataMatrix":
        """Return a new DataMatrix restricted to the given column indices."""
        idx = list(indices)
        return DataMatrix(self.values[:, idx], tuple(self.column_names[j] for j in idx))


@dataclass(frozen=True)
class StandardizationParams:
    """Per-column means and standard deviations used for scaling.

    ``ddof`` records the divisor convention (1 = sample, 0 = population).
    """

    means: np.ndarray
    sds: np.ndarray
    ddof: int = 1

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        sds = np.asarray(self.sds, dtype=float)
        if means.shape != sds.shape or means.ndim != 1:
            raise ValueError("means and sds must be 1-D arrays of equal length")
        if not np.all(sds > 0):
            raise ValueError("all standard deviations must be positive")
        for arr in (means, sds):
            arr.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)


@dataclass(frozen=True)
class LabeledDataset:
    """A DataMatrix together with optional integer class labels in 1..K."""

    data: DataMatrix
    labels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.labels is None:
            return
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1 or labels.shape[0] != self.data.n:
            raise ValueError(
                f"labels must have length n={self.data.n}, got {labels.shape}"
            )
        k = labels.max(initial=0)
        present = set(labels.tolist())
        if labels.min(initial=1) < 1 or present != set(range(1, k + 1)):
            raise ValueError("labels must cover every class in 1..K at least once")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


def load_csv(path, label_column: str | None = None) -> LabeledDataset:
    """Load a headered numeric CSV, optionally extracting a label column.

    The label column (if named) is removed from the matrix and factor-encoded
    by order of first appearance into integers 1..K. Non-numeric or missing
    cells in data columns are hard errors reporting the 1-based data row and
    the column name.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise ValueError(f"{path}: duplicate header names: {dupes}")
        if label_column is not None and label_column not in header:
            raise ValueError(f"{path}: label column {label_column!r} not in header")
        label_idx = header.index(label_column) if label_column is not None else None

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for i, record in enumerate(reader, start=1):
            if len(record) != len(header):
                raise ValueError(
                    f"{path}: row {i} has {len(record)} fields, expected {len(header)}"
                )
            row = []
            for j, cell in enumerate(record):
                if j == label_idx:
                    raw_labels.append(cell.strip())
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric cell {cell!r} at row {i}, "
                        f"column {header[j]!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ValueError(
                        f"{path}: non-finite cell {cell!r} at row {i}, "
                        f"column {header[j]!r}"
                    )
                row.append(value)
            rows.append(row)

    names = tuple(h for j, h in enumerate(header) if j != label_idx)
    data = DataMatrix(np.array(rows, dtype=float), names)

    labels = None
    if label_idx is not None:
        codes: dict[str, int] = {}
        encoded = []
        for cell in raw_labels:
            if cell not in codes:
                codes[cell] = len(codes) + 1
            encoded.append(codes[cell])
        labels = np.array(encoded, dtype=int)
    return LabeledDataset(data, labels)


def standardize(X: DataMatrix) -> tuple[DataMatrix, StandardizationParams]:
    """Center each column to mean 0 and scale to sample standard deviation 1."""
    means = X.values.mean(axis=0)
    sds = X.values.std(axis=0, ddof=1)
    for j, sd in enumerate(sds):
        if not sd > 0:
            raise ValueError(f"zero variance in column {X.column_names[j]!r}")
    scaled = (X.values - means) / sds
    return DataMatrix(scaled, X.column_names), StandardizationParams(means, sds, ddof=1)


def destandardize(X: DataMatrix, params: StandardizationParams) -> DataMatrix:
    """Invert :func:`standardize`, recovering the original scale."""
    return DataMatrix(X.values * params.sds + params.means, X.column_names)
