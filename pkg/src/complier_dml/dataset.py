"""Observational IV data: container, CSV round-trip and fold partitioning."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataValidationError, ParseError, SchemaError


@dataclass(frozen=True, eq=False)
class IVDataset:
    """n observations of (outcome y, binary treatment d, binary instrument z, covariates x).

    ``x`` is always stored as an ``(n, k)`` float array with ``k >= 1``. Row
    numbers in validation errors count from 1.
    """

    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    x: np.ndarray
    covariate_names: tuple = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=float)
        z = np.asarray(self.z, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or d.ndim != 1 or z.ndim != 1 or x.ndim != 2:
            raise DataValidationError("y, d, z must be 1-d and x must be 2-d")
        n = y.shape[0]
        if not (d.shape[0] == z.shape[0] == x.shape[0] == n):
            raise DataValidationError(
                f"length mismatch: y={n}, d={d.shape[0]}, z={z.shape[0]}, x={x.shape[0]}"
            )
        if x.shape[1] < 1:
            raise DataValidationError("at least one covariate column is required")
        for name, arr in (("y", y), ("d", d), ("z", z), ("x", x)):
            bad = ~np.isfinite(arr)
            if bad.any():
                row = int(np.argwhere(bad)[0][0])
                raise DataValidationError(f"non-finite value in {name} at row {row + 1}")
        for name, arr in (("d", d), ("z", z)):
            bad = (arr != 0.0) & (arr != 1.0)
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise DataValidationError(
                    f"{name} must be 0 or 1; found {float(arr[row]):g} at row {row + 1}"
                )
        names = tuple(self.covariate_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataValidationError("covariate_names length does not match x width")
        for arr in (y, d, z, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "IVDataset":
        idx = np.asarray(idx)
        return IVDataset(self.y[idx], self.d[idx], self.z[idx], self.x[idx],
                         self.covariate_names)

    def with_instrument(self, z) -> "IVDataset":
        return IVDataset(self.y, self.d, z, self.x, self.covariate_names)


@dataclass(frozen=True)
class FoldPartition:
    """Fold label per observation. Labels are 0-based: ``0 .. L-1``."""

    assignments: np.ndarray
    L: int

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.L)


def partition_folds(n: int, L: int, seed: int) -> FoldPartition:
    """Shuffle 0..n-1 with a seeded generator and deal round-robin into L folds."""
    if L < 2:
        raise ConfigError(f"fold count must be >= 2, got {L}")
    if n < 2 * L:
        raise ConfigError(f"need n >= 2*L observations (n={n}, L={L})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % L
    assignments.setflags(write=False)
    return FoldPartition(assignments, L)


def _parse_number(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric cell {text!r} at row {row}, column {column!r}") from None
    return value


def load_csv(path, schema: Mapping[str, object] | None = None) -> IVDataset:
    """Read a headed CSV and map columns onto (y, d, z, x).

    ``schema`` keys: ``y``, ``d``, ``z`` (column names) and ``x`` (list of column
    names). Missing keys default to the literal names ``y``, ``d``, ``z``; an
    empty or absent ``x`` takes every remaining column in file order. Row numbers
    in error messages count data rows from 1.
    """
    schema = dict(schema or {})
    if not os.path.isfile(path):
        raise DataValidationError(f"data file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"empty file: {path}") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]

    y_col = schema.get("y") or "y"
    d_col = schema.get("d") or "d"
    z_col = schema.get("z") or "z"
    x_cols = schema.get("x") or []
    if isinstance(x_cols, str):
        x_cols = [x_cols]
    if not x_cols:
        x_cols = [h for h in header if h not in (y_col, d_col, z_col)]
    for col in [y_col, d_col, z_col, *x_cols]:
        if col not in header:
            raise SchemaError(f"column {col!r} not found in header of {path}")
    if not x_cols:
        raise SchemaError("no covariate columns")
    pos = {h: j for j, h in enumerate(header)}

    n = len(rows)
    y = np.empty(n)
    d = np.empty(n)
    z = np.empty(n)
    x = np.empty((n, len(x_cols)))
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"row {i} has {len(row)} cells, header has {len(header)}")
        y[i - 1] = _parse_number(row[pos[y_col]], i, y_col)
        for name, arr in ((d_col, d), (z_col, z)):
            cell = row[pos[name]].strip()
            value = _parse_number(cell, i, name)
            if value not in (0.0, 1.0):
                raise DataValidationError(
                    f"column {name!r} must be literal 0/1; got {cell!r} at row {i}"
                )
            arr[i - 1] = value
        for j, col in enumerate(x_cols):
            x[i - 1, j] = _parse_number(row[pos[col]], i, col)
    if n == 0:
        raise DataValidationError(f"no data rows in {path}")
    return IVDataset(y, d, z, x, tuple(x_cols))


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return format(float(v), ".17g")


def save_csv(data: IVDataset, path, names: Sequence[str] | None = None) -> None:
    """Write ``data`` with header ``y,d,z,<covariates>`` at 17 significant digits."""
    names = list(names or data.covariate_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "d", "z", *names])
        for i in range(data.n):
            w.writerow([_fmt(data.y[i]), _fmt(data.d[i]), _fmt(data.z[i]),
                        *(_fmt(v) for v in data.x[i])])

