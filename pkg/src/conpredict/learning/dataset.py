"""Labeled feature datasets: assembly from metric tables and SMOTE."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

FunctionKey = tuple[str, str]  # (program, function)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Ordered labeled feature rows, one per (program, function)."""

    feature_names: tuple[str, ...]
    X: np.ndarray  # (n, p) float64
    y: np.ndarray  # (n,) int64, 1 = faulty
    keys: tuple[FunctionKey, ...] = field(default=())

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise DatasetError("feature matrix shape does not match names")
        if self.X.shape[0] != self.y.shape[0]:
            raise DatasetError("label count does not match row count")
        if not np.isfinite(self.X).all():
            raise DatasetError("non-finite feature values")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DatasetError("duplicate feature names")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def class_counts(self) -> tuple[int, int]:
        """(faulty, non-faulty) counts."""
        pos = int(self.y.sum())
        return pos, int(self.y.shape[0] - pos)

    def select_features(self, names: Sequence[str]) -> "Dataset":
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(tuple(names), self.X[:, idx].copy(), self.y, self.keys)

    def take(self, rows: np.ndarray) -> "Dataset":
        keys = tuple(self.keys[i] for i in rows) if self.keys else ()
        return Dataset(self.feature_names, self.X[rows], self.y[rows], keys)


def assemble(
    tables: Sequence[Mapping[FunctionKey, Mapping[str, float]]],
    labels: Mapping[FunctionKey, int],
) -> Dataset:
    """Join metric tables on (program, function) and attach labels.

    Every labeled key must appear in every table; feature names must not
    collide across tables.  Row order follows the labels mapping.
    """
    names: list[str] = []
    per_table_names: list[list[str]] = []
    for table in tables:
        if not table:
            raise DatasetError("empty metric table")
        tnames = list(next(iter(table.values())).keys())
        for name in tnames:
            if name in names:
                raise DatasetError(f"duplicate feature column: {name}")
        names.extend(tnames)
        per_table_names.append(tnames)
    keys = list(labels.keys())
    if len(set(keys)) != len(keys):
        raise DatasetError("duplicate function keys in labels")
    rows = []
    for key in keys:
        values: list[float] = []
        for table, tnames in zip(tables, per_table_names):
            if key not in table:
                raise DatasetError(f"label for unknown function: {key}")
            row = table[key]
            values.extend(float(row[name]) for name in tnames)
        rows.append(values)
    X = np.asarray(rows, dtype=np.float64).reshape(len(keys), len(names))
    y = np.asarray([int(labels[k]) for k in keys], dtype=np.int64)
    return Dataset(tuple(names), X, y, tuple(keys))


def smote(
    d: Dataset, percent: int, k: int, seed: int, return_bases: bool = False
):
    """Oversample the minority class with synthetic rows.

    Adds floor(percent/100 * minority) rows, each drawn on the segment
    between a minority row and one of its k nearest minority neighbors.
    Majority rows are untouched.  With `return_bases`, also returns the
    original-row index each synthetic row was interpolated from.
    """
    if percent < 0:
        raise DatasetError("percent must be non-negative")
    if percent == 0:
        return (d, np.empty(0, dtype=np.int64)) if return_bases else d
    pos, neg = d.class_counts()
    minority_label = 1 if pos <= neg else 0
    minority = np.flatnonzero(d.y == minority_label)
    m = minority.shape[0]
    if m < 2:
        raise DatasetError("minority class needs at least 2 rows for SMOTE")
    k_eff = min(k, m - 1)
    if k < 1:
        raise DatasetError("k must be positive")
    n_new = (percent * m) // 100
    Xm = d.X[minority]
    # Pairwise distances among minority rows only.
    diff = Xm[:, None, :] - Xm[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k_eff]

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    new_rows = np.empty((n_new, d.X.shape[1]), dtype=np.float64)
    bases = np.empty(n_new, dtype=np.int64)
    for i in range(n_new):
        base = i % m
        pick = nn[base][rng.integers(0, k_eff)]
        u = rng.random()
        new_rows[i] = Xm[base] + u * (Xm[pick] - Xm[base])
        bases[i] = minority[base]
    X = np.vstack([d.X, new_rows])
    y = np.concatenate([d.y, np.full(n_new, minority_label, dtype=np.int64)])
    keys = tuple(d.keys) + tuple(
        ("synthetic", f"smote_{i}") for i in range(n_new)
    ) if d.keys else ()
    out = Dataset(d.feature_names, X, y, keys)
    return (out, bases) if return_bases else out
