"""Repeated stratified cross-validation with in-fold SMOTE and wrapper
feature selection."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, DatasetError, smote
from .models import ClassifierSpec, train
from .select import f1_faulty, stratified_folds, wrapper_select


@dataclass(frozen=True)
class FoldRecord:
    """Provenance for one (repeat, fold) training round."""

    repeat: int
    fold: int
    train_rows: tuple[int, ...]
    test_rows: tuple[int, ...]
    selected: tuple[str, ...]
    smote_added: int


@dataclass(frozen=True)
class CvResult:
    """Out-of-fold probabilities with full fold/repeat provenance."""

    proba: np.ndarray  # (repeats, n) float64
    fold_of: np.ndarray  # (repeats, n) int64
    records: tuple[FoldRecord, ...]
    feature_names: tuple[str, ...]

    def fold_f1(self, y: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        """F1 of the faulty class per (repeat, fold), flattened."""
        out = []
        for rec in self.records:
            rows = np.asarray(rec.test_rows, dtype=np.int64)
            pred = (self.proba[rec.repeat, rows] >= threshold).astype(np.int64)
            out.append(f1_faulty(y[rows], pred))
        return np.asarray(out, dtype=np.float64)


def _fold_seeds(seed: int, repeat: int, fold: int) -> tuple[int, int, int]:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(repeat, fold))
    a, b, c = ss.generate_state(3, np.uint64)
    return int(a >> np.uint64(33)), int(b >> np.uint64(33)), int(c >> np.uint64(33))


def cross_validate(
    d: Dataset,
    spec: ClassifierSpec,
    folds: int = 10,
    repeats: int = 1,
    smote_percent: int = 100,
    smote_k: int = 5,
    seed: int = 0,
    select: bool = True,
    patience: int = 5,
    internal_folds: int = 5,
) -> CvResult:
    """Stratified k-fold CV repeated `repeats` times.

    Per fold: SMOTE on the training rows only, then wrapper feature
    selection, then training; the held-out rows are scored by the fitted
    model.  The random stream is derived per (repeat, fold), so results
    are bitwise reproducible and independent of execution order.
    """
    n = d.n_rows
    if n < folds:
        raise DatasetError("fewer rows than folds")
    if folds < 2:
        raise DatasetError("need at least 2 folds")
    proba = np.full((repeats, n), np.nan, dtype=np.float64)
    fold_of = np.empty((repeats, n), dtype=np.int64)
    records: list[FoldRecord] = []

    for r in range(repeats):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(r,))
        rng = np.random.Generator(np.random.PCG64(ss))
        assign = stratified_folds(d.y, folds, rng)
        fold_of[r] = assign
        for k in range(folds):
            test_rows = np.flatnonzero(assign == k)
            train_rows = np.flatnonzero(assign != k)
            s_smote, s_select, s_train = _fold_seeds(seed, r, k)
            train_d = d.take(train_rows)
            if len(set(train_d.y.tolist())) < 2:
                # Degenerate training fold: fall back to the class prior.
                prior = float(train_d.y.mean())
                proba[r, test_rows] = prior
                records.append(
                    FoldRecord(r, k, tuple(train_rows), tuple(test_rows), (), 0)
                )
                continue
            n_real = train_d.n_rows
            groups = np.arange(n_real, dtype=np.int64)
            if smote_percent > 0:
                train_d, bases = smote(
                    train_d, smote_percent, smote_k, s_smote, return_bases=True
                )
                groups = np.concatenate([groups, bases])
            spec_fold = replace(spec, seed=s_train)
            if select:
                selected = wrapper_select(
                    train_d,
                    spec_fold,
                    seed=s_select,
                    patience=patience,
                    internal_folds=internal_folds,
                    score_rows=np.arange(n_real, dtype=np.int64),
                    groups=groups,
                )
                if not selected:
                    # An all-noise dataset can leave the empty subset on
                    # top; train on everything rather than nothing.
                    selected = train_d.feature_names
            else:
                selected = train_d.feature_names
            model = train(train_d, spec_fold, selected)
            proba[r, test_rows] = model.predict_proba(d.X[test_rows])
            records.append(
                FoldRecord(
                    r,
                    k,
                    tuple(int(i) for i in train_rows),
                    tuple(int(i) for i in test_rows),
                    tuple(selected),
                    train_d.n_rows - train_rows.shape[0],
                )
            )
    return CvResult(proba, fold_of, tuple(records), d.feature_names)
