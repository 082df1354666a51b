"""Wrapper feature selection: best-first search over feature subsets."""

from __future__ import annotations

import heapq

import numpy as np

from .dataset import Dataset
from .models import ClassifierSpec, _make


def f1_faulty(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 of the faulty (1) class; 0 when precision + recall is 0."""
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    if tp == 0:
        return 0.0
    p = tp / (tp + fp)
    r = tp / (tp + fn)
    return 2.0 * p * r / (p + r)


def stratified_folds(
    y: np.ndarray,
    n_folds: int,
    rng: np.random.Generator,
    groups: np.ndarray | None = None,
):
    """Fold index per row; per-class round-robin after a shuffle.

    With `groups`, all rows sharing a group id are assigned to the same
    fold (used to keep SMOTE-synthetic rows with the original row they
    were interpolated from, so copies never leak across folds).
    """
    n = y.shape[0]
    assign = np.empty(n, dtype=np.int64)
    if groups is None:
        groups = np.arange(n, dtype=np.int64)
    uniq, inverse = np.unique(groups, return_inverse=True)
    first = np.full(uniq.shape[0], -1, dtype=np.int64)
    for i in range(n):
        if first[inverse[i]] < 0:
            first[inverse[i]] = i
    gy = y[first]
    gassign = np.empty(uniq.shape[0], dtype=np.int64)
    offset = 0
    for c in (0, 1):
        gs = np.flatnonzero(gy == c)
        gs = gs[rng.permutation(gs.shape[0])]
        for i, g in enumerate(gs):
            gassign[g] = (i + offset) % n_folds
        # stagger classes so fold sizes stay balanced
        offset += gs.shape[0] % n_folds
    for i in range(n):
        assign[i] = gassign[inverse[i]]
    return assign


def _cv_f1(X, y, spec: ClassifierSpec, folds: np.ndarray, n_folds: int,
           score_rows: np.ndarray) -> float:
    preds = np.empty(y.shape[0], dtype=np.int64)
    for k in range(n_folds):
        test = folds == k
        train = ~test
        if len(set(y[train].tolist())) < 2:
            preds[test] = 0
            continue
        model = _make(spec).fit(X[train], y[train], seed=spec.seed + k)
        preds[test] = (model.predict_proba(X[test]) >= 0.5).astype(np.int64)
    return f1_faulty(y[score_rows], preds[score_rows])


def wrapper_select(
    d: Dataset,
    spec: ClassifierSpec,
    seed: int,
    patience: int = 5,
    internal_folds: int = 5,
    score_rows: np.ndarray | None = None,
    groups: np.ndarray | None = None,
) -> tuple[str, ...]:
    """Best-first subset search scored by internal cross-validated F1.

    Starts from the empty set; neighbors are single-feature adds/removes.
    Stops after `patience` consecutive node expansions that fail to improve
    the best score.  Ties prefer smaller subsets, then lexicographic order.

    `score_rows` restricts F1 scoring to the given rows (all rows still
    train); callers pass the non-synthetic rows of a SMOTE-resampled
    dataset so oversampled copies never score themselves.
    """
    pos, neg = d.class_counts()
    if pos == 0 or neg == 0:
        raise ValueError("wrapper selection needs both classes")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    folds = stratified_folds(d.y, internal_folds, rng, groups)
    names = d.feature_names
    name_idx = {n: i for i, n in enumerate(names)}
    if score_rows is None:
        score_rows = np.arange(d.n_rows, dtype=np.int64)

    scores: dict[frozenset, float] = {}

    def evaluate(subset: frozenset) -> float:
        if subset in scores:
            return scores[subset]
        cols = sorted(name_idx[n] for n in subset)
        s = _cv_f1(d.X[:, cols], d.y, spec, folds, internal_folds, score_rows)
        scores[subset] = s
        return s

    def rank_key(subset: frozenset, score: float):
        return (-score, len(subset), tuple(sorted(subset)))

    start = frozenset()
    best = start
    best_score = evaluate(start)
    open_heap = [(rank_key(start, best_score), start)]
    expanded: set[frozenset] = set()
    stale = 0

    while open_heap and stale < patience:
        _, node = heapq.heappop(open_heap)
        if node in expanded:
            continue
        expanded.add(node)
        improved = False
        neighbors = [node | {n} for n in names if n not in node]
        neighbors += [node - {n} for n in node]
        for nb in neighbors:
            if nb in scores:
                continue
            s = evaluate(nb)
            heapq.heappush(open_heap, (rank_key(nb, s), nb))
            if rank_key(nb, s) < rank_key(best, best_score):
                if s > best_score:
                    improved = True
                best, best_score = nb, s
        stale = 0 if improved else stale + 1

    return tuple(sorted(best))
