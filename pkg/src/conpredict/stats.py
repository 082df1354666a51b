"""Evaluation statistics: confusion measures, AUC, effort-aware metrics,
rank tests, effect sizes, permutation importance, and Scott-Knott grouping.

Everything here is a pure function; no external stats package is used, so
the exact tie handling and approximations are pinned down in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .learning.dataset import Dataset
from .learning.models import RandomForest, TrainedModel


# --------------------------------------------------------------------------
# Confusion-matrix measures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(
    probabilities: np.ndarray, labels: np.ndarray, threshold: float = 0.5
) -> ConfusionMatrix:
    prob = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    pred = prob >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
    )


def prf(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(precision, recall, F1); degenerate denominators yield 0."""
    p = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else 0.0
    r = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


# --------------------------------------------------------------------------
# Ranking metrics
# --------------------------------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    n = values.shape[0]
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def auc(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random faulty row outranks a random non-faulty row;
    ties count one half (rank / Mann-Whitney formulation)."""
    prob = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    m = int(np.sum(y == 1))
    n = int(np.sum(y == 0))
    if m == 0 or n == 0:
        raise ValueError("AUC needs both classes")
    ranks = _average_ranks(prob)
    r_pos = float(ranks[y == 1].sum())
    return (r_pos - m * (m + 1) / 2.0) / (m * n)


def _inspection_order(probabilities, nloc) -> np.ndarray:
    """Rows by predicted probability descending; ties by smaller nloc,
    then original index (stable)."""
    prob = np.asarray(probabilities, dtype=np.float64)
    loc = np.asarray(nloc, dtype=np.float64)
    idx = np.arange(prob.shape[0])
    return np.array(sorted(idx, key=lambda i: (-prob[i], loc[i], i)))


def pofb20(probabilities, nloc, bugs) -> float:
    """Fraction of bugs in the top-ranked functions totalling 20% of LOC;
    the function crossing the 20% boundary is counted in full."""
    loc = np.asarray(nloc, dtype=np.float64)
    bug = np.asarray(bugs, dtype=np.float64)
    total_loc = loc.sum()
    total_bugs = bug.sum()
    if total_loc <= 0 or total_bugs <= 0:
        raise ValueError("need positive total LOC and at least one bug")
    order = _inspection_order(probabilities, loc)
    budget = 0.2 * total_loc
    cum = 0.0
    found = 0.0
    for i in order:
        cum += loc[i]
        found += bug[i]
        if cum >= budget:
            break
    return found / total_bugs


def _effort_curve(order: np.ndarray, loc: np.ndarray, bug: np.ndarray):
    """Cumulative (LOC fraction, bug fraction) knots, starting at (0, 0)."""
    xs = [0.0]
    ys = [0.0]
    cl = 0.0
    cb = 0.0
    tl = loc.sum()
    tb = bug.sum()
    for i in order:
        cl += loc[i]
        cb += bug[i]
        xs.append(cl / tl)
        ys.append(cb / tb)
    return np.asarray(xs), np.asarray(ys)


def popt(probabilities, nloc, bugs) -> float:
    """1 - area between the optimal (density-ordered) and predicted
    cost-effectiveness curves, by trapezoid on the merged knot grid."""
    loc = np.asarray(nloc, dtype=np.float64)
    bug = np.asarray(bugs, dtype=np.float64)
    if loc.sum() <= 0 or bug.sum() <= 0:
        raise ValueError("need positive total LOC and at least one bug")
    idx = np.arange(loc.shape[0])
    opt_order = np.array(
        sorted(idx, key=lambda i: (-(bug[i] / loc[i]), loc[i], i))
    )
    pred_order = _inspection_order(probabilities, loc)
    ox, oy = _effort_curve(opt_order, loc, bug)
    px, py = _effort_curve(pred_order, loc, bug)
    grid = np.unique(np.concatenate([ox, px]))
    od = np.interp(grid, ox, oy)
    pd = np.interp(grid, px, py)
    delta = float(np.trapezoid(np.abs(od - pd), grid))
    return 1.0 - delta


# --------------------------------------------------------------------------
# Rank-sum test and Cliff's delta
# --------------------------------------------------------------------------


def _rank_sum_w(a: np.ndarray, b: np.ndarray) -> float:
    """Mann-Whitney W for sample a (ties counted one half)."""
    combined = np.concatenate([a, b])
    ranks = _average_ranks(combined)
    m = a.shape[0]
    r_a = float(ranks[:m].sum())
    return r_a - m * (m + 1) / 2.0


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _exact_p(a: np.ndarray, b: np.ndarray, w_obs: float, alternative: str) -> float:
    combined = np.concatenate([a, b])
    ranks = _average_ranks(combined)
    m = a.shape[0]
    n = b.shape[0]
    mn2 = m * n / 2.0
    total = 0
    hits = 0
    for pick in combinations(range(m + n), m):
        w = sum(ranks[i] for i in pick) - m * (m + 1) / 2.0
        total += 1
        if alternative == "greater":
            hits += w >= w_obs - 1e-12
        else:  # two-sided
            hits += abs(w - mn2) >= abs(w_obs - mn2) - 1e-12
    return hits / total


def wilcoxon_rank_sum(a, b, alternative: str = "greater") -> float:
    """Wilcoxon rank-sum (Mann-Whitney) p-value.

    `alternative="greater"` tests that a tends to exceed b.  Exact
    enumeration when m + n <= 12, otherwise a normal approximation with
    tie correction and continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a.shape[0], b.shape[0]
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    if alternative not in ("greater", "two-sided"):
        raise ValueError("alternative must be 'greater' or 'two-sided'")
    w = _rank_sum_w(a, b)
    if m + n <= 12:
        return _exact_p(a, b, w, alternative)
    N = m + n
    combined = np.concatenate([a, b])
    _, counts = np.unique(combined, return_counts=True)
    tie_term = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    mean = m * n / 2.0
    var = (m * n / 12.0) * ((N + 1) - tie_term / (N * (N - 1)))
    if var <= 0:
        return 1.0  # all values tied: no evidence either way
    if alternative == "greater":
        z = (w - mean - 0.5) / math.sqrt(var)
        return _normal_sf(z)
    z = (abs(w - mean) - 0.5) / math.sqrt(var)
    return 2.0 * _normal_sf(max(z, 0.0))


_MAGNITUDES = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


def magnitude_of(d: float) -> str:
    """Cliff's delta magnitude label; boundaries are closed on the left."""
    ad = abs(d)
    if ad < 0.147:
        return "negligible"
    if ad < 0.33:
        return "small"
    if ad < 0.474:
        return "medium"
    return "large"


@dataclass(frozen=True)
class EffectSize:
    d: float
    magnitude: str
    w: float
    m: int
    n: int
    p_value: float


def cliffs_delta(a, b) -> EffectSize:
    """Cliff's delta computed both via d = 2W/mn - 1 and by direct pair
    counting; the two paths must agree to 1e-12."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = a.shape[0], b.shape[0]
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    w = _rank_sum_w(a, b)
    d_rank = 2.0 * w / (m * n) - 1.0
    gt = float(np.sum(a[:, None] > b[None, :]))
    lt = float(np.sum(a[:, None] < b[None, :]))
    d_pairs = (gt - lt) / (m * n)
    if abs(d_rank - d_pairs) > 1e-12:
        raise AssertionError(
            f"Cliff's delta paths disagree: {d_rank!r} vs {d_pairs!r}"
        )
    p = wilcoxon_rank_sum(a, b, alternative="two-sided")
    return EffectSize(d_pairs, magnitude_of(d_pairs), w, m, n, p)


# --------------------------------------------------------------------------
# Permutation importance, Scott-Knott, feature effect
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ImportanceScores:
    feature_names: tuple[str, ...]
    values: np.ndarray  # per-feature mean OOB accuracy drop

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.values.tolist()))


def permutation_importance(
    model: TrainedModel, d: Dataset, seed: int
) -> ImportanceScores:
    """Breiman-style importance: per tree, the out-of-bag accuracy drop
    when one feature column is permuted, averaged over trees."""
    if not isinstance(model.model, RandomForest):
        raise ValueError("permutation importance requires a random forest")
    rf: RandomForest = model.model
    cols = [model.feature_names.index(f) for f in model.selected]
    X = np.ascontiguousarray(d.X[:, cols], dtype=np.float64)
    y = d.y
    p = X.shape[1]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    drops = np.zeros(p, dtype=np.float64)
    n_used = 0
    for t in range(rf.n_trees):
        oob = ~rf.inbag[t]
        if not oob.any():
            continue
        n_used += 1
        Xo = X[oob]
        yo = y[oob]
        base_pred = rf.tree_predict(t, Xo) >= 0.5
        base_acc = float(np.mean(base_pred == (yo == 1)))
        for j in range(p):
            perm = rng.permutation(Xo.shape[0])
            Xp = Xo.copy()
            Xp[:, j] = Xo[perm, j]
            pred = rf.tree_predict(t, Xp) >= 0.5
            acc = float(np.mean(pred == (yo == 1)))
            drops[j] += base_acc - acc
    if n_used == 0:
        raise ValueError("no tree has out-of-bag rows")
    drops /= n_used
    full = np.zeros(len(model.feature_names), dtype=np.float64)
    for j, f in enumerate(model.selected):
        full[model.feature_names.index(f)] = drops[j]
    return ImportanceScores(tuple(model.feature_names), full)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta function."""
    max_iter = 200
    eps = 3e-14
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    dd = 1.0 - qab * x / qap
    if abs(dd) < fpmin:
        dd = fpmin
    dd = 1.0 / dd
    h = dd
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < fpmin:
            dd = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        dd = 1.0 / dd
        h *= dd * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < fpmin:
            dd = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_sf(f_stat: float, d1: float, d2: float) -> float:
    """Survival function of the F distribution."""
    if f_stat <= 0:
        return 1.0
    x = d2 / (d2 + d1 * f_stat)
    return _betainc(d2 / 2.0, d1 / 2.0, x)


def _anova_p(groups: list[np.ndarray]) -> float:
    """One-way F-test p-value across the given groups."""
    k = len(groups)
    all_vals = np.concatenate(groups)
    N = all_vals.shape[0]
    if k < 2 or N <= k:
        return 1.0
    grand = all_vals.mean()
    ss_between = sum(g.shape[0] * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(float(((g - g.mean()) ** 2).sum()) for g in groups)
    d1 = k - 1
    d2 = N - k
    if ss_within <= 0:
        return 0.0 if ss_between > 0 else 1.0
    f_stat = (ss_between / d1) / (ss_within / d2)
    return f_sf(f_stat, d1, d2)


@dataclass(frozen=True)
class ScottKnottGroups:
    """Ordered partition of features into statistically distinct groups."""

    groups: tuple[tuple[str, ...], ...]  # rank 1 first (highest mean)
    rank_of: dict  # feature -> group rank (1-based)
    rank_mean: dict  # feature -> mean per-run importance rank
    rank_highest: dict  # feature -> best (smallest) per-run rank
    rank_lowest: dict  # feature -> worst (largest) per-run rank


def scott_knott(samples: dict, alpha: float = 0.05) -> ScottKnottGroups:
    """Scott-Knott clustering of features by their importance samples.

    `samples` maps feature name -> 1-D array of importance values over
    runs.  Features are ordered by mean; the recursion splits at the
    point maximizing the between-group sum of squares of feature means,
    keeping a split only when a one-way F-test over the two groups'
    observations is significant at `alpha`.
    """
    names = sorted(samples, key=lambda f: (-float(np.mean(samples[f])), f))
    if not names:
        raise ValueError("no features given")
    runs = np.asarray([np.asarray(samples[f], dtype=np.float64) for f in names])
    if runs.ndim != 2:
        raise ValueError("all features need the same number of runs")
    means = runs.mean(axis=1)

    groups: list[tuple[str, ...]] = []

    def recurse(lo: int, hi: int):
        k = hi - lo
        if k <= 1:
            groups.append(tuple(names[lo:hi]))
            return
        seg = means[lo:hi]
        best_cut = -1
        best_ss = -1.0
        for cut in range(1, k):
            left = seg[:cut]
            right = seg[cut:]
            grand = seg.mean()
            ss = cut * (left.mean() - grand) ** 2 + (k - cut) * (
                right.mean() - grand
            ) ** 2
            if ss > best_ss:
                best_ss = ss
                best_cut = cut
        left_obs = runs[lo : lo + best_cut].ravel()
        right_obs = runs[lo + best_cut : hi].ravel()
        if _anova_p([left_obs, right_obs]) <= alpha:
            recurse(lo, lo + best_cut)
            recurse(lo + best_cut, hi)
        else:
            groups.append(tuple(names[lo:hi]))

    recurse(0, len(names))

    rank_of = {}
    for gi, group in enumerate(groups, start=1):
        for f in group:
            rank_of[f] = gi

    # Per-run importance ranks (1 = most important).
    n_runs = runs.shape[1]
    per_run_ranks = np.empty_like(runs)
    for r in range(n_runs):
        col = runs[:, r]
        ranks = _average_ranks(-col)
        per_run_ranks[:, r] = ranks
    rank_mean = {f: float(per_run_ranks[i].mean()) for i, f in enumerate(names)}
    rank_highest = {f: float(per_run_ranks[i].min()) for i, f in enumerate(names)}
    rank_lowest = {f: float(per_run_ranks[i].max()) for i, f in enumerate(names)}
    return ScottKnottGroups(tuple(groups), rank_of, rank_mean, rank_highest, rank_lowest)


def feature_effect(d: Dataset, feature: str) -> tuple[float, EffectSize, str]:
    """Mann-Whitney comparison of a feature between classes.

    Returns (p-value, effect size, direction); direction is "+" when the
    faulty median is higher with p < 0.01 and at least a small effect,
    "-" for the symmetric case, "" otherwise.
    """
    j = d.feature_names.index(feature)
    a = d.X[d.y == 1, j]
    b = d.X[d.y == 0, j]
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("feature effect needs both classes")
    eff = cliffs_delta(a, b)
    p = eff.p_value
    direction = ""
    if p < 0.01 and abs(eff.d) >= 0.147:
        if np.median(a) > np.median(b):
            direction = "+"
        elif np.median(a) < np.median(b):
            direction = "-"
    return p, eff, direction
