"""Hot numeric kernels for tree growing and prediction.

Every kernel is written as plain numpy code that numba can compile in
nopython mode.  By default the functions are JIT-compiled; setting the
environment variable ``CONPREDICT_PURE_NUMPY=1`` before import selects the
uncompiled numpy path instead (same code, same results, slower).  The
``benchmarks/`` directory compares the two paths.

The RNG is a hand-rolled splitmix64 so that the compiled and fallback
paths produce bit-identical streams.
"""

from __future__ import annotations

import os

import numpy as np

PURE_NUMPY = os.environ.get("CONPREDICT_PURE_NUMPY", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

if PURE_NUMPY:

    def _jit(func):
        return func

else:
    from numba import njit

    def _jit(func):
        return njit(cache=True)(func)


_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_LEAF = -1


@_jit
def rng_next(state):
    """Advance a 1-element uint64 state array; return the next uint64."""
    state[0] = state[0] + _GAMMA
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


@_jit
def rng_below(state, n):
    """Uniform integer in [0, n)."""
    return np.int64(rng_next(state) % np.uint64(n))


@_jit
def rng_uniform(state):
    """Uniform float64 in [0, 1)."""
    return np.float64(rng_next(state) >> np.uint64(11)) * (2.0 ** -53)


@_jit
def bootstrap_sample(state, n):
    """n draws with replacement plus an in-bag mask."""
    idx = np.empty(n, dtype=np.int64)
    inbag = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        j = rng_below(state, n)
        idx[i] = j
        inbag[j] = True
    return idx, inbag


@_jit
def _entropy2(pos, total):
    if total <= 0.0:
        return 0.0
    p = pos / total
    h = 0.0
    if p > 0.0:
        h -= p * np.log2(p)
    if p < 1.0:
        h -= (1.0 - p) * np.log2(1.0 - p)
    return h


@_jit
def _xlog2x_table(n):
    """lut[i] = i * log2(i), so n_c * H(class counts) is three lookups."""
    lut = np.zeros(n + 1, dtype=np.float64)
    for i in range(2, n + 1):
        lut[i] = i * np.log2(i)
    return lut


@_jit
def _grow_into(
    X,
    y,
    n,
    min_leaf,
    mtry,
    state,
    lut,
    feat,
    thr,
    left,
    right,
    prob,
    sorted_idx,
    stack_node,
    stack_lo,
    stack_hi,
    featpool,
    scratch,
):
    """Grow one tree into preallocated node arrays.

    The caller fills ``sorted_idx[f, :n]`` with the tree's row ids (with
    bootstrap multiplicity) ordered by feature f.  Node ranges stay sorted
    through stable partitioning, so split search is a single pass per
    feature.  Returns the number of nodes written.
    """
    p = X.shape[1]
    feat[0] = _LEAF
    left[0] = _LEAF
    right[0] = _LEAF
    n_nodes = 1
    if n == 0:
        prob[0] = 0.0
        return 1

    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n

    while top >= 0:
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        top -= 1
        feat[node] = _LEAF
        left[node] = _LEAF
        right[node] = _LEAF
        m = hi - lo
        pos = 0
        for i in range(lo, hi):
            pos += np.int64(y[sorted_idx[0, i]])
        prob[node] = pos / m
        if pos == 0 or pos == m or m < 2 * min_leaf:
            continue

        for j in range(p):
            featpool[j] = j
        k = mtry if mtry < p else p
        if k <= 0:
            continue
        # Partial Fisher-Yates for the feature draw.
        for j in range(k):
            r = j + rng_below(state, p - j)
            tmp = featpool[j]
            featpool[j] = featpool[r]
            featpool[r] = tmp

        # Costs are m_c * H(counts) = lut[m_c] - lut[pos_c] - lut[neg_c].
        parent_cost = lut[m] - lut[pos] - lut[m - pos]
        mf = np.float64(m)
        best_ratio = -1.0
        best_feat = -1
        best_thr = 0.0
        best_nl = 0
        best_posleft = 0
        for j in range(k):
            f = featpool[j]
            pos_left = 0
            for i in range(m - 1):
                row = sorted_idx[f, lo + i]
                pos_left += np.int64(y[row])
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                v0 = X[row, f]
                v1 = X[sorted_idx[f, lo + i + 1], f]
                if v0 == v1:
                    continue
                child_cost = (
                    lut[nl]
                    - lut[pos_left]
                    - lut[nl - pos_left]
                    + lut[nr]
                    - lut[pos - pos_left]
                    - lut[nr - (pos - pos_left)]
                )
                gain_m = parent_cost - child_cost  # m * info gain
                if gain_m <= 1e-12 * mf:
                    continue
                split_info_m = lut[m] - lut[nl] - lut[nr]
                ratio = gain_m / split_info_m
                if ratio > best_ratio:
                    best_ratio = ratio
                    best_feat = f
                    best_thr = 0.5 * (v0 + v1)
                    best_nl = nl
                    best_posleft = pos_left
        if best_feat < 0:
            continue

        nl = best_nl
        pos_right = pos - best_posleft
        nr = m - nl
        if (best_posleft == 0 or best_posleft == nl) and (
            pos_right == 0 or pos_right == nr
        ):
            # Both children are pure: emit leaves directly, no partition.
            feat[node] = best_feat
            thr[node] = best_thr
            lid = n_nodes
            rid = n_nodes + 1
            n_nodes += 2
            left[node] = lid
            right[node] = rid
            feat[lid] = _LEAF
            left[lid] = _LEAF
            right[lid] = _LEAF
            prob[lid] = best_posleft / nl
            feat[rid] = _LEAF
            left[rid] = _LEAF
            right[rid] = _LEAF
            prob[rid] = pos_right / nr
            continue

        # Stable partition of every feature's range by the chosen split.
        for f in range(p):
            a = 0
            b = nl
            for i in range(lo, hi):
                row = sorted_idx[f, i]
                if X[row, best_feat] <= best_thr:
                    scratch[a] = row
                    a += 1
                else:
                    scratch[b] = row
                    b += 1
            for i in range(m):
                sorted_idx[f, lo + i] = scratch[i]

        feat[node] = best_feat
        thr[node] = best_thr
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        top += 1
        stack_node[top] = lid
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
        stack_node[top] = rid
        stack_lo[top] = lo + nl
        stack_hi[top] = hi

    return n_nodes


@_jit
def grow_tree(X, y, min_leaf, mtry, state):
    """Grow a single gain-ratio decision tree (no pruning).

    X is (n, p) float64, y is float64 in {0, 1}.  mtry features are drawn
    without replacement at every split; mtry >= p disables subsampling.
    Returns parallel node arrays (feature, threshold, left, right, prob);
    feature == -1 marks a leaf.
    """
    n, p = X.shape
    max_nodes = 2 * n + 1
    feat = np.full(max_nodes, _LEAF, dtype=np.int64)
    thr = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, _LEAF, dtype=np.int64)
    right = np.full(max_nodes, _LEAF, dtype=np.int64)
    prob = np.zeros(max_nodes, dtype=np.float64)
    if n == 0 or p == 0:
        prob[0] = y.sum() / n if n > 0 else 0.0
        n_nodes = 1
    else:
        sorted_idx = np.empty((p, n), dtype=np.int64)
        for f in range(p):
            order = np.argsort(X[:, f], kind="mergesort")
            for i in range(n):
                sorted_idx[f, i] = order[i]
        stack_node = np.empty(max_nodes, dtype=np.int64)
        stack_lo = np.empty(max_nodes, dtype=np.int64)
        stack_hi = np.empty(max_nodes, dtype=np.int64)
        featpool = np.empty(p, dtype=np.int64)
        scratch = np.empty(n, dtype=np.int64)
        lut = _xlog2x_table(n)
        n_nodes = _grow_into(
            X, y, n, min_leaf, mtry, state, lut,
            feat, thr, left, right, prob,
            sorted_idx, stack_node, stack_lo, stack_hi,
            featpool, scratch,
        )
    return (
        feat[:n_nodes].copy(),
        thr[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        prob[:n_nodes].copy(),
    )


@_jit
def grow_forest(X, y, n_trees, min_leaf, mtry, state):
    """Grow a bagged forest in one call.

    Each feature column is argsorted once for the whole forest; every
    tree's bootstrap ordering is then rebuilt in O(n) per feature by
    walking the global order and emitting each row with its bootstrap
    multiplicity.  Returns (feat, thr, left, right, prob) as
    (n_trees, max_nodes) arrays, per-tree node counts, and the
    (n_trees, n) in-bag mask.
    """
    n, p = X.shape
    max_nodes = 2 * n + 1
    feat = np.full((n_trees, max_nodes), _LEAF, dtype=np.int64)
    thr = np.zeros((n_trees, max_nodes), dtype=np.float64)
    left = np.full((n_trees, max_nodes), _LEAF, dtype=np.int64)
    right = np.full((n_trees, max_nodes), _LEAF, dtype=np.int64)
    prob = np.zeros((n_trees, max_nodes), dtype=np.float64)
    counts = np.empty(n_trees, dtype=np.int64)
    inbag = np.zeros((n_trees, n), dtype=np.bool_)

    base_order = np.empty((p, n), dtype=np.int64)
    for f in range(p):
        order = np.argsort(X[:, f], kind="mergesort")
        for i in range(n):
            base_order[f, i] = order[i]

    sorted_idx = np.empty((p, n), dtype=np.int64)
    stack_node = np.empty(max_nodes, dtype=np.int64)
    stack_lo = np.empty(max_nodes, dtype=np.int64)
    stack_hi = np.empty(max_nodes, dtype=np.int64)
    featpool = np.empty(p, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    mult = np.empty(n, dtype=np.int64)
    lut = _xlog2x_table(n)

    for t in range(n_trees):
        for i in range(n):
            mult[i] = 0
        ysum = 0.0
        for i in range(n):
            j = rng_below(state, n)
            mult[j] += 1
            inbag[t, j] = True
            ysum += y[j]
        if p == 0:
            prob[t, 0] = ysum / n if n > 0 else 0.0
            counts[t] = 1
            continue
        for f in range(p):
            k = 0
            for i in range(n):
                row = base_order[f, i]
                for _ in range(mult[row]):
                    sorted_idx[f, k] = row
                    k += 1
        counts[t] = _grow_into(
            X, y, n, min_leaf, mtry, state, lut,
            feat[t], thr[t], left[t], right[t], prob[t],
            sorted_idx, stack_node, stack_lo, stack_hi,
            featpool, scratch,
        )
    return feat, thr, left, right, prob, counts, inbag


@_jit
def predict_forest(feat, thr, left, right, prob, X):
    """Fraction of trees voting faulty (leaf probability >= 0.5) per row."""
    n_trees = feat.shape[0]
    n = X.shape[0]
    votes = np.zeros(n, dtype=np.float64)
    for t in range(n_trees):
        for i in range(n):
            node = 0
            while feat[t, node] >= 0:
                if X[i, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            if prob[t, node] >= 0.5:
                votes[i] += 1.0
    return votes / n_trees


@_jit
def predict_tree(feat, thr, left, right, prob, X):
    """Leaf probability of the positive class for every row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = prob[node]
    return out


def warmup():
    """Trigger JIT compilation on a tiny input (no-op on the numpy path)."""
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    state = np.array([42], dtype=np.uint64)
    tree = grow_tree(X, y, 1, 2, state)
    predict_tree(*tree, X)
    forest = grow_forest(X, y, 3, 1, 2, state)
    predict_forest(*forest[:5], X)
    bootstrap_sample(state, 4)
    rng_uniform(state)
