"""Compiled kernels for fitting and evaluating bagged decision trees.

Determinism contract (relied on by the reproducibility tests):

* all randomness comes from a splitmix64 stream; tree t's stream is derived
  from the master seed and t only, so trees are independent of fit order;
* candidate split thresholds are midpoints between consecutive distinct
  sorted feature values;
* features are scanned in ascending index order and thresholds in ascending
  value order, with strictly-better improvement required to replace the
  current best, so ties resolve to the lowest feature index, then the lowest
  threshold;
* when the sampled feature subset yields no improving split, remaining
  features are scanned in ascending order and the first improving one is
  taken (keeps full-depth trees exact on distinct training points).

Node arrays use feature = -1 for leaves; `value` holds the leaf mean for
regression and the leaf majority vote (0 or 1, ties to 0) for classification.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _mix64(state):
    state = state + _GOLD
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _rand_below(state, k):
    state, z = _mix64(state)
    return state, np.int64(z % np.uint64(k))


@njit(cache=True)
def _isort(a, lo, hi):
    for i in range(lo + 1, hi):
        key = a[i]
        j = i - 1
        while j >= lo and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


@njit(cache=True)
def _side_score(s1, s2, m, is_gini):
    # impurity mass of one side: SSE for regression, m * gini for 0/1 labels
    if is_gini:
        return 2.0 * (s1 - s1 * s1 / m)
    return s2 - s1 * s1 / m


@njit(cache=True)
def _best_split_on_feature(
    X, y, idx, lo, hi, f, min_leaf, parent_score, tot1, tot2, is_gini, anchor, vbuf, ybuf
):
    # targets are shifted by the node anchor (regression only); impurity is
    # shift-invariant and the shift keeps constant nodes exactly pure
    m = hi - lo
    for k in range(m):
        vbuf[k] = X[idx[lo + k], f]
        ybuf[k] = y[idx[lo + k]] - anchor
    order = np.argsort(vbuf[:m])
    best_improve = 0.0
    best_thr = 0.0
    s1 = 0.0
    s2 = 0.0
    for k in range(m - 1):
        o = order[k]
        yy = ybuf[o]
        s1 += yy
        s2 += yy * yy
        v = vbuf[o]
        vn = vbuf[order[k + 1]]
        if vn <= v:
            continue
        m_left = k + 1
        m_right = m - m_left
        if m_left < min_leaf or m_right < min_leaf:
            continue
        score = _side_score(s1, s2, m_left, is_gini) + _side_score(
            tot1 - s1, tot2 - s2, m_right, is_gini
        )
        improve = parent_score - score
        if improve > best_improve:
            best_improve = improve
            best_thr = 0.5 * (v + vn)
    return best_improve, best_thr


@njit(cache=True)
def _build_tree(
    X, y, sample_idx, mtry, min_leaf, is_gini, state, feature, threshold, left, right, value
):
    m0 = sample_idx.shape[0]
    d = X.shape[1]
    idx = sample_idx.copy()
    tmp = np.empty(m0, dtype=np.int64)
    vbuf = np.empty(m0, dtype=np.float64)
    ybuf = np.empty(m0, dtype=np.float64)
    feat_perm = np.empty(d, dtype=np.int64)

    cap = 2 * m0 + 2
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        nid = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        m = hi - lo

        anchor = 0.0 if is_gini else y[idx[lo]]
        tot1 = 0.0
        tot2 = 0.0
        for k in range(lo, hi):
            yy = y[idx[k]] - anchor
            tot1 += yy
            tot2 += yy * yy
        parent_score = _side_score(tot1, tot2, m, is_gini)

        feature[nid] = -1
        if is_gini:
            value[nid] = 1.0 if tot1 / m > 0.5 else 0.0
        else:
            value[nid] = anchor + tot1 / m
        if m < 2 * min_leaf or parent_score <= 0.0:
            continue

        # sample mtry features without replacement, then scan the subset in
        # ascending index order; the tail holds the unsampled features
        for i in range(d):
            feat_perm[i] = i
        for i in range(mtry):
            state, r = _rand_below(state, d - i)
            j = i + r
            t = feat_perm[i]
            feat_perm[i] = feat_perm[j]
            feat_perm[j] = t
        _isort(feat_perm, 0, mtry)
        _isort(feat_perm, mtry, d)

        best_improve = 0.0
        best_f = -1
        best_thr = 0.0
        for ii in range(mtry):
            f = feat_perm[ii]
            improve, thr = _best_split_on_feature(
                X, y, idx, lo, hi, f, min_leaf, parent_score, tot1, tot2, is_gini, anchor,
                vbuf, ybuf
            )
            if improve > best_improve:
                best_improve = improve
                best_f = f
                best_thr = thr
        if best_f < 0:
            for ii in range(mtry, d):
                f = feat_perm[ii]
                improve, thr = _best_split_on_feature(
                    X, y, idx, lo, hi, f, min_leaf, parent_score, tot1, tot2, is_gini, anchor,
                    vbuf, ybuf
                )
                if improve > 0.0:
                    best_improve = improve
                    best_f = f
                    best_thr = thr
                    break
        if best_f < 0:
            continue

        # stable partition of idx[lo:hi] around the threshold
        p = 0
        for k in range(lo, hi):
            tmp[p] = idx[k]
            p += 1
        w = lo
        for k in range(m):
            if X[tmp[k], best_f] <= best_thr:
                idx[w] = tmp[k]
                w += 1
        mid = w
        for k in range(m):
            if X[tmp[k], best_f] > best_thr:
                idx[w] = tmp[k]
                w += 1

        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        feature[nid] = best_f
        threshold[nid] = best_thr
        left[nid] = lchild
        right[nid] = rchild
        stack_node[sp] = rchild
        stack_lo[sp] = mid
        stack_hi[sp] = hi
        sp += 1
        stack_node[sp] = lchild
        stack_lo[sp] = lo
        stack_hi[sp] = mid
        sp += 1

    return n_nodes, state


@njit(cache=True)
def fit_forest(X, y, n_trees, mtry, min_leaf, bootstrap, is_gini, seed):
    n = X.shape[0]
    cap = 2 * n + 2
    feature = np.full((n_trees, cap), -1, dtype=np.int32)
    threshold = np.zeros((n_trees, cap), dtype=np.float64)
    left = np.full((n_trees, cap), -1, dtype=np.int32)
    right = np.full((n_trees, cap), -1, dtype=np.int32)
    value = np.zeros((n_trees, cap), dtype=np.float64)
    n_nodes = np.zeros(n_trees, dtype=np.int32)

    for t in range(n_trees):
        state = np.uint64(seed) + np.uint64(t + 1) * _GOLD
        state, _ = _mix64(state)
        if bootstrap:
            sidx = np.empty(n, dtype=np.int64)
            for i in range(n):
                state, r = _rand_below(state, n)
                sidx[i] = r
        else:
            sidx = np.arange(n)
        nn, state = _build_tree(
            X,
            y,
            sidx,
            mtry,
            min_leaf,
            is_gini,
            state,
            feature[t],
            threshold[t],
            left[t],
            right[t],
            value[t],
        )
        n_nodes[t] = nn

    return feature, threshold, left, right, value, n_nodes


@njit(cache=True)
def predict_trees(feature, threshold, left, right, value, X):
    n_trees = feature.shape[0]
    m = X.shape[0]
    out = np.empty((n_trees, m), dtype=np.float64)
    for t in range(n_trees):
        for i in range(m):
            nid = 0
            while feature[t, nid] >= 0:
                if X[i, feature[t, nid]] <= threshold[t, nid]:
                    nid = left[t, nid]
                else:
                    nid = right[t, nid]
            out[t, i] = value[t, nid]
    return out
