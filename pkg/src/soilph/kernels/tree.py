"""CART regression-tree growth and traversal.

A tree is six parallel arrays indexed by node id (nodes numbered in
depth-first preorder, left child first):

    feature    split column, -1 for leaves
    threshold  go left when x[feature] <= threshold
    left/right child ids, -1 for leaves
    value      mean training target routed to the node
    n_samples  training rows routed to the node

Split choice maximises the weighted variance reduction.  With centered
targets ``c`` and a left child holding ``n_l`` of ``n`` rows, the reduction
is ``S_l**2 * n / (n_l * n_r)`` where ``S_l`` is the left sum of ``c``.
Within a feature the first (lowest-threshold) maximum wins; across
features a later feature must beat the incumbent by a relative margin, so
ties go to the lower feature index.
"""
import numpy as np

from .._accel import USE_NUMBA, njit

# relative slack when comparing split scores; keeps tie-breaks stable under
# last-bit rounding differences
_TIE_RTOL = 1e-12


@njit
def _best_split_nb(X, y, idx, features, min_leaf):
    n = idx.shape[0]
    mean = 0.0
    for t in range(n):
        mean += y[idx[t]]
    mean /= n
    best_score = -1.0
    best_f = -1
    best_thr = 0.0
    xs = np.empty(n)
    for fi in range(features.shape[0]):
        f = features[fi]
        for t in range(n):
            xs[t] = X[idx[t], f]
        order = np.argsort(xs, kind="mergesort")
        s_left = 0.0
        f_score = -np.inf
        f_pos = -1
        for t in range(n - 1):
            s_left += y[idx[order[t]]] - mean
            n_l = t + 1
            n_r = n - n_l
            if n_l < min_leaf or n_r < min_leaf:
                continue
            if xs[order[t + 1]] <= xs[order[t]]:
                continue
            score = s_left * s_left * n / (n_l * n_r)
            if score > f_score:
                f_score = score
                f_pos = t
        if f_pos >= 0 and f_score > best_score * (1.0 + _TIE_RTOL) and f_score > best_score:
            best_score = f_score
            best_f = f
            x_lo = xs[order[f_pos]]
            x_hi = xs[order[f_pos + 1]]
            thr = (x_lo + x_hi) * 0.5
            if thr >= x_hi:
                thr = x_lo
            best_thr = thr
    return best_f, best_thr, mean


@njit
def _grow_nb(X, y, max_depth, min_split, min_leaf, n_feat, fkeys):
    n, p = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    n_samples = np.zeros(cap, dtype=np.int64)

    perm = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    all_features = np.arange(p)
    # stack rows: start, end, depth, parent, is_left
    stack = np.empty((cap, 5), dtype=np.int64)
    sp = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    sp = 1
    n_nodes = 0
    while sp > 0:
        sp -= 1
        start = stack[sp, 0]
        end = stack[sp, 1]
        depth = stack[sp, 2]
        parent = stack[sp, 3]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if stack[sp, 4] == 1:
                left[parent] = node
            else:
                right[parent] = node
        idx = perm[start:end]
        m = end - start
        n_samples[node] = m

        y_lo = y[idx[0]]
        y_hi = y_lo
        for t in range(1, m):
            v = y[idx[t]]
            if v < y_lo:
                y_lo = v
            if v > y_hi:
                y_hi = v
        can_split = (m >= min_split and m >= 2 * min_leaf and y_hi > y_lo
                     and (max_depth < 0 or depth < max_depth))
        if n_feat < p:
            features = np.sort(np.argsort(fkeys[node], kind="mergesort")[:n_feat])
        else:
            features = all_features
        if can_split:
            f, thr, mean = _best_split_nb(X, y, idx, features, min_leaf)
        else:
            f = -1
            thr = 0.0
            mean = 0.0
            for t in range(m):
                mean += y[idx[t]]
            mean /= m
        value[node] = mean
        if f < 0:
            continue
        feature[node] = f
        threshold[node] = thr
        # stable partition of the segment
        n_l = 0
        for t in range(m):
            if X[idx[t], f] <= thr:
                buf[n_l] = idx[t]
                n_l += 1
        k = n_l
        for t in range(m):
            if X[idx[t], f] > thr:
                buf[k] = idx[t]
                k += 1
        for t in range(m):
            perm[start + t] = buf[t]
        # right pushed first so the left subtree is numbered first
        stack[sp, 0] = start + n_l
        stack[sp, 1] = end
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 0
        sp += 1
        stack[sp, 0] = start
        stack[sp, 1] = start + n_l
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 1
        sp += 1
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_samples[:n_nodes].copy())


def _best_split_np(X, y, idx, features, min_leaf):
    n = idx.size
    ys = y[idx]
    mean = ys.sum() / n
    best_score, best_f, best_thr = -1.0, -1, 0.0
    n_l = np.arange(1, n)
    n_r = n - n_l
    size_ok = (n_l >= min_leaf) & (n_r >= min_leaf)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="mergesort")
        xo = xs[order]
        s_left = np.cumsum(ys[order] - mean)[:-1]
        ok = size_ok & (xo[1:] > xo[:-1])
        if not ok.any():
            continue
        score = np.where(ok, s_left * s_left * n / (n_l * n_r), -np.inf)
        t = int(np.argmax(score))
        if score[t] > best_score * (1.0 + _TIE_RTOL) and score[t] > best_score:
            best_score = score[t]
            best_f = int(f)
            thr = (xo[t] + xo[t + 1]) * 0.5
            best_thr = xo[t] if thr >= xo[t + 1] else thr
    return best_f, best_thr, mean


def _grow_np(X, y, max_depth, min_split, min_leaf, n_feat, fkeys):
    n, p = X.shape
    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []
    all_features = np.arange(p)
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (value, 0.0), (n_samples, idx.size)):
            arr.append(v)
        ys = y[idx]
        can_split = (idx.size >= min_split and idx.size >= 2 * min_leaf
                     and ys.max() > ys.min()
                     and (max_depth < 0 or depth < max_depth))
        if n_feat < p:
            features = np.sort(np.argsort(fkeys[node], kind="mergesort")[:n_feat])
        else:
            features = all_features
        f = -1
        if can_split:
            f, thr, mean = _best_split_np(X, y, idx, features, min_leaf)
        else:
            mean = ys.sum() / idx.size
        value[node] = mean
        if f < 0:
            continue
        feature[node] = f
        threshold[node] = thr
        go_left = X[idx, f] <= thr
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))
    return (np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64), np.array(n_samples, dtype=np.int64))


def grow_tree(X, y, max_depth=-1, min_samples_split=2, min_samples_leaf=1,
              n_features=None, feature_keys=None, use_numba=None):
    """Grow one CART tree; returns the six node arrays described above.

    ``feature_keys`` (shape ``(2n+1, p)``) drives per-node feature
    subsampling: node ``t`` considers the ``n_features`` columns with the
    smallest keys in row ``t``.  It is ignored when all features are used.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot grow a tree on zero rows")
    n_features = p if n_features is None else int(n_features)
    if feature_keys is None or n_features >= p:
        feature_keys = np.zeros((0, p))
        n_features = p
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = _grow_nb if use_numba else _grow_np
    return fn(X, y, int(max_depth), int(min_samples_split), int(min_samples_leaf),
              n_features, np.ascontiguousarray(feature_keys, dtype=np.float64))


@njit
def _apply_nb(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _apply_np(X, feature, threshold, left, right, value):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[active]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def predict_tree(X, feature, threshold, left, right, value, use_numba=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = _apply_nb if use_numba else _apply_np
    return fn(X, feature, threshold, left, right, value)
