"""Exact path-dependent TreeSHAP kernel (polynomial-time path bookkeeping).

Background expectations come from node covers, so no training data is
needed at explain time. Routing matches the learners: ``x <= threshold``
goes left.
"""
import numba
import numpy as np

# No on-disk cache: numba's cache does not reload self-recursive functions
# safely, and a stale load crashes the interpreter. Compiling costs ~2 s once.


@numba.njit
def _extend(fi, zf, of, pw, depth, zero_fraction, one_fraction, feature):
    fi[depth] = feature
    zf[depth] = zero_fraction
    of[depth] = one_fraction
    pw[depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1) / (depth + 1)
        pw[i] = zero_fraction * pw[i] * (depth - i) / (depth + 1)


@numba.njit
def _unwind(fi, zf, of, pw, depth, k):
    one = of[k]
    zero = zf[k]
    nxt = pw[depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[i]
            pw[i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[i] * zero * (depth - i) / (depth + 1)
        else:
            pw[i] = pw[i] * (depth + 1) / (zero * (depth - i))
    for i in range(k, depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


@numba.njit
def _unwound_sum(zf, of, pw, depth, k):
    one = of[k]
    zero = zf[k]
    nxt = pw[depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[i] - tmp * zero * (depth - i) / (depth + 1)
        else:
            total += (pw[i] / zero) / ((depth - i) / (depth + 1))
    return total


@numba.njit
def _recurse(left, right, feature, threshold, value, cover, x, phi, node, depth,
             p_fi, p_zf, p_of, p_pw, zero_fraction, one_fraction, parent_feature):
    fi = p_fi.copy()
    zf = p_zf.copy()
    of = p_of.copy()
    pw = p_pw.copy()
    _extend(fi, zf, of, pw, depth, zero_fraction, one_fraction, parent_feature)
    if left[node] < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(zf, of, pw, depth, i)
            phi[fi[i]] += w * (of[i] - zf[i]) * value[node]
        return
    f = feature[node]
    if x[f] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    incoming_zero = 1.0
    incoming_one = 1.0
    k = 0
    while k <= depth:
        if fi[k] == f:
            break
        k += 1
    if k != depth + 1:
        incoming_zero = zf[k]
        incoming_one = of[k]
        _unwind(fi, zf, of, pw, depth, k)
        depth -= 1
    _recurse(left, right, feature, threshold, value, cover, x, phi, hot, depth + 1,
             fi, zf, of, pw, incoming_zero * cover[hot] / cover[node], incoming_one, f)
    _recurse(left, right, feature, threshold, value, cover, x, phi, cold, depth + 1,
             fi, zf, of, pw, incoming_zero * cover[cold] / cover[node], 0.0, f)


@numba.njit
def _batch(left, right, feature, threshold, value, cover, X, max_depth):
    n, m = X.shape
    out = np.zeros((n, m))
    size = max_depth + 2
    for r in range(n):
        fi = np.full(size, -1, dtype=np.int64)
        zf = np.zeros(size)
        of = np.zeros(size)
        pw = np.zeros(size)
        _recurse(left, right, feature, threshold, value, cover, X[r], out[r], 0, 0,
                 fi, zf, of, pw, 1.0, 1.0, -1)
    return out


def _plain(a, dtype):
    # one concrete array type per argument, so the kernel compiles once
    # regardless of readonly or strided inputs
    return np.array(a, dtype=dtype, order="C", copy=True)


def tree_shap_batch(left, right, feature, threshold, value, cover, X, max_depth):
    """SHAP values of one tree for every row of ``X``; shape ``X.shape``."""
    i, f = np.int64, np.float64
    return _batch(
        _plain(left, i), _plain(right, i), _plain(feature, i), _plain(threshold, f),
        _plain(value, f), _plain(cover, f), _plain(X, f), int(max_depth),
    )
