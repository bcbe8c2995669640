"""Split search for gini (classification) and second-order (Newton boosting) trees.

Each feature is pre-binned once per fit. Bin edges are midpoints between
consecutive distinct training values (exact mode) or a quantile subset of
them (histogram mode). A node's candidate splits are then scored from
per-bin sums with a single ``bincount`` per statistic.

A split is only taken when its gain is positive (above ``MIN_GAIN``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyNode

MIN_GAIN = 1e-12
TIE_TOL = 1e-12


def gini_impurity(counts) -> float:
    c0, c1 = (float(c) for c in counts)
    total = c0 + c1
    if total <= 0:
        raise EmptyNode("gini impurity of an empty node")
    p0, p1 = c0 / total, c1 / total
    return 1.0 - p0 * p0 - p1 * p1


def second_order_gain(g_left, h_left, g_right, h_right, lambda_l2: float, gamma: float = 0.0):
    """Newton gain ``½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`` (vectorised)."""
    g = g_left + g_right
    h = h_left + h_right
    return 0.5 * (
        g_left**2 / (h_left + lambda_l2) + g_right**2 / (h_right + lambda_l2) - g**2 / (h + lambda_l2)
    ) - gamma


def newton_leaf_weight(g_sum: float, h_sum: float, lambda_l2: float) -> float:
    return -g_sum / (h_sum + lambda_l2)


def safe_midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2.0
    # adjacent doubles: the midpoint rounds up to b and would route b left
    return a if mid >= b else mid


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


class BinnedMatrix:
    """Per-feature bin codes: row ``i`` sits in bin ``b`` iff ``edges[b-1] < x <= edges[b]``."""

    def __init__(self, X: np.ndarray, histogram_bins: int = 0):
        X = np.asarray(X, dtype=np.float64)
        n, m = X.shape
        self.X = X
        self.edges = []
        self.exact = np.zeros(m, dtype=bool)
        self.codes = np.empty((n, m), dtype=np.int64)
        for j in range(m):
            u = np.unique(X[:, j])
            mids = np.array([safe_midpoint(a, b) for a, b in zip(u[:-1], u[1:])])
            if histogram_bins <= 0 or u.size <= histogram_bins:
                edges = mids
                self.exact[j] = True
            else:
                q = np.quantile(X[:, j], np.arange(1, histogram_bins) / histogram_bins)
                k = np.clip(np.searchsorted(u, q, side="right") - 1, 0, u.size - 2)
                edges = np.unique(mids[k])
            self.edges.append(edges)
            self.codes[:, j] = np.searchsorted(edges, X[:, j], side="left")
        self.n_bins = np.array([e.size + 1 for e in self.edges], dtype=np.int64)


def _split_scores(binned, rows, feats, stats, mode, min_samples_leaf, lambda_l2, gamma):
    """Score every split between consecutive non-empty bins of each candidate feature.

    Returns ``(gains, feature_position, local_bin)`` for the candidates in
    (feature, threshold) order; invalid candidates carry ``-inf``.
    """
    n_feat = len(feats)
    nb = binned.n_bins[feats]
    offsets = np.concatenate(([0], np.cumsum(nb)[:-1]))
    flat = (binned.codes[np.ix_(rows, feats)] + offsets).ravel()
    size = int(nb.sum())
    hists = [np.bincount(flat, weights=np.repeat(s[rows], n_feat), minlength=size) for s in stats]
    nz = np.flatnonzero(np.bincount(flat, minlength=size))
    group = np.searchsorted(offsets, nz, side="right") - 1
    last_in_group = np.append(group[1:] != group[:-1], True)
    first_in_group = np.insert(last_in_group[:-1], 0, True)
    left, right = [], []
    for h, s in zip(hists, stats):
        hv = h[nz]
        cs = np.cumsum(hv)
        pre = (cs - hv)[first_in_group]
        lft = cs - pre[group]
        left.append(lft)
        right.append(s[rows].sum() - lft)
    n_left, n_right = left[0], right[0]
    valid = ~last_in_group & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "gini":
            w = n_left + n_right
            p = (left[1] + right[1]) / w
            pl = left[1] / n_left
            pr = right[1] / n_right
            gains = 2.0 * p * (1.0 - p) - (n_left / w) * 2.0 * pl * (1 - pl) - (n_right / w) * 2.0 * pr * (1 - pr)
        else:
            gains = second_order_gain(left[1], left[2], right[1], right[2], lambda_l2, gamma)
    gains = np.where(valid, gains, -np.inf)
    return gains, group, nz - offsets[group]


def search_binned(binned, rows, feats, stats, mode, min_samples_leaf=1, lambda_l2=1.0, gamma=0.0):
    """Best split of node ``rows`` over candidate ``feats`` (ascending), or None.

    ``stats`` are full-length arrays: ``(w, w*y)`` for gini or
    ``(count, g, h)`` for second_order. Ties within ``TIE_TOL`` go to the
    lower feature index, then the lower threshold.
    """
    feats = np.asarray(feats, dtype=np.int64)
    if rows.size < 2 or feats.size == 0:
        return None
    gains, group, local_bin = _split_scores(
        binned, rows, feats, stats, mode, min_samples_leaf, lambda_l2, gamma
    )
    if gains.size == 0:
        return None
    best = gains.max()
    if not np.isfinite(best) or best <= MIN_GAIN:
        return None
    i = int(np.flatnonzero(gains >= best - TIE_TOL)[0])
    f = int(feats[group[i]])
    edge = float(binned.edges[f][local_bin[i]])
    if binned.exact[f]:
        x = binned.X[rows, f]
        threshold = safe_midpoint(float(x[x <= edge].max()), float(x[x > edge].min()))
    else:
        threshold = edge
    return Split(f, threshold, float(gains[i]))


def search_random(X, rows, feats, w, wy, min_samples_leaf, rng):
    """Extra-trees split: one uniform threshold in [min, max] per candidate feature, best gini gain wins."""
    W, WY = w[rows].sum(), wy[rows].sum()
    p = WY / W
    parent = 2.0 * p * (1.0 - p)
    best = None
    for f in feats:
        x = X[rows, f]
        lo, hi = x.min(), x.max()
        if lo == hi:
            continue
        thr = float(rng.uniform(lo, hi))
        mask = x <= thr
        wl, wyl = w[rows][mask].sum(), wy[rows][mask].sum()
        wr, wyr = W - wl, WY - wyl
        if wl < min_samples_leaf or wr < min_samples_leaf:
            continue
        pl, pr = wyl / wl, wyr / wr
        gain = parent - (wl / W) * 2 * pl * (1 - pl) - (wr / W) * 2 * pr * (1 - pr)
        if gain > MIN_GAIN and (best is None or gain > best.gain + TIE_TOL):
            best = Split(int(f), thr, float(gain))
    return best


def best_split(
    X,
    targets,
    candidate_features=None,
    mode: str = "gini",
    min_samples_leaf: int = 1,
    lambda_l2: float = 1.0,
    gamma: float = 0.0,
    histogram_bins: int = 0,
    hessians=None,
    sample_weight=None,
):
    """Best single split of all rows of ``X``.

    ``mode="gini"``: ``targets`` are 0/1 labels. ``mode="second_order"``:
    ``targets`` are gradients and ``hessians`` must be given.
    Returns a :class:`Split` or None when no split has positive gain.
    """
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    feats = np.arange(m) if candidate_features is None else np.sort(np.asarray(candidate_features))
    if n < 2 * min_samples_leaf:
        return None
    binned = BinnedMatrix(X, histogram_bins)
    rows = np.arange(n)
    w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if mode == "gini":
        stats = (w, w * t)
    elif mode == "second_order":
        if hessians is None:
            raise ValueError("second_order mode needs hessians")
        stats = (w, w * t, w * np.asarray(hessians, dtype=np.float64))
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return search_binned(binned, rows, feats, stats, mode, min_samples_leaf, lambda_l2, gamma)
