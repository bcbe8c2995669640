"""Flat-array binary tree and the recursive grower shared by every learner."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .splits import BinnedMatrix, newton_leaf_weight, search_binned, search_random

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    """Preorder node arrays; node 0 is the root, ``left == -1`` marks a leaf.

    Routing is ``x[feature] <= threshold`` to the left child. ``value`` is
    the class-1 fraction (gini trees) or the raw Newton leaf weight
    (boosted trees); ``gain`` is the impurity decrease / split gain at
    internal nodes and 0 at leaves.
    """

    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.left.size

    def is_leaf(self, node: int) -> bool:
        return self.left[node] == LEAF

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.left[node] != LEAF
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def used_features(self) -> set:
        return {int(f) for f in self.feature[self.left != LEAF]}

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.left[i] == LEAF:
                nodes.append({"value": float(self.value[i]), "cover": float(self.cover[i])})
            else:
                nodes.append(
                    {
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                        "value": float(self.value[i]),
                        "cover": float(self.cover[i]),
                        "gain": float(self.gain[i]),
                    }
                )
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        nodes = d["nodes"]
        get = lambda key, default: [n.get(key, default) for n in nodes]  # noqa: E731
        return cls(
            np.array(get("left", LEAF), dtype=np.int64),
            np.array(get("right", LEAF), dtype=np.int64),
            np.array(get("feature", LEAF), dtype=np.int64),
            np.array(get("threshold", 0.0), dtype=np.float64),
            np.array(get("value", 0.0), dtype=np.float64),
            np.array([n["cover"] for n in nodes], dtype=np.float64),
            np.array(get("gain", 0.0), dtype=np.float64),
        )

    @classmethod
    def from_lists(cls, left, right, feature, threshold, value, cover, gain) -> "Tree":
        return cls(
            np.asarray(left, dtype=np.int64),
            np.asarray(right, dtype=np.int64),
            np.asarray(feature, dtype=np.int64),
            np.asarray(threshold, dtype=np.float64),
            np.asarray(value, dtype=np.float64),
            np.asarray(cover, dtype=np.float64),
            np.asarray(gain, dtype=np.float64),
        )


class TreeGrower:
    """Depth-first grower.

    ``mode`` is ``"gini"`` (stats ``w, w*y``) or ``"second_order"``
    (stats ``count, g, h``); ``splitter="random"`` gives extra-trees splits.
    """

    def __init__(
        self,
        mode="gini",
        max_depth=12,
        min_samples_leaf=1,
        max_features=None,
        lambda_l2=1.0,
        gamma=0.0,
        splitter="best",
        rng=None,
    ):
        self.mode = mode
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.lambda_l2 = lambda_l2
        self.gamma = gamma
        self.splitter = splitter
        self.rng = rng

    def grow(self, binned: BinnedMatrix, rows: np.ndarray, stats) -> Tree:
        self._binned, self._stats = binned, stats
        self._n_features = binned.X.shape[1]
        self._nodes = {k: [] for k in ("left", "right", "feature", "threshold", "value", "cover", "gain")}
        self._grow(np.asarray(rows, dtype=np.int64), 0)
        return Tree.from_lists(**self._nodes)

    def _candidates(self):
        m = self._n_features
        k = self.max_features
        if k is None or k >= m:
            return np.arange(m)
        return np.sort(self.rng.choice(m, size=k, replace=False))

    def _new_node(self, rows):
        s = [st[rows].sum() for st in self._stats]
        if self.mode == "gini":
            value = s[1] / s[0]
        else:
            value = newton_leaf_weight(s[1], s[2], self.lambda_l2)
        nid = len(self._nodes["left"])
        for key, v in (("left", LEAF), ("right", LEAF), ("feature", LEAF), ("threshold", 0.0), ("gain", 0.0)):
            self._nodes[key].append(v)
        self._nodes["value"].append(float(value))
        self._nodes["cover"].append(float(s[0]))
        return nid, s

    def _grow(self, rows, depth):
        nid, s = self._new_node(rows)
        if depth >= self.max_depth or s[0] < 2 * self.min_samples_leaf:
            return nid
        if self.mode == "gini" and (s[1] <= 0.0 or s[1] >= s[0]):
            return nid
        feats = self._candidates()
        if self.splitter == "random":
            split = search_random(
                self._binned.X, rows, feats, self._stats[0], self._stats[1], self.min_samples_leaf, self.rng
            )
        else:
            split = search_binned(
                self._binned, rows, feats, self._stats, self.mode,
                self.min_samples_leaf, self.lambda_l2, self.gamma,
            )
        if split is None:
            return nid
        go_left = self._binned.X[rows, split.feature] <= split.threshold
        nodes = self._nodes
        nodes["feature"][nid] = split.feature
        nodes["threshold"][nid] = split.threshold
        nodes["gain"][nid] = split.gain
        nodes["left"][nid] = self._grow(rows[go_left], depth + 1)
        nodes["right"][nid] = self._grow(rows[~go_left], depth + 1)
        return nid
