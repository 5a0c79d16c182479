"""CART decision trees with weighted impurity, shared by the forest
(Gini mode, binary labels) and boosting (squared-error mode, residuals).

Both split criteria reduce to the same proxy: with S = sum(w*y) and
W = sum(w) on a node, splitting to maximize S_l^2/W_l + S_r^2/W_r - S^2/W
maximizes the weighted squared-error decrease exactly, and the weighted
Gini decrease equals twice that quantity on 0/1 labels, so one search
serves both modes.  Stored node gains are the actual impurity decreases
(already scaled per mode) so importances can be read off the trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Tree", "fit_decision_tree", "tree_apply", "tree_predict"]

_NO_FEATURE = -1


@dataclass
class Tree:
    """Preorder node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "weight": self.weight.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
            weight=np.asarray(d["weight"], dtype=np.float64),
            gain=np.asarray(d["gain"], dtype=np.float64),
        )


def _best_split(X, y, w, feature_ids, min_leaf_weight):
    """Return (feature, threshold, proxy_gain) or None.

    Ties break toward the first feature in ascending id order, then the
    lowest threshold, so results never depend on row order.
    """
    W = w.sum()
    S = float(np.dot(w, y))
    base = S * S / W
    best_gain = 0.0
    best = None
    for f in feature_ids:
        x = X[:, f]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        boundaries = np.nonzero(xs[1:] > xs[:-1])[0]
        if boundaries.size == 0:
            continue
        ws = w[order]
        cw = np.cumsum(ws)
        cs = np.cumsum(ws * y[order])
        wl = cw[boundaries]
        sl = cs[boundaries]
        wr = W - wl
        sr = S - sl
        feasible = (
            (wl >= min_leaf_weight) & (wr >= min_leaf_weight) & (wl > 0) & (wr > 0)
        )
        if not feasible.any():
            continue
        gains = np.full(boundaries.shape, -np.inf)
        gains[feasible] = (
            sl[feasible] ** 2 / wl[feasible] + sr[feasible] ** 2 / wr[feasible] - base
        )
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            lo = xs[boundaries[i]]
            hi = xs[boundaries[i] + 1]
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:  # midpoint of adjacent doubles can round up
                thr = lo
            best_gain = float(gains[i])
            best = (int(f), float(thr), best_gain)
    return best


def fit_decision_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray | None = None,
    *,
    mode: str = "gini",
    max_depth: int | None = None,
    min_leaf_weight: float = 1.0,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Greedy top-down induction.  mode "gini" reads y as 0/1 class labels
    and leaves store the weighted positive fraction; mode "mse" reads y as
    real targets and leaves store the weighted mean.
    """
    if mode not in ("gini", "mse"):
        raise ValueError(f"unknown tree mode {mode!r}")
    if max_features is not None and rng is None:
        raise ValueError("max_features requires an rng")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    if sample_weight is None:
        w = np.ones(n, dtype=np.float64)
    else:
        w = np.asarray(sample_weight, dtype=np.float64)
        if (w < 0).any() or w.sum() == 0:
            raise ValueError("weights must be nonnegative and not all zero")
    gain_scale = 2.0 if mode == "gini" else 1.0

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    weight: list[float] = []
    gain: list[float] = []

    # Each task materializes one node: (parent id or -1, is-left-child,
    # row indices, depth).  Popping right-after-left off a LIFO stack
    # numbers nodes in preorder.
    stack = [(-1, False, np.arange(n), 0)]
    while stack:
        parent, is_left, idx, depth = stack.pop()
        wn = w[idx]
        yn = y[idx]
        wsum = float(wn.sum())
        node = len(feature)
        feature.append(_NO_FEATURE)
        threshold.append(0.0)
        left.append(node)
        right.append(node)
        value.append(float(np.dot(wn, yn) / wsum))
        weight.append(wsum)
        gain.append(0.0)
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node

        if max_depth is not None and depth >= max_depth:
            continue
        if yn.min() == yn.max():
            continue
        if wsum < 2 * min_leaf_weight:
            continue
        if max_features is not None and max_features < p:
            # sorted so the tie-break scan order stays ascending by id
            feature_ids = np.sort(rng.choice(p, size=max_features, replace=False))
        else:
            feature_ids = np.arange(p)
        found = _best_split(X[idx], yn, wn, feature_ids, min_leaf_weight)
        if found is None:
            continue
        f, thr, proxy = found
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        gain[node] = gain_scale * proxy
        stack.append((node, False, idx[~go_left], depth + 1))
        stack.append((node, True, idx[go_left], depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        weight=np.asarray(weight, dtype=np.float64),
        gain=np.asarray(gain, dtype=np.float64),
    )


def tree_apply(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Route every row to its leaf; returns leaf node indices."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    while True:
        active = tree.feature[node] >= 0
        if not active.any():
            break
        rows = np.nonzero(active)[0]
        cur = node[rows]
        xv = X[rows, tree.feature[cur]]
        goes_left = xv <= tree.threshold[cur]
        node[rows] = np.where(goes_left, tree.left[cur], tree.right[cur])
    return node


def tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf values for every row."""
    return tree.value[tree_apply(tree, X)]
