"""CART regression trees shared by the forest and boosting backbones.

Splits maximize the regularized squared-error gain

    G_L^2 / (n_L + lam) + G_R^2 / (n_R + lam) - G^2 / (n + lam)

where G is the sum of targets in a node and lam the leaf L2 penalty; with
lam = 0 this is plain variance reduction, and a leaf predicts G / (n + lam).
Ties break toward the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass
class TreeNode:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class GrowParams:
    max_depth: int | None = None
    min_child_weight: int = 1
    leaf_l2: float = 0.0
    mtry: int | None = None  # features sampled per node; None = all
    growth: str = "level"  # level | leaf
    max_leaves: int = 31  # leaf-wise cap
    min_gain: float = 0.0


class HistogramBins:
    """Quantile-based feature bins shared by all trees of one boosted fit.

    ``edges[f]`` holds ascending upper boundaries; a sample falls in the
    leftmost bin whose edge is >= its value, so a split at ``edges[f][b]``
    sends x <= edge left, matching prediction-time traversal.
    """

    def __init__(self, X, n_bins: int):
        if not (2 <= n_bins <= 65536):
            raise ValueError("bins must lie in [2, 65536]")
        n, p = X.shape
        self.edges = []
        binned = np.empty((n, p), dtype=np.int32)
        qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
        for f in range(p):
            col = X[:, f]
            edges = np.unique(np.quantile(col, qs))
            self.edges.append(edges)
            binned[:, f] = np.searchsorted(edges, col, side="left")
        self.binned = binned
        self.n_bins = n_bins

    def bin_matrix(self, X) -> np.ndarray:
        n, p = X.shape
        out = np.empty((n, p), dtype=np.int32)
        for f in range(p):
            out[:, f] = np.searchsorted(self.edges[f], X[:, f], side="left")
        return out


def _node_score(g_sum, n, lam):
    return g_sum * g_sum / (n + lam)


def _best_split_exact(X, g, idx, features, params):
    n = len(idx)
    g_node = g[idx]
    total = float(g_node.sum())
    parent = _node_score(total, n, params.leaf_l2)
    mcw = params.min_child_weight
    best = (params.min_gain, -1, 0.0)
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        csum = np.cumsum(g_node[order])
        # Candidate boundaries sit between consecutive distinct values.
        cut = np.nonzero(xs_sorted[:-1] < xs_sorted[1:])[0]
        if len(cut) == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        ok = (n_left >= mcw) & (n_right >= mcw)
        if not np.any(ok):
            continue
        cut = cut[ok]
        n_left, n_right = n_left[ok], n_right[ok]
        g_left = csum[cut]
        gains = (_node_score(g_left, n_left, params.leaf_l2)
                 + _node_score(total - g_left, n_right, params.leaf_l2)
                 - parent)
        j = int(np.argmax(gains))  # first max: lowest threshold on ties
        if gains[j] > best[0]:
            lo, hi = xs_sorted[cut[j]], xs_sorted[cut[j] + 1]
            thr = 0.5 * (lo + hi)
            if not (lo <= thr < hi):  # midpoint of adjacent floats can round up
                thr = lo
            best = (float(gains[j]), int(f), float(thr))
    return best


def _best_split_hist(bins, g, idx, features, params):
    binned = bins.binned
    n = len(idx)
    g_node = g[idx]
    total = float(g_node.sum())
    parent = _node_score(total, n, params.leaf_l2)
    mcw = params.min_child_weight
    best = (params.min_gain, -1, 0.0)
    for f in features:
        edges = bins.edges[f]
        if len(edges) == 0:
            continue
        b = binned[idx, f]
        counts = np.bincount(b, minlength=len(edges) + 1)
        sums = np.bincount(b, weights=g_node, minlength=len(edges) + 1)
        n_left = np.cumsum(counts)[:-1]  # split after bin b, left = bins <= b
        g_left = np.cumsum(sums)[:-1]
        n_right = n - n_left
        ok = (n_left >= mcw) & (n_right >= mcw)
        if not np.any(ok):
            continue
        gains = np.where(
            ok,
            _node_score(g_left, np.maximum(n_left, 1), params.leaf_l2)
            + _node_score(total - g_left, np.maximum(n_right, 1), params.leaf_l2)
            - parent,
            -np.inf,
        )
        j = int(np.argmax(gains))
        if gains[j] > best[0]:
            best = (float(gains[j]), int(f), float(edges[j]))
    return best


def _sample_features(p, params, rng):
    if params.mtry is None or params.mtry >= p:
        return range(p)
    return np.sort(rng.choice(p, size=params.mtry, replace=False))


def _leaf_value(g, idx, lam):
    return float(g[idx].sum() / (len(idx) + lam))


def grow_tree(X, g, idx, params: GrowParams, rng=None, bins: HistogramBins | None = None) -> TreeNode:
    """Fit one regression tree to targets ``g`` over the rows in ``idx``."""
    find = _best_split_exact if bins is None else _best_split_hist
    data = X if bins is None else bins
    p = X.shape[1]

    def split_of(idx_node, depth):
        if len(idx_node) < 2 * params.min_child_weight or len(idx_node) < 2:
            return None
        if params.max_depth is not None and depth >= params.max_depth:
            return None
        if np.all(g[idx_node] == g[idx_node[0]]):
            return None
        feats = _sample_features(p, params, rng)
        gain, feature, thr = find(data, g, idx_node, feats, params)
        if feature < 0:
            return None
        return gain, feature, thr

    def partition(idx_node, feature, thr):
        if bins is None:
            mask = X[idx_node, feature] <= thr
        else:
            edge_idx = int(np.searchsorted(bins.edges[feature], thr, side="left"))
            mask = bins.binned[idx_node, feature] <= edge_idx
        left_idx, right_idx = idx_node[mask], idx_node[~mask]
        if len(left_idx) == 0 or len(right_idx) == 0:
            raise AssertionError("split produced an empty child")  # guards termination
        return left_idx, right_idx

    root = TreeNode(value=_leaf_value(g, idx, params.leaf_l2))

    if params.growth == "level":
        stack = [(root, idx, 0)]
        while stack:
            node, idx_node, depth = stack.pop()
            found = split_of(idx_node, depth)
            if found is None:
                continue
            _, node.feature, node.threshold = found
            left_idx, right_idx = partition(idx_node, node.feature, node.threshold)
            node.left = TreeNode(value=_leaf_value(g, left_idx, params.leaf_l2))
            node.right = TreeNode(value=_leaf_value(g, right_idx, params.leaf_l2))
            stack.append((node.right, right_idx, depth + 1))
            stack.append((node.left, left_idx, depth + 1))
        return root

    if params.growth != "leaf":
        raise ValueError(f"unknown growth strategy {params.growth!r}")

    # Leaf-wise: repeatedly expand the current leaf with the highest gain.
    counter = 0
    heap = []
    found = split_of(idx, 0)
    if found is not None:
        heapq.heappush(heap, (-found[0], counter, root, idx, 0, found))
    n_leaves = 1
    while heap and n_leaves < params.max_leaves:
        _, _, node, idx_node, depth, (gain, feature, thr) = heapq.heappop(heap)
        node.feature, node.threshold = feature, thr
        left_idx, right_idx = partition(idx_node, feature, thr)
        node.left = TreeNode(value=_leaf_value(g, left_idx, params.leaf_l2))
        node.right = TreeNode(value=_leaf_value(g, right_idx, params.leaf_l2))
        n_leaves += 1
        for child, child_idx in ((node.left, left_idx), (node.right, right_idx)):
            found = split_of(child_idx, depth + 1)
            if found is not None:
                counter += 1
                heapq.heappush(heap, (-found[0], counter, child, child_idx, depth + 1, found))
    return root


def predict_tree(node: TreeNode, X) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        cur, idx = stack.pop()
        if len(idx) == 0:
            continue
        if cur.is_leaf():
            out[idx] = cur.value
        else:
            mask = X[idx, cur.feature] <= cur.threshold
            stack.append((cur.left, idx[mask]))
            stack.append((cur.right, idx[~mask]))
    return out


def tree_to_json(node: TreeNode) -> dict:
    if node.is_leaf():
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": tree_to_json(node.left),
        "right": tree_to_json(node.right),
    }


def tree_from_json(obj) -> TreeNode:
    if "value" in obj:
        return TreeNode(value=obj["value"])
    return TreeNode(
        feature=obj["feature"],
        threshold=obj["threshold"],
        left=tree_from_json(obj["left"]),
        right=tree_from_json(obj["right"]),
        value=0.0,
    )
