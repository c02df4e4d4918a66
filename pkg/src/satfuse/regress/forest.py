"""Random forest regressor: bagged CART trees with per-node feature sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..util import stable_seed
from .trees import GrowParams, grow_tree, predict_tree


@dataclass
class ForestModel:
    trees: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += predict_tree(tree, X)
        return acc / len(self.trees)


def fit_forest(X, y, n_trees: int = 200, max_depth: int | None = None,
               mtry: int | None = None, bootstrap: bool = True,
               min_child_weight: int = 1, seed: int = 0) -> ForestModel:
    """Variance-reduction CART trees on bootstrap resamples.

    ``mtry`` features are drawn per node (default ceil(p / 3)); the ensemble
    prediction is the arithmetic mean over trees, so every prediction lies
    within the training target range.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if mtry is None:
        mtry = math.ceil(p / 3)
    if mtry > p:
        raise ValueError(f"mtry {mtry} exceeds feature count {p}")

    params = GrowParams(max_depth=max_depth, min_child_weight=min_child_weight,
                        leaf_l2=0.0, mtry=mtry, growth="level")
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(stable_seed(seed, "tree", t))
        if bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(grow_tree(X, y, idx, params, rng=rng))
    return ForestModel(trees=trees)
