"""Gradient-boosted regression trees with shrinkage.

Covers three configurations under one fit: the plain booster (exact splits,
level growth, no leaf penalty), an L2-regularized variant (leaf penalty and
minimum child weight), and a histogram variant (quantile-binned splits with
leaf-wise growth).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trees import GrowParams, HistogramBins, grow_tree, predict_tree


@dataclass
class GbrtModel:
    base: float
    shrinkage: float
    trees: list = field(default_factory=list)
    rounds_used: int = 0
    val_curve: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        pred = np.full(X.shape[0], self.base)
        for tree in self.trees:
            pred += self.shrinkage * predict_tree(tree, X)
        return pred


def fit_gbrt(X, y, rounds: int = 200, depth: int = 3, shrinkage: float = 0.1,
             leaf_l2: float = 1.0, min_child_weight: int = 1,
             splitter: str = "exact", bins: int = 256,
             growth: str = "level", max_leaves: int = 31,
             val: tuple | None = None, patience: int | None = None) -> GbrtModel:
    """Sequentially fit trees to the residuals of the running prediction.

    Starts from the target mean; each round adds ``shrinkage`` times a tree
    whose leaves store sum(residuals) / (count + leaf_l2).  With a validation
    pair and ``patience`` set, boosting stops after that many rounds without
    an RMSE improvement and the model is truncated to its best round.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not (0.0 < shrinkage <= 1.0):
        raise ValueError("shrinkage must lie in (0, 1]")
    if leaf_l2 < 0:
        raise ValueError("leaf_l2 must be >= 0")
    if splitter not in ("exact", "histogram"):
        raise ValueError(f"unknown splitter {splitter!r}")

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    idx = np.arange(n)

    hist = HistogramBins(X, bins) if splitter == "histogram" else None
    params = GrowParams(max_depth=depth, min_child_weight=min_child_weight,
                        leaf_l2=leaf_l2, mtry=None, growth=growth,
                        max_leaves=max_leaves)

    if val is not None:
        X_val = np.asarray(val[0], dtype=np.float64)
        y_val = np.asarray(val[1], dtype=np.float64)
        val_pred = np.full(X_val.shape[0], float(y.mean()))

    model = GbrtModel(base=float(y.mean()), shrinkage=float(shrinkage))
    current = np.full(n, model.base)
    best_round, best_rmse = 0, np.inf
    for m in range(rounds):
        tree = grow_tree(X, y - current, idx, params, bins=hist)
        model.trees.append(tree)
        current += shrinkage * predict_tree(tree, X)
        if val is not None:
            val_pred += shrinkage * predict_tree(tree, X_val)
            rmse = float(np.sqrt(np.mean((y_val - val_pred) ** 2)))
            model.val_curve.append(rmse)
            if rmse < best_rmse - 1e-12:
                best_rmse, best_round = rmse, m + 1
            elif patience is not None and (m + 1) - best_round >= patience:
                break
    if val is not None and patience is not None:
        model.trees = model.trees[:best_round]
    model.rounds_used = len(model.trees)
    return model
