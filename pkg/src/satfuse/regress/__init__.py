"""Regression backbones behind one train/predict interface.

Five fit routines (least squares, ridge, random forest, boosted trees, MLP)
are dispatched through :func:`train`; the boosted-tree configurations cover
the plain, L2-regularized, and histogram/leaf-wise variants.  Every fit is
seed-deterministic and every trained model round-trips through JSON with
bit-identical predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError, PipelineError
from .forest import ForestModel, fit_forest
from .gbrt import GbrtModel, fit_gbrt
from .linear import LinearModel, fit_linear
from .mlp import MlpModel, fit_mlp, init_mlp
from .trees import tree_from_json, tree_to_json

BACKBONES = ("linear", "ridge", "forest", "gbrt", "mlp")

_DEFAULTS = {
    "linear": {},
    "ridge": {"lam": 1.0},
    "forest": {"n_trees": 200, "max_depth": None, "mtry": None, "bootstrap": True,
               "min_child_weight": 1},
    "gbrt": {"rounds": 200, "depth": 3, "shrinkage": 0.1, "leaf_l2": 1.0,
             "min_child_weight": 1, "splitter": "exact", "bins": 256,
             "growth": "level", "max_leaves": 31, "patience": None},
    "mlp": {"layers": [128, 64], "lr": 1e-3, "epochs": 200, "batch": 64,
            "patience": 10},
}


@dataclass
class RegressorSpec:
    """Backbone selector plus hyperparameters, validated against ranges."""

    backbone: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise PipelineError(f"unknown backbone {self.backbone!r}")
        defaults = _DEFAULTS[self.backbone]
        unknown = sorted(set(self.params) - set(defaults))
        if unknown:
            raise PipelineError(
                f"backbone {self.backbone!r} does not accept parameters {unknown}"
            )
        merged = dict(defaults)
        merged.update(self.params)
        self.params = merged
        self._validate()

    def _validate(self):
        p = self.params
        if self.backbone == "ridge" and p["lam"] < 0:
            raise PipelineError("ridge lam must be >= 0")
        if self.backbone == "forest":
            if p["n_trees"] < 1:
                raise PipelineError("forest needs n_trees >= 1")
            if p["max_depth"] is not None and p["max_depth"] < 1:
                raise PipelineError("forest max_depth must be >= 1")
        if self.backbone == "gbrt":
            if not (0.0 < p["shrinkage"] <= 1.0):
                raise PipelineError("gbrt shrinkage must lie in (0, 1]")
            if p["depth"] < 1:
                raise PipelineError("gbrt depth must be >= 1")
            if p["leaf_l2"] < 0:
                raise PipelineError("gbrt leaf_l2 must be >= 0")
            if not (2 <= p["bins"] <= 65536):
                raise PipelineError("gbrt bins must lie in [2, 65536]")
            if p["splitter"] not in ("exact", "histogram"):
                raise PipelineError(f"unknown gbrt splitter {p['splitter']!r}")
            if p["growth"] not in ("level", "leaf"):
                raise PipelineError(f"unknown gbrt growth {p['growth']!r}")
        if self.backbone == "mlp":
            if p["lr"] <= 0 or p["epochs"] < 1 or p["batch"] < 1:
                raise PipelineError("mlp needs lr > 0, epochs >= 1, batch >= 1")

    def to_json(self) -> dict:
        return {"backbone": self.backbone, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj) -> "RegressorSpec":
        return cls(backbone=obj["backbone"], seed=obj.get("seed", 0),
                   params=dict(obj.get("params", {})))


@dataclass
class TrainedModel:
    spec: RegressorSpec
    n_features: int
    model: object
    metadata: dict = field(default_factory=dict)


def train(spec: RegressorSpec, X, y, val: tuple | None = None) -> TrainedModel:
    """Fit the backbone named by ``spec`` and wrap it with its input contract."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise PipelineError("X must be 2-D with one target per row")
    p = spec.params
    if spec.backbone == "linear":
        model = fit_linear(X, y, lam=0.0)
    elif spec.backbone == "ridge":
        model = fit_linear(X, y, lam=p["lam"])
    elif spec.backbone == "forest":
        model = fit_forest(X, y, n_trees=p["n_trees"], max_depth=p["max_depth"],
                           mtry=p["mtry"], bootstrap=p["bootstrap"],
                           min_child_weight=p["min_child_weight"], seed=spec.seed)
    elif spec.backbone == "gbrt":
        model = fit_gbrt(X, y, rounds=p["rounds"], depth=p["depth"],
                         shrinkage=p["shrinkage"], leaf_l2=p["leaf_l2"],
                         min_child_weight=p["min_child_weight"],
                         splitter=p["splitter"], bins=p["bins"],
                         growth=p["growth"], max_leaves=p["max_leaves"],
                         val=val, patience=p["patience"])
    elif spec.backbone == "mlp":
        model = fit_mlp(X, y, hidden=p["layers"], lr=p["lr"], epochs=p["epochs"],
                        batch=p["batch"], patience=p["patience"], val=val,
                        seed=spec.seed)
    else:  # unreachable, __post_init__ validates
        raise PipelineError(f"unknown backbone {spec.backbone!r}")

    metadata = {}
    if isinstance(model, GbrtModel):
        metadata = {"rounds_used": model.rounds_used, "val_curve": list(model.val_curve)}
    elif isinstance(model, MlpModel):
        metadata = {"epochs_used": model.epochs_used, "val_curve": list(model.val_curve)}
    return TrainedModel(spec=spec, n_features=X.shape[1], model=model, metadata=metadata)


def predict(trained: TrainedModel, X, clamp: tuple | None = None) -> np.ndarray:
    """One finite prediction per row; rejects dimension mismatches."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != trained.n_features:
        raise PipelineError(
            f"expected {trained.n_features} features, got {X.shape[1] if X.ndim == 2 else 'non-matrix'}"
        )
    pred = trained.model.predict(X)
    if clamp is not None:
        pred = np.clip(pred, clamp[0], clamp[1])
    return pred


# ---------------------------------------------------------------------------
# Versioned JSON persistence
# ---------------------------------------------------------------------------

def _payload_to_json(model) -> dict:
    if isinstance(model, LinearModel):
        return {"kind": "linear", "weights": [float(w) for w in model.weights],
                "intercept": model.intercept, "lam": model.lam}
    if isinstance(model, ForestModel):
        return {"kind": "forest", "trees": [tree_to_json(t) for t in model.trees]}
    if isinstance(model, GbrtModel):
        return {"kind": "gbrt", "base": model.base, "shrinkage": model.shrinkage,
                "trees": [tree_to_json(t) for t in model.trees]}
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp",
            "layer_sizes": list(model.layer_sizes),
            "weights": [[float(x) for x in W.ravel()] for W in model.weights],
            "biases": [[float(x) for x in b] for b in model.biases],
            "x_mean": [float(x) for x in model.x_mean],
            "x_scale": [float(x) for x in model.x_scale],
        }
    raise PipelineError(f"cannot serialize model of type {type(model).__name__}")


def _payload_from_json(obj):
    kind = obj["kind"]
    if kind == "linear":
        return LinearModel(weights=np.asarray(obj["weights"]),
                           intercept=obj["intercept"], lam=obj["lam"])
    if kind == "forest":
        return ForestModel(trees=[tree_from_json(t) for t in obj["trees"]])
    if kind == "gbrt":
        model = GbrtModel(base=obj["base"], shrinkage=obj["shrinkage"],
                          trees=[tree_from_json(t) for t in obj["trees"]])
        model.rounds_used = len(model.trees)
        return model
    if kind == "mlp":
        sizes = obj["layer_sizes"]
        model = MlpModel(layer_sizes=list(sizes))
        model.weights = [
            np.asarray(w).reshape(fan_in, fan_out)
            for w, fan_in, fan_out in zip(obj["weights"], sizes[:-1], sizes[1:])
        ]
        model.biases = [np.asarray(b) for b in obj["biases"]]
        model.x_mean = np.asarray(obj["x_mean"])
        model.x_scale = np.asarray(obj["x_scale"])
        return model
    raise FormatError(f"unknown model kind {kind!r}")


def model_to_json(trained: TrainedModel) -> dict:
    return {
        "version": 1,
        "spec": trained.spec.to_json(),
        "n_features": trained.n_features,
        "metadata": trained.metadata,
        "payload": _payload_to_json(trained.model),
    }


def model_from_json(obj) -> TrainedModel:
    if obj.get("version") != 1:
        raise FormatError("unsupported model version")
    return TrainedModel(
        spec=RegressorSpec.from_json(obj["spec"]),
        n_features=obj["n_features"],
        model=_payload_from_json(obj["payload"]),
        metadata=obj.get("metadata", {}),
    )


def save_model(trained: TrainedModel, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_json(trained), f, sort_keys=True)
        f.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as f:
        return model_from_json(json.load(f))


__all__ = [
    "BACKBONES", "RegressorSpec", "TrainedModel", "train", "predict",
    "fit_linear", "fit_forest", "fit_gbrt", "fit_mlp", "init_mlp",
    "LinearModel", "ForestModel", "GbrtModel", "MlpModel",
    "model_to_json", "model_from_json", "save_model", "load_model",
]
