"""Fully connected regression network trained with Adam on mean squared error.

Inputs are standardized inside the model using training statistics; hidden
layers use ReLU and the output head is linear.  Gradients are exact
backpropagation, checked against finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PipelineError


@dataclass
class MlpModel:
    layer_sizes: list  # [p, h1, ..., 1]
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    epochs_used: int = 0
    val_curve: list = field(default_factory=list)

    def _standardize(self, X):
        if self.x_mean is None:
            return X
        return (X - self.x_mean) / self.x_scale

    def forward(self, X):
        """Returns (prediction vector, per-layer activations pre-standardized in)."""
        acts = [self._standardize(np.asarray(X, dtype=np.float64))]
        a = acts[0]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if i == last else np.maximum(z, 0.0)
            acts.append(a)
        return a[:, 0], acts

    def predict(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def loss(self, X, y) -> float:
        pred = self.predict(X)
        return float(np.mean((pred - y) ** 2))

    def gradients(self, X, y):
        """Exact MSE gradients for every weight matrix and bias vector."""
        y = np.asarray(y, dtype=np.float64)
        pred, acts = self.forward(X)
        n = len(y)
        delta = (2.0 / n) * (pred - y)[:, None]  # d(mean sq err)/d(output)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return grads_w, grads_b


def init_mlp(p: int, hidden, seed: int = 0) -> MlpModel:
    """Scaled-uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    sizes = [p] + list(hidden) + [1]
    rng = np.random.default_rng(seed)
    model = MlpModel(layer_sizes=sizes)
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        model.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        model.biases.append(rng.uniform(-bound, bound, size=fan_out))
    return model


def fit_mlp(X, y, hidden=(128, 64), lr: float = 1e-3, epochs: int = 200,
            batch: int = 64, patience: int | None = 10,
            val: tuple | None = None, seed: int = 0) -> MlpModel:
    """Mini-batch Adam on MSE with optional early stopping on validation RMSE.

    The batch size is clipped to the sample count; the returned model carries
    the parameters of its best validation epoch when early stopping is active.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    batch = min(batch, n)
    if batch < 1:
        raise ValueError("batch must be >= 1")

    model = init_mlp(p, hidden, seed=seed)
    model.x_mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    model.x_scale = scale

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_w = [np.zeros_like(W) for W in model.weights]
    v_w = [np.zeros_like(W) for W in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]

    if val is not None:
        X_val = np.asarray(val[0], dtype=np.float64)
        y_val = np.asarray(val[1], dtype=np.float64)

    rng = np.random.default_rng(seed)
    best_rmse = np.inf
    best_params = None
    best_epoch = 0
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start:start + batch]
            grads_w, grads_b = model.gradients(X[rows], y[rows])
            step += 1
            for params, grads, ms, vs in (
                (model.weights, grads_w, m_w, v_w),
                (model.biases, grads_b, m_b, v_b),
            ):
                for i, g in enumerate(grads):
                    ms[i] = beta1 * ms[i] + (1 - beta1) * g
                    vs[i] = beta2 * vs[i] + (1 - beta2) * g * g
                    m_hat = ms[i] / (1 - beta1 ** step)
                    v_hat = vs[i] / (1 - beta2 ** step)
                    params[i] -= lr * m_hat / (np.sqrt(v_hat) + eps)

        train_loss = model.loss(X[order[:min(n, 2048)]], y[order[:min(n, 2048)]])
        if not np.isfinite(train_loss):
            raise PipelineError(
                f"training loss diverged at epoch {epoch + 1}; lower the learning rate"
            )
        model.epochs_used = epoch + 1
        if val is not None:
            rmse = float(np.sqrt(model.loss(X_val, y_val)))
            model.val_curve.append(rmse)
            if rmse < best_rmse - 1e-12:
                best_rmse = rmse
                best_epoch = epoch + 1
                best_params = (
                    [W.copy() for W in model.weights],
                    [b.copy() for b in model.biases],
                )
            elif patience is not None and (epoch + 1) - best_epoch >= patience:
                break

    if val is not None and best_params is not None:
        model.weights, model.biases = best_params
        model.epochs_used = best_epoch
    return model
