"""Minimal multi-layer perceptron with softmax output.

Two ReLU hidden layers by default, cross-entropy objective, full-batch
Adam updates on a fixed schedule. Given a seed, training is bitwise
reproducible. Training aborts with :class:`TrainingError` when the loss
has not improved over the patience window starting from its initial
value; otherwise the best-loss weights are kept.
"""

from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    """Optimization failed to reduce the loss; carries diagnostics."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = history or []


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class MLPClassifier:
    def __init__(
        self,
        hidden=(100, 100),
        seed: int = 0,
        learning_rate: float = 1e-3,
        max_epochs: int = 2000,
        patience: int = 200,
    ):
        self.hidden = tuple(hidden)
        self.seed = seed
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience

    def _init_weights(self, sizes, rng):
        self.W_ = []
        self.b_ = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.W_.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.b_.append(np.zeros(fan_out))

    def _forward(self, X):
        acts = [X]
        for i, (W, b) in enumerate(zip(self.W_, self.b_)):
            z = acts[-1] @ W + b
            acts.append(z if i == len(self.W_) - 1 else np.maximum(z, 0.0))
        return acts

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        y_enc = np.searchsorted(self.classes_, y)
        n, d = X.shape
        k = len(self.classes_)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y_enc] = 1.0

        rng = np.random.default_rng(self.seed)
        sizes = (d,) + self.hidden + (k,)
        self._init_weights(sizes, rng)

        # Adam state
        mW = [np.zeros_like(W) for W in self.W_]
        vW = [np.zeros_like(W) for W in self.W_]
        mb = [np.zeros_like(b) for b in self.b_]
        vb = [np.zeros_like(b) for b in self.b_]
        beta1, beta2, eps = 0.9, 0.999, 1e-8

        best_loss = np.inf
        best_epoch = -1
        best_weights = None
        history = []
        for epoch in range(self.max_epochs):
            acts = self._forward(X)
            probs = _softmax(acts[-1])
            loss = float(-np.log(np.maximum(probs[np.arange(n), y_enc], 1e-300)).mean())
            history.append(loss)
            if loss < best_loss - 1e-12:
                best_loss = loss
                best_epoch = epoch
                best_weights = ([W.copy() for W in self.W_], [b.copy() for b in self.b_])
            elif epoch - best_epoch > self.patience:
                if best_epoch <= 0:
                    raise TrainingError(
                        f"loss failed to decrease within {self.patience} epochs"
                        f" (initial {history[0]:.6f}, last {loss:.6f})",
                        history,
                    )
                break

            delta = (probs - onehot) / n
            t = epoch + 1
            for i in reversed(range(len(self.W_))):
                gW = acts[i].T @ delta
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ self.W_[i].T) * (acts[i] > 0)
                mW[i] = beta1 * mW[i] + (1 - beta1) * gW
                vW[i] = beta2 * vW[i] + (1 - beta2) * gW**2
                mb[i] = beta1 * mb[i] + (1 - beta1) * gb
                vb[i] = beta2 * vb[i] + (1 - beta2) * gb**2
                mhW = mW[i] / (1 - beta1**t)
                vhW = vW[i] / (1 - beta2**t)
                mhb = mb[i] / (1 - beta1**t)
                vhb = vb[i] / (1 - beta2**t)
                self.W_[i] -= self.learning_rate * mhW / (np.sqrt(vhW) + eps)
                self.b_[i] -= self.learning_rate * mhb / (np.sqrt(vhb) + eps)

        if best_weights is not None:
            self.W_, self.b_ = best_weights
        self.loss_history_ = history
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        return _softmax(self._forward(X)[-1])

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def train_mlp(X, y, hidden=(100, 100), seed: int = 0, **kwargs) -> MLPClassifier:
    return MLPClassifier(hidden=hidden, seed=seed, **kwargs).fit(X, y)
