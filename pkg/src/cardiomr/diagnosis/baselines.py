"""Comparison-harness classifiers: logistic regression and k-NN.

These take part in the cross-validation comparison and the selection
rule; they are not members of the voting ensemble.
"""

from __future__ import annotations

import numpy as np


class LogisticRegression:
    """Multinomial softmax regression, full-batch Adam."""

    def __init__(self, learning_rate: float = 0.05, max_epochs: int = 500, seed: int = 0):
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        y_enc = np.searchsorted(self.classes_, y)
        n, d = X.shape
        k = len(self.classes_)
        onehot = np.zeros((n, k))
        onehot[np.arange(n), y_enc] = 1.0
        self.W_ = np.zeros((d, k))
        self.b_ = np.zeros(k)
        mW = np.zeros_like(self.W_); vW = np.zeros_like(self.W_)
        mb = np.zeros_like(self.b_); vb = np.zeros_like(self.b_)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        for t in range(1, self.max_epochs + 1):
            z = X @ self.W_ + self.b_
            e = np.exp(z - z.max(axis=1, keepdims=True))
            p = e / e.sum(axis=1, keepdims=True)
            delta = (p - onehot) / n
            gW = X.T @ delta
            gb = delta.sum(axis=0)
            mW = beta1 * mW + (1 - beta1) * gW; vW = beta2 * vW + (1 - beta2) * gW**2
            mb = beta1 * mb + (1 - beta1) * gb; vb = beta2 * vb + (1 - beta2) * gb**2
            self.W_ -= self.learning_rate * (mW / (1 - beta1**t)) / (np.sqrt(vW / (1 - beta2**t)) + eps)
            self.b_ -= self.learning_rate * (mb / (1 - beta1**t)) / (np.sqrt(vb / (1 - beta2**t)) + eps)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.classes_[np.argmax(X @ self.W_ + self.b_, axis=1)]


class KNearestNeighbors:
    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        self.X_ = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.y_enc_ = np.searchsorted(self.classes_, y)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        d2 = ((X[:, None, :] - self.X_[None, :, :]) ** 2).sum(axis=2)
        k = min(self.k, self.X_.shape[0])
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out = np.empty(X.shape[0], dtype=np.int64)
        for i in range(X.shape[0]):
            out[i] = np.argmax(np.bincount(self.y_enc_[nearest[i]], minlength=len(self.classes_)))
        return self.classes_[out]
