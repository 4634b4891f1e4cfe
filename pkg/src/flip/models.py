"""Small classification models with analytic per-example gradients.

Parameters live in one flat vector so clipping, noising, and federated
averaging can treat every model the same way. Two architectures:

* softmax regression (a linear layer), and
* a one-hidden-layer tanh network.

Gradients are written out by hand; there is no autodiff here and none is
needed at this scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


def _check_features(X, expected):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != expected:
        raise ValueError(f"expected (batch, {expected}) inputs, got {X.shape}")
    return X


def _one_hot(y, classes):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be a 1-d integer array")
    if np.any(y < 0) or np.any(y >= classes):
        raise ValueError(f"labels must lie in [0, {classes})")
    out = np.zeros((y.size, classes))
    out[np.arange(y.size), y] = 1.0
    return out


def _softmax(z):
    return np.exp(z - logsumexp(z, axis=1, keepdims=True))


@dataclass(frozen=True)
class Logistic:
    """Multinomial logistic regression: weights (d, c) plus bias (c,)."""

    features: int
    classes: int = 2

    def __post_init__(self):
        if self.features < 1 or self.classes < 2:
            raise ValueError("need features >= 1 and classes >= 2")

    @property
    def param_count(self) -> int:
        return (self.features + 1) * self.classes

    def init_params(self, rng) -> np.ndarray:
        # the loss is convex; the origin is as good a start as any
        del rng
        return np.zeros(self.param_count)

    def _unpack(self, params):
        d, c = self.features, self.classes
        W = params[: d * c].reshape(d, c)
        b = params[d * c :]
        return W, b

    def logits(self, params, X):
        X = _check_features(X, self.features)
        W, b = self._unpack(params)
        return X @ W + b

    def per_example_gradients(self, params, X, y) -> np.ndarray:
        """Cross-entropy gradients, one flat row per example."""
        X = _check_features(X, self.features)
        delta = _softmax(self.logits(params, X)) - _one_hot(y, self.classes)
        grad_w = X[:, :, None] * delta[:, None, :]
        return np.concatenate([grad_w.reshape(X.shape[0], -1), delta], axis=1)


@dataclass(frozen=True)
class Mlp:
    """One tanh hidden layer: (d, h) + (h,) then (h, c) + (c,)."""

    features: int
    hidden: int
    classes: int = 2

    def __post_init__(self):
        if self.features < 1 or self.hidden < 1 or self.classes < 2:
            raise ValueError("need features, hidden >= 1 and classes >= 2")

    @property
    def param_count(self) -> int:
        d, h, c = self.features, self.hidden, self.classes
        return (d + 1) * h + (h + 1) * c

    def init_params(self, rng) -> np.ndarray:
        d, h, c = self.features, self.hidden, self.classes
        w1 = rng.standard_normal(d * h) / np.sqrt(d)
        w2 = rng.standard_normal(h * c) / np.sqrt(h)
        return np.concatenate([w1, np.zeros(h), w2, np.zeros(c)])

    def _unpack(self, params):
        d, h, c = self.features, self.hidden, self.classes
        i = 0
        W1 = params[i : i + d * h].reshape(d, h); i += d * h
        b1 = params[i : i + h]; i += h
        W2 = params[i : i + h * c].reshape(h, c); i += h * c
        b2 = params[i:]
        return W1, b1, W2, b2

    def logits(self, params, X):
        X = _check_features(X, self.features)
        W1, b1, W2, b2 = self._unpack(params)
        return np.tanh(X @ W1 + b1) @ W2 + b2

    def per_example_gradients(self, params, X, y) -> np.ndarray:
        X = _check_features(X, self.features)
        W1, b1, W2, b2 = self._unpack(params)
        hidden = np.tanh(X @ W1 + b1)
        delta2 = _softmax(hidden @ W2 + b2) - _one_hot(y, self.classes)
        grad_w2 = hidden[:, :, None] * delta2[:, None, :]
        delta1 = (delta2 @ W2.T) * (1.0 - hidden * hidden)
        grad_w1 = X[:, :, None] * delta1[:, None, :]
        B = X.shape[0]
        return np.concatenate(
            [grad_w1.reshape(B, -1), delta1, grad_w2.reshape(B, -1), delta2],
            axis=1,
        )


Architecture = Logistic | Mlp


@dataclass(frozen=True)
class Model:
    architecture: Architecture
    parameters: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.parameters, dtype=float)
        if p.ndim != 1 or p.size != self.architecture.param_count:
            raise ValueError(
                f"architecture needs {self.architecture.param_count} parameters, "
                f"got shape {p.shape}"
            )
        if not np.all(np.isfinite(p)):
            raise ValueError("model parameters must be finite")
        object.__setattr__(self, "parameters", p)

    def with_parameters(self, params) -> "Model":
        return Model(self.architecture, params)


def init_model(architecture: Architecture, seed=0) -> Model:
    rng = np.random.default_rng(seed)
    return Model(architecture, architecture.init_params(rng))


def mean_loss(model: Model, X, y) -> float:
    """Mean cross-entropy of the labels under the model."""
    z = model.architecture.logits(model.parameters, X)
    log_probs = z - logsumexp(z, axis=1, keepdims=True)
    return float(-np.mean(log_probs[np.arange(len(y)), np.asarray(y)]))


def accuracy(model: Model, X, y) -> float:
    """Fraction of correct argmax predictions, in [0, 1]."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("cannot evaluate on an empty set")
    z = model.architecture.logits(model.parameters, X)
    return float(np.mean(np.argmax(z, axis=1) == y))
