"""One-hidden-layer logistic MLP with a softmax output, trained by minibatch SGD."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidArgumentError, NumericalError
from .rbm import sigmoid
from .rng import make_rng


@dataclass(frozen=True, eq=False)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        arrays = {k: np.array(getattr(self, k), dtype=np.float64) for k in ("W1", "b1", "W2", "b2")}
        W1, b1, W2, b2 = arrays.values()
        if W1.ndim != 2 or W2.ndim != 2 or b1.ndim != 1 or b2.ndim != 1:
            raise DimensionError("W1, W2 must be 2-D and b1, b2 1-D")
        if W1.shape[1] != b1.size or W2.shape != (b1.size, b2.size):
            raise DimensionError(
                f"inconsistent shapes W1{W1.shape} b1{b1.shape} W2{W2.shape} b2{b2.shape}"
            )
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_inputs(self):
        return self.W1.shape[0]

    @property
    def n_hidden(self):
        return self.b1.size

    @property
    def n_classes(self):
        return self.b2.size

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("W1", "b1", "W2", "b2"))


@dataclass(frozen=True)
class ClfConfig:
    hidden_units: int = 128
    learning_rate: float = 0.2
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden_units < 1 or self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgumentError("hidden_units, batch_size must be positive and epochs >= 0")
        if not self.learning_rate >= 0:
            raise InvalidArgumentError("learning_rate must be non-negative")


def softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def init_mlp(n_inputs, n_hidden, n_classes, rng):
    return MlpParams(
        rng.uniform(-1, 1, (n_inputs, n_hidden)) / np.sqrt(n_inputs),
        np.zeros(n_hidden),
        rng.uniform(-1, 1, (n_hidden, n_classes)) / np.sqrt(n_hidden),
        np.zeros(n_classes),
    )


def _check_inputs(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.n_inputs:
        raise DimensionError(f"expected inputs of width {params.n_inputs}, got shape {x.shape}")
    return x


def clf_forward(params, x):
    """Class probabilities for one input vector or a batch of rows."""
    x = _check_inputs(params, x)
    hidden = sigmoid(x @ params.W1 + params.b1)
    return softmax(hidden @ params.W2 + params.b2)


def predict(params, x):
    # argmax returns the first maximum, so ties go to the lowest class index.
    return np.argmax(clf_forward(params, x), axis=-1)


def loss_and_grad(params, x, y):
    """Mean cross-entropy over the batch and its gradient by backpropagation."""
    x = np.atleast_2d(_check_inputs(params, x))
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    hidden = sigmoid(x @ params.W1 + params.b1)
    probs = softmax(hidden @ params.W2 + params.b2)
    loss = -np.mean(np.log(np.maximum(probs[np.arange(n), y], 1e-300)))

    d_out = probs.copy()
    d_out[np.arange(n), y] -= 1.0
    d_out /= n
    dW2 = hidden.T @ d_out
    db2 = d_out.sum(axis=0)
    d_hidden = (d_out @ params.W2.T) * hidden * (1.0 - hidden)
    dW1 = x.T @ d_hidden
    db1 = d_hidden.sum(axis=0)
    return loss, MlpParams(dW1, db1, dW2, db2)


def clf_train(data, config):
    if data.n == 0:
        raise InvalidArgumentError("cannot train a classifier on an empty dataset")
    labels = data.labels
    if labels.min() < 0 or labels.max() >= data.n_classes:
        raise InvalidArgumentError(f"labels must lie in [0, {data.n_classes})")
    rng = make_rng(config.seed)
    params = init_mlp(data.n_pixels, config.hidden_units, data.n_classes, rng)
    W1, b1, W2, b2 = (np.array(a) for a in (params.W1, params.b1, params.W2, params.b2))
    lr = config.learning_rate
    for _ in range(config.epochs):
        order = rng.permutation(data.n)
        for start in range(0, data.n, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, g = loss_and_grad(MlpParams(W1, b1, W2, b2), data.pixels[idx], labels[idx])
            W1 -= lr * g.W1
            b1 -= lr * g.b1
            W2 -= lr * g.W2
            b2 -= lr * g.b2
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, W2, b2)):
            raise NumericalError("classifier parameters diverged; lower the learning rate")
    return MlpParams(W1, b1, W2, b2)


def accuracy(params, data):
    """Fraction of rows whose argmax prediction equals the label."""
    if data.n == 0:
        raise InvalidArgumentError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(params, data.pixels) == data.labels))
