"""Maximum-likelihood training of RBMs with CD-k / PCD-k, plus an exact-gradient oracle."""

from dataclasses import dataclass, field
import time

import numpy as np

from .errors import DimensionError, InvalidArgumentError, NumericalError
from .partition import check_enumerable, exact_log_likelihood, exact_log_partition, iter_binary_states
from .rbm import (
    RbmParams,
    free_energy,
    gibbs_chain,
    hidden_free_energy,
    hidden_probs,
    sample_bernoulli,
    visible_probs,
)
from .rng import make_rng


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "pcd"
    k: int = 1
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 64
    weight_decay: float = 1e-4
    momentum: float = 0.5
    init_weight_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("cd", "pcd"):
            raise InvalidArgumentError(f"algorithm must be 'cd' or 'pcd', got {self.algorithm!r}")
        if self.k < 1 or self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgumentError("k and batch_size must be positive, epochs non-negative")
        if not self.learning_rate >= 0 or not self.weight_decay >= 0 or not self.init_weight_scale >= 0:
            raise InvalidArgumentError("learning_rate, weight_decay and init_weight_scale must be >= 0")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError("momentum must lie in [0, 1)")


@dataclass(frozen=True)
class GradEstimate:
    """Ascent direction of the mean log-likelihood per data row."""

    dW: np.ndarray
    db: np.ndarray
    dc: np.ndarray

    def __sub__(self, other):
        return GradEstimate(self.dW - other.dW, self.db - other.db, self.dc - other.dc)

    def flat(self):
        return np.concatenate([self.dW.ravel(), self.db, self.dc])


@dataclass
class PcdState:
    """Persistent negative-phase chains, one binary visible vector per row."""

    fantasy_v: np.ndarray

    @classmethod
    def from_batch(cls, batch):
        batch = np.array(batch, dtype=np.float64)
        if not np.all((batch == 0) | (batch == 1)):
            raise InvalidArgumentError("fantasy chains must be binary")
        return cls(batch)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    recon_error: float
    exact_ll: float = None
    wall_ms: float = 0.0


@dataclass
class TrainingHistory:
    initial_exact_ll: float = None
    epochs: list = field(default_factory=list)

    @property
    def recon_errors(self):
        return [r.recon_error for r in self.epochs]

    @property
    def exact_lls(self):
        return [r.exact_ll for r in self.epochs]


def logit(p):
    return np.log(p / (1.0 - p))


def init_params(n_visible, n_hidden, config, rng, data=None):
    """W ~ U(-s, s), c = 0 and b = logit of the clamped pixel means of ``data`` (else 0)."""
    if n_visible < 1 or n_hidden < 1:
        raise DimensionError("n_visible and n_hidden must be positive")
    s = config.init_weight_scale
    W = rng.uniform(-s, s, size=(n_visible, n_hidden)) if s > 0 else np.zeros((n_visible, n_hidden))
    b = np.zeros(n_visible)
    if data is not None:
        pixels = getattr(data, "pixels", data)
        if pixels.shape[1] != n_visible:
            raise DimensionError(f"data width {pixels.shape[1]} != n_visible {n_visible}")
        b = logit(np.clip(pixels.mean(axis=0), 0.01, 0.99))
    return RbmParams(W, b, np.zeros(n_hidden))


def _batch(params, batch):
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise InvalidArgumentError("batch is empty")
    if batch.shape[1] != params.n_visible:
        raise DimensionError(f"batch width {batch.shape[1]} != n_visible {params.n_visible}")
    return batch


def positive_phase(params, batch):
    """Data statistics: mean of v h^T, v and h with h replaced by P(h=1|v)."""
    batch = _batch(params, batch)
    p_h = hidden_probs(params, batch)
    n = batch.shape[0]
    return GradEstimate(batch.T @ p_h / n, batch.mean(axis=0), p_h.mean(axis=0))


def negative_phase(params, state):
    """Model statistics from the final state of the negative chains.

    Each statistic is replaced by its conditional expectation, which keeps the
    estimator unbiased: ``v h^T`` and ``h`` use P(h|v) at the final visibles,
    ``v`` uses the final visible probabilities.
    """
    v = state.v
    p_h = hidden_probs(params, v)
    n = v.shape[0]
    return GradEstimate(v.T @ p_h / n, state.p_v.mean(axis=0), p_h.mean(axis=0))


def cd_gradient(params, batch, k, rng):
    batch = _batch(params, batch)
    final = gibbs_chain(params, batch, k, rng)
    return positive_phase(params, batch) - negative_phase(params, final)


def pcd_gradient(params, batch, state, k, rng):
    """PCD-k estimate; the negative chains continue from ``state`` and are returned advanced."""
    batch = _batch(params, batch)
    if state.fantasy_v.ndim != 2 or state.fantasy_v.shape[1] != params.n_visible:
        raise DimensionError("fantasy chains do not match the model's visible layer")
    final = gibbs_chain(params, state.fantasy_v, k, rng)
    grad = positive_phase(params, batch) - negative_phase(params, final)
    return grad, PcdState(final.v)


def model_expectations(params):
    """Exact E[v h^T], E[v], E[h] under the model, by enumerating the smaller layer."""
    check_enumerable(params)
    log_z = exact_log_partition(params)
    vh = np.zeros((params.n_visible, params.n_hidden))
    ev = np.zeros(params.n_visible)
    eh = np.zeros(params.n_hidden)
    if params.n_hidden <= params.n_visible:
        for h in iter_binary_states(params.n_hidden):
            w = np.exp(-hidden_free_energy(params, h) - log_z)
            pv = visible_probs(params, h)
            vh += (pv * w[:, None]).T @ h
            ev += w @ pv
            eh += w @ h
    else:
        for v in iter_binary_states(params.n_visible):
            w = np.exp(-free_energy(params, v) - log_z)
            ph = hidden_probs(params, v)
            vh += (v * w[:, None]).T @ ph
            ev += w @ v
            eh += w @ ph
    return GradEstimate(vh, ev, eh)


def exact_gradient(params, data):
    """Gradient of the mean exact log-likelihood over the rows of ``data``."""
    pixels = getattr(data, "pixels", data)
    return positive_phase(params, pixels) - model_expectations(params)


def reconstruction_error(params, pixels):
    """Mean squared difference between v and its deterministic one-step reconstruction."""
    recon = visible_probs(params, hidden_probs(params, pixels))
    return float(np.mean((pixels - recon) ** 2))


def train(data, n_hidden, config, track_exact_ll=False, callback=None):
    """Fit an RBM to ``data`` by stochastic gradient ascent with momentum and weight decay.

    ``callback(record)`` is invoked after every epoch.
    """
    pixels = np.asarray(getattr(data, "pixels", data), dtype=np.float64)
    n = pixels.shape[0]
    if n == 0:
        raise InvalidArgumentError("cannot train on an empty dataset")
    if pixels.min() < 0 or pixels.max() > 1:
        raise InvalidArgumentError("training pixels must lie in [0, 1]")

    rng = make_rng(config.seed)
    params = init_params(pixels.shape[1], n_hidden, config, rng, pixels)
    W, b, c = (np.array(a) for a in (params.W, params.b, params.c))
    vW, vb, vc = np.zeros_like(W), np.zeros_like(b), np.zeros_like(c)

    history = TrainingHistory()
    if track_exact_ll:
        history.initial_exact_ll = exact_log_likelihood(params, pixels)

    state = None
    if config.algorithm == "pcd":
        start_rows = rng.integers(0, n, size=config.batch_size)
        state = PcdState(sample_bernoulli(pixels[start_rows], rng))

    lr, mom, wd = config.learning_rate, config.momentum, config.weight_decay
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = pixels[order[start : start + config.batch_size]]
            if state is None:
                grad = cd_gradient(params, batch, config.k, rng)
            else:
                grad, state = pcd_gradient(params, batch, state, config.k, rng)
            vW = mom * vW + lr * (grad.dW - wd * W)
            vb = mom * vb + lr * grad.db
            vc = mom * vc + lr * grad.dc
            W += vW
            b += vb
            c += vc
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
                raise NumericalError(f"parameters diverged in epoch {epoch}; lower the learning rate")
            params = RbmParams(W, b, c)
        record = EpochRecord(
            epoch=epoch,
            recon_error=reconstruction_error(params, pixels),
            exact_ll=exact_log_likelihood(params, pixels) if track_exact_ll else None,
            wall_ms=(time.perf_counter() - t0) * 1000.0,
        )
        history.epochs.append(record)
        if callback is not None:
            callback(record)
    return params, history
