"""Partition function: exact enumeration for small models, AIS for large ones."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import CapacityError, InvalidArgumentError, NumericalError
from .rbm import free_energy, hidden_free_energy, sigmoid, softplus
from .rng import stream

# Enumeration runs over the smaller of the two layers.
MAX_ENUMERATED_UNITS = 24
_CHUNK_BITS = 16


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


def binary_states(n, start=0, stop=None):
    """Rows are the binary expansions of ``start..stop-1`` (bit 0 = last unit)."""
    stop = 2**n if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.float64)


def iter_binary_states(n):
    chunk = 2**_CHUNK_BITS
    total = 2**n
    for start in range(0, total, chunk):
        yield binary_states(n, start, min(start + chunk, total))


def check_enumerable(params):
    smaller = min(params.n_visible, params.n_hidden)
    if smaller > MAX_ENUMERATED_UNITS:
        raise CapacityError(
            f"exact enumeration needs the smaller layer to have at most "
            f"{MAX_ENUMERATED_UNITS} units, got {smaller}"
        )


def exact_log_partition(params):
    """log Z by summing exp(-free energy) over every state of the smaller layer."""
    check_enumerable(params)
    if params.n_hidden <= params.n_visible:
        n, fe = params.n_hidden, hidden_free_energy
    else:
        n, fe = params.n_visible, free_energy
    partial = [logsumexp(-fe(params, states)) for states in iter_binary_states(n)]
    return logsumexp(np.array(partial))


def _pixels(data):
    pixels = getattr(data, "pixels", data)
    return np.atleast_2d(np.asarray(pixels, dtype=np.float64))


def exact_log_likelihood(params, data):
    """Sum over rows of log P(v) = -F(v) - log Z."""
    v = _pixels(data)
    log_z = exact_log_partition(params)
    return float(np.sum(-free_energy(params, v)) - v.shape[0] * log_z)


@dataclass(frozen=True)
class AisConfig:
    n_temperatures: int = 1000
    n_chains: int = 100
    schedule: str = "linear"
    seed: int = 0

    def __post_init__(self):
        if self.n_temperatures < 2:
            raise InvalidArgumentError("n_temperatures must be at least 2")
        if self.n_chains < 1:
            raise InvalidArgumentError("n_chains must be positive")
        if self.schedule not in ("linear", "sigmoid"):
            raise InvalidArgumentError(f"unknown schedule {self.schedule!r}")

    def betas(self):
        if self.schedule == "linear":
            return np.linspace(0.0, 1.0, self.n_temperatures)
        s = sigmoid(np.linspace(-4.0, 4.0, self.n_temperatures))
        return (s - s[0]) / (s[-1] - s[0])


@dataclass(frozen=True)
class LogZEstimate:
    mean_log_z: float
    std_err_log_z: float
    n_chains: int


def base_log_partition(params):
    """log Z of the same model with W = 0."""
    return float(np.sum(softplus(params.b)) + np.sum(softplus(params.c)))


def _uniforms(streams, n):
    return np.stack([g.random(n) for g in streams])


def ais_log_partition(params, config):
    """Estimate log Z by annealing the interaction term from W = 0 to the full W.

    Intermediate models keep both bias vectors and scale ``W`` by beta.  Chain
    ``i`` draws all of its randomness from its own stream ``(config.seed, i)``,
    so results do not depend on how chains are grouped.  The estimate is
    ``log mean(w)`` of the importance weights; its standard error follows from
    the delta method.
    """
    betas = config.betas()
    W, b, c = params.W, params.b, params.c
    streams = [stream(config.seed, i) for i in range(config.n_chains)]
    nv, nh = params.n_visible, params.n_hidden

    def log_unnorm(v, beta):
        return v @ b + np.sum(softplus(beta * (v @ W) + c), axis=1)

    v = (_uniforms(streams, nv) < sigmoid(b)).astype(np.float64)
    log_w = np.zeros(config.n_chains)
    for prev, beta in zip(betas[:-1], betas[1:]):
        log_w += log_unnorm(v, beta) - log_unnorm(v, prev)
        if beta < 1.0:
            h = (_uniforms(streams, nh) < sigmoid(beta * (v @ W) + c)).astype(np.float64)
            v = (_uniforms(streams, nv) < sigmoid(beta * (h @ W.T) + b)).astype(np.float64)
    if not np.all(np.isfinite(log_w)):
        raise NumericalError("non-finite AIS importance weight; the model or schedule is unstable")

    n = config.n_chains
    if np.all(log_w == log_w[0]):
        return LogZEstimate(base_log_partition(params) + float(log_w[0]), 0.0, n)
    log_mean_w = logsumexp(log_w) - math.log(n)
    if n > 1:
        rel = np.exp(log_w - log_mean_w)
        std_err = float(np.std(rel, ddof=1) / math.sqrt(n))
    else:
        std_err = 0.0
    return LogZEstimate(base_log_partition(params) + log_mean_w, std_err, n)
