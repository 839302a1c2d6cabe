"""Bernoulli-Bernoulli RBM: energy, conditionals, free energy and block Gibbs sampling.

Visible vectors may be real valued in [0, 1]; they are then used directly as
Bernoulli means in the hidden pre-activations.  Every function accepts either
a single vector or a 2-D batch with one configuration per row.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidArgumentError


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


@dataclass(frozen=True, eq=False)
class RbmParams:
    """Weights ``W`` (n_visible x n_hidden), visible biases ``b``, hidden biases ``c``.

    The arrays are copied and marked read-only, so a params object can be
    shared freely between samplers.
    """

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        c = np.array(self.c, dtype=np.float64)
        if W.ndim != 2 or b.ndim != 1 or c.ndim != 1:
            raise DimensionError("W must be 2-D and b, c 1-D")
        if W.shape != (b.size, c.size):
            raise DimensionError(
                f"W has shape {W.shape}, expected ({b.size}, {c.size}) from b and c"
            )
        if b.size == 0 or c.size == 0:
            raise DimensionError("n_visible and n_hidden must be positive")
        for name, arr in (("W", W), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise InvalidArgumentError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @property
    def n_visible(self):
        return self.b.size

    @property
    def n_hidden(self):
        return self.c.size

    def replace(self, W=None, b=None, c=None):
        return RbmParams(
            self.W if W is None else W,
            self.b if b is None else b,
            self.c if c is None else c,
        )

    def __eq__(self, other):
        if not isinstance(other, RbmParams):
            return NotImplemented
        return (
            np.array_equal(self.W, other.W)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )


@dataclass(frozen=True)
class GibbsState:
    """Result of one transition v -> h -> v'.

    ``p_h`` are the hidden probabilities given the input visibles, ``h`` the
    sampled hiddens, ``p_v`` the visible probabilities given ``h`` and ``v``
    the sampled new visibles.
    """

    v: np.ndarray
    h: np.ndarray
    p_h: np.ndarray
    p_v: np.ndarray


def _as_units(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != n:
        raise DimensionError(f"{what} must have trailing dimension {n}, got shape {x.shape}")
    return x


def energy(params, v, h):
    """E(v, h) = -(b.v + c.h + v.W.h); one value per row for batched input."""
    v = _as_units(v, params.n_visible, "v")
    h = _as_units(h, params.n_hidden, "h")
    return -(v @ params.b + h @ params.c + np.sum((v @ params.W) * h, axis=-1))


def hidden_probs(params, v):
    """P(h_j = 1 | v) = sigmoid(c_j + (W^T v)_j)."""
    v = _as_units(v, params.n_visible, "v")
    return sigmoid(v @ params.W + params.c)


def visible_probs(params, h):
    """P(v_i = 1 | h) = sigmoid(b_i + (W h)_i)."""
    h = _as_units(h, params.n_hidden, "h")
    return sigmoid(h @ params.W.T + params.b)


def sample_bernoulli(p, rng):
    p = np.asarray(p, dtype=np.float64)
    if np.any(~(p >= 0.0) | ~(p <= 1.0)):
        raise InvalidArgumentError("Bernoulli probabilities must lie in [0, 1]")
    return (rng.random(p.shape) < p).astype(np.float64)


def gibbs_step(params, v, rng):
    """One block Gibbs transition: all hiddens given v, then all visibles given h."""
    p_h = hidden_probs(params, v)
    h = sample_bernoulli(p_h, rng)
    p_v = visible_probs(params, h)
    v_new = sample_bernoulli(p_v, rng)
    return GibbsState(v=v_new, h=h, p_h=p_h, p_v=p_v)


def gibbs_chain(params, v0, k, rng):
    """Apply :func:`gibbs_step` ``k`` times and return the last state."""
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"k must be a positive integer, got {k}")
    state = gibbs_step(params, v0, rng)
    for _ in range(int(k) - 1):
        state = gibbs_step(params, state.v, rng)
    return state


def free_energy(params, v):
    """F(v) = -b.v - sum_j softplus(c_j + (W^T v)_j), so that P(v) = exp(-F(v)) / Z."""
    v = _as_units(v, params.n_visible, "v")
    return -(v @ params.b) - np.sum(softplus(v @ params.W + params.c), axis=-1)


def hidden_free_energy(params, h):
    """Free energy with the visibles summed out; the mirror of :func:`free_energy`."""
    h = _as_units(h, params.n_hidden, "h")
    return -(h @ params.c) - np.sum(softplus(h @ params.W.T + params.b), axis=-1)
