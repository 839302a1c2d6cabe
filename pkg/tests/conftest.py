import itertools

import numpy as np
import pytest

from rbm_transfer.partition import exact_log_likelihood
from rbm_transfer.rbm import RbmParams


def random_rbm(n_visible, n_hidden, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return RbmParams(
        rng.normal(0, scale, (n_visible, n_hidden)),
        rng.normal(0, scale, n_visible),
        rng.normal(0, scale, n_hidden),
    )


def all_states(n):
    return np.array(list(itertools.product([0.0, 1.0], repeat=n)))


def brute_energy(params, v, h):
    # Explicit sums, kept separate from the vectorised code under test.
    total = 0.0
    for i in range(params.n_visible):
        total += params.b[i] * v[i]
    for j in range(params.n_hidden):
        total += params.c[j] * h[j]
    for i in range(params.n_visible):
        for j in range(params.n_hidden):
            total += params.W[i, j] * v[i] * h[j]
    return -total


def brute_joint(params):
    """Table P[v_index, h_index] of exact joint probabilities and log Z."""
    vs, hs = all_states(params.n_visible), all_states(params.n_hidden)
    neg_e = np.array([[-brute_energy(params, v, h) for h in hs] for v in vs])
    m = neg_e.max()
    z = np.exp(neg_e - m).sum()
    return np.exp(neg_e - m) / z, m + np.log(z), vs, hs


def exact_kernel(params):
    """K[v, v'] = sum_h P(h|v) P(v'|h) by enumeration."""
    P, _, vs, hs = brute_joint(params)
    p_h_given_v = P / P.sum(axis=1, keepdims=True)
    p_v_given_h = (P / P.sum(axis=0, keepdims=True)).T
    return p_h_given_v @ p_v_given_h, P.sum(axis=1), vs


def state_index(v):
    n = v.shape[1]
    return (v @ (2 ** np.arange(n - 1, -1, -1))).astype(int)


def finite_difference_gradient(params, data, step=1e-5):
    n = len(data)
    x = np.concatenate([params.W.ravel(), params.b, params.c])
    nW, nv = params.W.size, params.n_visible

    def mean_ll(x):
        p = RbmParams(x[:nW].reshape(params.W.shape), x[nW : nW + nv], x[nW + nv :])
        return exact_log_likelihood(p, data) / n

    return np.array([(mean_ll(x + e) - mean_ll(x - e)) / (2 * step) for e in np.eye(x.size) * step])


@pytest.fixture
def tiny_rbm():
    return random_rbm(3, 2, seed=1234)


# Acceptance results, printed as one line per criterion at the end of the run.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
