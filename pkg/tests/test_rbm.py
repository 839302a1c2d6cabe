import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rbm_transfer.errors import DimensionError, InvalidArgumentError
from rbm_transfer.rbm import (
    RbmParams,
    energy,
    free_energy,
    gibbs_chain,
    gibbs_step,
    hidden_probs,
    sample_bernoulli,
    sigmoid,
    softplus,
    visible_probs,
)
from rbm_transfer.rng import make_rng

from conftest import all_states, brute_energy, brute_joint, exact_kernel, random_rbm, state_index


# ------------------------------------------------------------------ energy


def test_energy_zero_params():
    p = RbmParams.zeros(4, 3)
    assert energy(p, [1, 0, 1, 1], [0, 1, 1]) == 0.0


def test_energy_hand_value():
    p = RbmParams([[2.0], [0.0]], [1.0, 0.0], [0.0])
    assert energy(p, [1, 0], [1]) == -3.0


def test_energy_zero_hidden_is_minus_bv(tiny_rbm):
    v = np.array([1.0, 0.0, 1.0])
    assert energy(tiny_rbm, v, np.zeros(2)) == pytest.approx(-(tiny_rbm.b @ v), abs=0)


def test_energy_matches_explicit_sums(tiny_rbm):
    for v in all_states(3):
        for h in all_states(2):
            assert energy(tiny_rbm, v, h) == pytest.approx(brute_energy(tiny_rbm, v, h), abs=1e-12)


def test_energy_dimension_mismatch(tiny_rbm):
    with pytest.raises(DimensionError):
        energy(tiny_rbm, [1, 0], [0, 1])


def test_params_reject_bad_shapes_and_nan():
    with pytest.raises(DimensionError):
        RbmParams(np.zeros((2, 3)), np.zeros(3), np.zeros(3))
    with pytest.raises(InvalidArgumentError):
        RbmParams([[np.nan]], [0.0], [0.0])


def test_params_are_read_only(tiny_rbm):
    with pytest.raises(ValueError):
        tiny_rbm.W[0, 0] = 1.0


# ---------------------------------------------------------- conditionals


def test_hidden_probs_zero_params():
    np.testing.assert_array_equal(hidden_probs(RbmParams.zeros(3, 4), [1, 0, 1]), 0.5)


def test_hidden_probs_saturation():
    p = RbmParams(np.zeros((2, 2)), np.zeros(2), [100.0, 0.0])
    assert hidden_probs(p, [0, 1])[0] >= 1 - 1e-40


def test_visible_probs_zero_and_saturation():
    np.testing.assert_array_equal(visible_probs(RbmParams.zeros(3, 2), [1, 1]), 0.5)
    p = RbmParams(np.zeros((2, 2)), [-100.0, 0.0], np.zeros(2))
    assert visible_probs(p, [1, 0])[0] <= 1e-40


@pytest.mark.parametrize("seed", range(10))
def test_conditionals_match_bayes_rule(seed):
    params = random_rbm(3, 2, seed)
    P, _, vs, hs = brute_joint(params)
    for a, v in enumerate(vs):
        cond = P[a] / P[a].sum()
        expected = np.array([cond[hs[:, j] == 1].sum() for j in range(2)])
        np.testing.assert_allclose(hidden_probs(params, v), expected, rtol=0, atol=1e-10)
    for b, h in enumerate(hs):
        cond = P[:, b] / P[:, b].sum()
        expected = np.array([cond[vs[:, i] == 1].sum() for i in range(3)])
        np.testing.assert_allclose(visible_probs(params, h), expected, rtol=0, atol=1e-10)


def test_sigmoid_softplus_are_overflow_safe():
    x = np.array([-1000.0, -50.0, 0.0, 50.0, 1000.0])
    with np.errstate(over="raise"):
        s = sigmoid(x)
        sp = softplus(x)
    assert np.all(np.isfinite(s)) and np.all(np.isfinite(sp))
    assert sp[-1] == 1000.0 and sp[2] == pytest.approx(np.log(2))
    np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-15)


# ------------------------------------------------------------- sampling


def test_sample_bernoulli_degenerate():
    rng = make_rng(0)
    np.testing.assert_array_equal(sample_bernoulli(np.zeros(50), rng), 0)
    np.testing.assert_array_equal(sample_bernoulli(np.ones(50), rng), 1)


def test_sample_bernoulli_half():
    draws = sample_bernoulli(np.full((100_000, 4), 0.5), make_rng(1))
    means = draws.mean(axis=0)
    assert np.all((means >= 0.49) & (means <= 0.51))


@pytest.mark.parametrize("bad", [[-0.1, 0.5], [0.5, 1.01], [np.nan, 0.2]])
def test_sample_bernoulli_rejects_out_of_range(bad):
    with pytest.raises(InvalidArgumentError):
        sample_bernoulli(np.array(bad), make_rng(0))


def test_sample_bernoulli_deterministic():
    p = np.linspace(0, 1, 37)
    np.testing.assert_array_equal(sample_bernoulli(p, make_rng(5)), sample_bernoulli(p, make_rng(5)))


# ------------------------------------------------------------------ Gibbs


def test_gibbs_step_zero_params_is_uniform():
    params = RbmParams.zeros(3, 2)
    v = np.tile([1.0, 1.0, 0.0], (50_000, 1))
    state = gibbs_step(params, v, make_rng(3))
    np.testing.assert_allclose(state.v.mean(axis=0), 0.5, atol=0.01)
    np.testing.assert_array_equal(state.p_v, 0.5)
    np.testing.assert_array_equal(state.p_h, 0.5)


def test_gibbs_step_saturated():
    params = RbmParams(np.zeros((2, 3)), [50.0, -50.0], np.zeros(3))
    for start in ([0, 1], [1, 0], [0.3, 0.9]):
        state = gibbs_step(params, start, make_rng(0))
        np.testing.assert_array_equal(state.v, [1.0, 0.0])
        assert state.p_v[0] >= 1 - 1e-20 and state.p_v[1] <= 1e-20


def test_gibbs_state_invariants(tiny_rbm):
    state = gibbs_step(tiny_rbm, np.random.default_rng(0).random((100, 3)), make_rng(0))
    for arr in (state.v, state.h):
        assert set(np.unique(arr)) <= {0.0, 1.0}
    for arr in (state.p_v, state.p_h):
        assert np.all((arr >= 0) & (arr <= 1))


def test_one_step_kernel_matches_enumeration(tiny_rbm):
    K, _, vs = exact_kernel(tiny_rbm)
    trials = 200_000
    rng = make_rng(11)
    for a, v in enumerate(vs):
        out = gibbs_step(tiny_rbm, np.tile(v, (trials, 1)), rng).v
        empirical = np.bincount(state_index(out), minlength=8) / trials
        assert 0.5 * np.abs(empirical - K[a]).sum() < 0.01


@pytest.mark.parametrize("seed", range(5))
def test_exact_kernel_leaves_marginal_invariant(seed):
    K, pv, _ = exact_kernel(random_rbm(3, 2, seed))
    np.testing.assert_allclose(pv @ K, pv, rtol=0, atol=1e-10)


def test_gibbs_chain_k1_equals_step(tiny_rbm):
    v = np.random.default_rng(2).random((20, 3))
    a = gibbs_chain(tiny_rbm, v, 1, make_rng(9))
    b = gibbs_step(tiny_rbm, v, make_rng(9))
    for x, y in zip((a.v, a.h, a.p_h, a.p_v), (b.v, b.h, b.p_h, b.p_v)):
        np.testing.assert_array_equal(x, y)


def test_gibbs_chain_feeds_forward(tiny_rbm):
    v = np.array([[1.0, 0.0, 1.0]] * 5)
    rng = make_rng(4)
    manual = gibbs_step(tiny_rbm, v, rng)
    manual = gibbs_step(tiny_rbm, manual.v, rng)
    chained = gibbs_chain(tiny_rbm, v, 2, make_rng(4))
    np.testing.assert_array_equal(chained.v, manual.v)


@pytest.mark.parametrize("k", [0, -1, 1.5])
def test_gibbs_chain_rejects_bad_k(tiny_rbm, k):
    with pytest.raises(InvalidArgumentError):
        gibbs_chain(tiny_rbm, [1, 0, 1], k, make_rng(0))


def test_gibbs_chain_uncoupled_model_factorizes():
    b = np.array([-1.0, 0.3, 2.0])
    params = RbmParams(np.zeros((3, 2)), b, [0.5, -0.5])
    out = gibbs_chain(params, np.zeros((100_000, 3)), 3, make_rng(8)).v
    np.testing.assert_allclose(out.mean(axis=0), sigmoid(b), atol=0.006)
    # Independence: the joint of units 0 and 2 factorizes.
    joint = np.mean(out[:, 0] * out[:, 2])
    assert joint == pytest.approx(sigmoid(b[0]) * sigmoid(b[2]), abs=0.005)


def test_gibbs_chain_reaches_stationary_marginal(tiny_rbm):
    P, _, vs, _ = brute_joint(tiny_rbm)
    exact = P.sum(axis=1)
    v0 = make_rng(0).integers(0, 2, (50_000, 3)).astype(float)
    out = gibbs_chain(tiny_rbm, v0, 200, make_rng(21)).v
    empirical = np.bincount(state_index(out), minlength=8) / out.shape[0]
    assert 0.5 * np.abs(empirical - exact).sum() < 0.02


def test_stochastic_ops_are_deterministic(tiny_rbm):
    v = np.random.default_rng(3).random((10, 3))
    a = gibbs_chain(tiny_rbm, v, 7, make_rng(2**64 - 1))
    b = gibbs_chain(tiny_rbm, v, 7, make_rng(2**64 - 1))
    assert a.v.tobytes() == b.v.tobytes() and a.p_v.tobytes() == b.p_v.tobytes()


# ------------------------------------------------------------ free energy


def test_free_energy_zero_params():
    params = RbmParams.zeros(3, 5)
    for v in all_states(3):
        assert free_energy(params, v) == pytest.approx(-5 * np.log(2), abs=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_free_energy_identity(seed):
    params = random_rbm(3, 2, seed)
    hs = all_states(2)
    for v in all_states(3):
        direct = sum(np.exp(-brute_energy(params, v, h)) for h in hs)
        assert np.exp(-free_energy(params, v)) == pytest.approx(direct, rel=1e-12)


def test_free_energy_hidden_saturation():
    b = np.array([0.7, -0.2])
    params = RbmParams(np.zeros((2, 3)), b, np.full(3, -1000.0))
    v = np.array([1.0, 1.0])
    assert free_energy(params, v) == pytest.approx(-(b @ v), abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    nv=st.integers(1, 6),
    nh=st.integers(1, 6),
    scale=st.floats(0.1, 3.0),
)
def test_property_conditionals_and_free_energy(seed, nv, nh, scale):
    params = random_rbm(nv, nh, seed, scale)
    P, _, vs, hs = brute_joint(params)
    for a, v in enumerate(vs):
        cond = P[a] / P[a].sum()
        expected = (cond[:, None] * hs).sum(axis=0)
        np.testing.assert_allclose(hidden_probs(params, v), expected, atol=1e-10)
        direct = np.log(sum(np.exp(-brute_energy(params, v, h)) for h in hs))
        assert -free_energy(params, v) == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_batched_and_single_agree(tiny_rbm):
    vs = all_states(3)
    batched = free_energy(tiny_rbm, vs)
    single = np.array([free_energy(tiny_rbm, v) for v in vs])
    np.testing.assert_allclose(batched, single, rtol=1e-14)
