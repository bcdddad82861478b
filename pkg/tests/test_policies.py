import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optioncritic.mdp import make_rng
from optioncritic.policies import IntraOptionPolicy, PolicyOverOptions, TerminationFunction


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return np.abs(a - b).max() / max(np.abs(a).max(), np.abs(b).max(), 1e-8)


# action_probs


def test_zero_weights_uniform():
    pol = IntraOptionPolicy.zeros(2, 4, 3, temperature=0.37)
    np.testing.assert_allclose(pol.action_probs(1, np.ones(3)), [0.25] * 4)


def test_closed_form_softmax():
    pol = IntraOptionPolicy(np.array([[[math.log(2)], [0.0]]]), 1.0)
    np.testing.assert_allclose(pol.action_probs(0, np.array([1.0])), [2 / 3, 1 / 3], rtol=1e-14)


def test_low_temperature_no_overflow():
    logits = np.array([1.3, 0.2, 0.9, -0.4])
    pol = IntraOptionPolicy(logits[None, :, None], 0.001)
    p = pol.action_probs(0, np.array([1.0]))
    with mpmath.workdps(50):
        z = [mpmath.e ** (mpmath.mpf(float(v)) / mpmath.mpf("0.001")) for v in logits]
        ref = [float(v / sum(z)) for v in z]
    assert np.all(np.isfinite(p))
    assert p.max() >= 1 - 1e-6
    np.testing.assert_allclose(p, ref, rtol=1e-12, atol=1e-300)


def test_one_hot_index_matches_dense():
    rng = np.random.default_rng(0)
    pol = IntraOptionPolicy(rng.normal(size=(3, 4, 5)), 0.5)
    np.testing.assert_allclose(pol.action_probs(1, 2), pol.action_probs(1, np.eye(5)[2]))


# logpi_grad


def test_logpi_grad_uniform_two_actions():
    pol = IntraOptionPolicy.zeros(1, 2, 1)
    np.testing.assert_allclose(pol.logpi_grad(0, np.array([1.0]), 0), [[0.5], [-0.5]])


policy_draws = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(policy_draws)
def test_score_function_identity(seed):
    rng = np.random.default_rng(seed)
    pol = IntraOptionPolicy(rng.normal(size=(2, 3, 4)), rng.uniform(0.2, 2.0))
    phi = rng.normal(size=4)
    p = pol.action_probs(1, phi)
    total = sum(p[a] * pol.logpi_grad(1, phi, a) for a in range(3))
    np.testing.assert_allclose(total, 0.0, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(policy_draws)
def test_logpi_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    pol = IntraOptionPolicy(rng.normal(size=(2, 3, 4)), rng.uniform(0.5, 2.0))
    phi = rng.normal(size=4)
    a = int(rng.integers(3))
    w = pol.weights[1]
    numeric = central_diff(lambda: math.log(pol.action_probs(1, phi)[a]), w)
    assert rel_err(pol.logpi_grad(1, phi, a), numeric) <= 1e-4


# entropy


def test_entropy_values():
    pol = IntraOptionPolicy.zeros(1, 4, 2)
    assert pol.entropy(0, np.ones(2)) == pytest.approx(math.log(4))
    np.testing.assert_allclose(pol.entropy_grad(0, np.ones(2)), 0.0, atol=1e-8)
    sharp = IntraOptionPolicy(np.array([[[12.0], [0.0], [0.0], [0.0]]]), 1.0)
    p = sharp.action_probs(0, np.array([1.0]))
    assert p.max() >= 1 - 1e-4
    assert sharp.entropy(0, np.array([1.0])) <= 1e-3


@settings(max_examples=100, deadline=None)
@given(policy_draws)
def test_entropy_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    pol = IntraOptionPolicy(rng.normal(size=(2, 3, 4)), rng.uniform(0.5, 2.0))
    phi = rng.normal(size=4)
    numeric = central_diff(lambda: pol.entropy(0, phi), pol.weights[0])
    assert rel_err(pol.entropy_grad(0, phi), numeric) <= 1e-4


# terminations


def test_term_prob_closed_forms():
    tf = TerminationFunction.zeros(2, 3)
    assert tf.term_prob(0, np.ones(3)) == 0.5
    tf = TerminationFunction(np.array([[math.log(3)]]))
    assert tf.term_prob(0, np.array([1.0])) == pytest.approx(0.75, rel=1e-14)


@settings(max_examples=100, deadline=None)
# beyond |z| ~ 36.7 the sigmoid rounds to exactly 0 or 1 in float64
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_term_prob_monotone_and_open_interval(z1, z2):
    tf = TerminationFunction(np.array([[z1], [z2]]))
    b1, b2 = tf.term_prob(0, np.array([1.0])), tf.term_prob(1, np.array([1.0]))
    assert 0.0 < b1 < 1.0 and 0.0 < b2 < 1.0
    if z1 < z2:
        assert b1 <= b2


def test_beta_grad_values():
    tf = TerminationFunction.zeros(1, 2)
    np.testing.assert_allclose(tf.beta_grad(0, np.array([1.0, 0.0])), [0.25, 0.0])
    for z in (35.0, -35.0):
        tf = TerminationFunction(np.array([[z, 0.0]]))
        phi = np.array([1.0, 2.0])
        g = tf.beta_grad(0, phi)
        assert np.all(np.isfinite(g))
        assert np.abs(g).max() <= 1e-12 * np.linalg.norm(phi)


@settings(max_examples=100, deadline=None)
@given(policy_draws)
def test_beta_grad_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    tf = TerminationFunction(rng.normal(size=(2, 4)))
    phi = rng.normal(size=4)
    numeric = central_diff(lambda: tf.term_prob(1, phi), tf.weights[1])
    analytic = tf.beta_grad(1, phi)
    assert np.abs(analytic - numeric).max() <= 1e-7
    assert rel_err(analytic, numeric) <= 1e-4


# policy over options


def test_greedy_selection_and_ties():
    rng = make_rng(0)
    assert {PolicyOverOptions(0.0, 3).select(np.array([1.0, 3.0, 2.0]), rng) for _ in range(50)} == {1}
    assert PolicyOverOptions(0.0, 2).select(np.array([5.0, 5.0]), rng) == 0


def test_uniform_selection_frequencies():
    rng = make_rng(1)
    pomega = PolicyOverOptions(1.0, 4)
    q = np.array([0.0, 9.0, 1.0, 2.0])
    counts = np.bincount([pomega.select(q, rng) for _ in range(100_000)], minlength=4)
    np.testing.assert_allclose(counts / 100_000, 0.25, atol=0.01)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=6), st.floats(-1e3, 1e3), st.floats(0, 1))
def test_selection_floor_and_shift_invariance(q, shift, eps):
    q = np.array(q)
    pomega = PolicyOverOptions(eps, len(q))
    p = pomega.probs(q)
    assert np.all(p >= eps / len(q) - 1e-15)
    assert p.sum() == pytest.approx(1.0)
    greedy = PolicyOverOptions(0.0, len(q))
    assert greedy.select(q, make_rng(0)) == greedy.select(q + shift, make_rng(0)) or np.isclose(
        np.sort(q)[-1], np.sort(q)[-2] if len(q) > 1 else -np.inf
    )


@settings(max_examples=100, deadline=None)
@given(policy_draws)
def test_probabilities_valid_everywhere(seed):
    rng = np.random.default_rng(seed)
    pol = IntraOptionPolicy(rng.normal(size=(3, 4, 5)), rng.uniform(0.5, 2.0))
    phi = rng.normal(size=5)
    for w in range(3):
        p = pol.action_probs(w, phi)
        assert abs(p.sum() - 1.0) <= 1e-10 and np.all(p > 0)
