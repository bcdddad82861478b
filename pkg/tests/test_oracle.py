import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optioncritic import oracle
from optioncritic.mdp import TabularMDP
from optioncritic.oracle import OptionModel
from optioncritic.policies import IntraOptionPolicy, TerminationFunction
from optioncritic.verification import random_instance

from conftest import random_mdp

seeds = st.integers(0, 2**32 - 1)


def make_model(rng, n_states, n_actions, n_options, features=None, temperature=1.0):
    features = np.eye(n_states) if features is None else features
    f = features.shape[1]
    return OptionModel(
        IntraOptionPolicy(rng.normal(size=(n_options, n_actions, f)), temperature),
        TerminationFunction(rng.normal(size=(n_options, f))),
        features,
    )


def policy_chain(mdp, model):
    pi = model.action_probs()[:, 0, :]
    return np.einsum("sa,sat->st", pi, mdp.transition)


# build_chain


def test_single_option_collapses_to_policy_chain():
    rng = np.random.default_rng(0)
    mdp = random_mdp(rng, n_states=4, n_actions=3, gamma=0.7)
    model = make_model(rng, 4, 3, 1)
    chain = oracle.build_chain(mdp, model, np.ones((4, 1)))
    np.testing.assert_allclose(chain.same, 0.7 * policy_chain(mdp, model), atol=1e-15)


def test_always_terminating_options_reselect_every_step():
    rng = np.random.default_rng(1)
    mdp = random_mdp(rng, n_states=3, n_actions=2, gamma=0.8)
    model = make_model(rng, 3, 2, 2)
    model.termination.weights[:] = 1e3  # beta = 1
    pi_omega = oracle.epsilon_greedy_table(rng.normal(size=(3, 2)), 0.3)
    chain = oracle.build_chain(mdp, model, pi_omega)
    pi = model.action_probs()
    expected = 0.8 * np.einsum("swa,sat,tv->swtv", pi, mdp.transition, pi_omega).reshape(6, 6)
    np.testing.assert_allclose(chain.same, expected, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_chain_rows_sum_to_gamma(seed):
    rng = np.random.default_rng(seed)
    terminal = [False, False, rng.random() < 0.5]
    mdp = random_mdp(rng, n_states=3, n_actions=2, gamma=float(rng.uniform(0.1, 0.99)), terminal=terminal)
    model = make_model(rng, 3, 2, 2)
    pi_omega = oracle.epsilon_greedy_table(rng.normal(size=(3, 2)), 0.2)
    chain = oracle.build_chain(mdp, model, pi_omega)
    live = ~mdp.terminal
    for P in (chain.same, chain.shifted):
        assert np.all(P >= 0)
        rows = P.sum(axis=1).reshape(3, 2)
        np.testing.assert_allclose(rows[live], mdp.discount, atol=1e-12)
        assert np.all(rows[~live] == 0)


# exact_values


def test_zero_rewards_give_zero_values():
    rng = np.random.default_rng(2)
    mdp = random_mdp(rng)
    mdp = TabularMDP(mdp.transition, np.zeros_like(mdp.reward), mdp.discount, mdp.start_dist)
    model = make_model(rng, 4, 2, 2)
    vals = oracle.exact_values(mdp, model, np.full((4, 2), 0.5))
    for arr in (vals.q_u, vals.q_omega, vals.u, vals.v_omega):
        assert np.all(arr == 0)
    assert vals.rho == 0
    np.testing.assert_array_equal(oracle.intra_q_fixed_point(mdp, model), 0.0)
    np.testing.assert_array_equal(oracle.intra_option_gradient(mdp, model, np.full((4, 2), 0.5), (0, 0)), 0.0)


def test_geometric_series_single_state():
    mdp = TabularMDP.build(np.ones((1, 1, 1)), [[1.0]], 0.5, [1.0])
    model = make_model(np.random.default_rng(3), 1, 1, 1)
    vals = oracle.exact_values(mdp, model, np.ones((1, 1)), (0, 0))
    assert vals.q_omega[0, 0] == pytest.approx(2.0, abs=1e-14)
    assert vals.rho == pytest.approx(2.0, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_exact_values_satisfy_definitions(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, n_states=5, n_actions=2, gamma=0.9)
    model = make_model(rng, 5, 2, 2)
    pi_omega = oracle.epsilon_greedy_table(rng.normal(size=(5, 2)), 0.1)
    vals = oracle.exact_values(mdp, model, pi_omega)
    assert max(oracle.residuals(mdp, model, pi_omega, vals).values()) <= 1e-10


def test_gamma_one_rejected():
    mdp = TabularMDP(np.ones((1, 1, 1)), [[1.0]], 1.0, [1.0])
    with pytest.raises(ValueError):
        oracle.exact_values(mdp, make_model(np.random.default_rng(0), 1, 1, 1), np.ones((1, 1)))


# discounted weighting


def test_weighting_gamma_zero_is_start_indicator():
    rng = np.random.default_rng(4)
    mdp = random_mdp(rng, n_states=3, gamma=0.0)
    model = make_model(rng, 3, 2, 2)
    chain = oracle.build_chain(mdp, model, np.full((3, 2), 0.5))
    expected = np.zeros((3, 2))
    expected[1, 0] = 1
    np.testing.assert_array_equal(oracle.discounted_weighting(chain, (1, 0), "same"), expected)
    np.testing.assert_array_equal(oracle.discounted_weighting(chain, (1, 0), "shifted"), expected)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_weighting_bounds_and_series(seed):
    rng = np.random.default_rng(seed)
    gamma = float(rng.uniform(0.1, 0.9))
    mdp = random_mdp(rng, n_states=4, gamma=gamma)
    model = make_model(rng, 4, 2, 3)
    chain = oracle.build_chain(mdp, model, oracle.epsilon_greedy_table(rng.normal(size=(4, 3)), 0.2))
    for cond in ("same", "shifted"):
        mu = oracle.discounted_weighting(chain, (2, 1), cond)
        assert np.all(mu >= -1e-15)
        assert mu.sum() <= 1 / (1 - gamma) + 1e-9
        series = oracle.truncated_weighting(chain, (2, 1), cond, 200)
        assert np.abs(mu - series).max() <= gamma**201 / (1 - gamma) + 1e-12


def test_shifted_weighting_from_same_when_always_terminating():
    rng = np.random.default_rng(5)
    inst = random_instance(rng)
    inst.model.termination.weights[:] = 1e3
    from optioncritic.verification import conditioning_gap

    assert conditioning_gap(inst.mdp, inst.model, inst.pi_omega, inst.start) <= 1e-10


# gradients


def test_exact_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(5):
        inst = random_instance(rng)
        args = inst.mdp, inst.model, inst.pi_omega, inst.start
        g1 = oracle.intra_option_gradient(*args)
        n1 = oracle.central_difference(oracle.rho_objective(*args), inst.model.policy.weights.copy())
        assert oracle.relative_error(g1, n1) <= 1e-5
        g2 = oracle.termination_gradient(*args)
        n2 = oracle.central_difference(oracle.arrival_objective(*args), inst.model.termination.weights.copy())
        assert oracle.relative_error(g2, n2) <= 1e-5


def test_intra_gradient_with_start_distribution():
    rng = np.random.default_rng(7)
    inst = random_instance(rng)
    start = oracle.default_start(inst.mdp, inst.pi_omega)
    args = inst.mdp, inst.model, inst.pi_omega, start
    g = oracle.intra_option_gradient(*args)
    n = oracle.central_difference(oracle.rho_objective(*args), inst.model.policy.weights.copy())
    assert oracle.relative_error(g, n) <= 1e-5


def test_single_option_has_zero_termination_gradient():
    rng = np.random.default_rng(8)
    mdp = random_mdp(rng, n_states=4, gamma=0.9)
    model = make_model(rng, 4, 2, 1)
    g = oracle.termination_gradient(mdp, model, np.ones((4, 1)), (0, 0))
    np.testing.assert_allclose(g, 0.0, atol=1e-15)


def test_intra_gradient_support_is_visited_state():
    # state 0 loops on itself; only its slice of theta can matter
    P = np.zeros((3, 2, 3))
    P[0, :, 0] = 1.0
    P[1, :, 2] = P[2, :, 1] = 1.0
    mdp = TabularMDP.build(P, np.random.default_rng(9).normal(size=(3, 2)), 0.9, [1, 0, 0])
    model = make_model(np.random.default_rng(10), 3, 2, 2)
    g = oracle.intra_option_gradient(mdp, model, np.full((3, 2), 0.5), (0, 1))
    assert np.abs(g[..., 0]).max() > 0
    np.testing.assert_array_equal(g[..., 1:], 0.0)


def test_dominated_option_gradient_raises_termination_logits():
    # option 1 is forced onto a zero-reward action everywhere, option 0 onto the rewarding one
    n_states = 3
    P = np.full((n_states, 2, n_states), 1.0 / n_states)
    R = np.zeros((n_states, 2))
    R[:, 0] = 1.0
    mdp = TabularMDP.build(P, R, 0.9, np.full(n_states, 1 / n_states))
    theta = np.zeros((2, 2, 1))
    theta[0, 0] = 5.0
    theta[1, 1] = 5.0
    model = OptionModel(IntraOptionPolicy(theta, 1.0), TerminationFunction(np.zeros((2, 1))), np.ones((n_states, 1)))
    pi_omega = np.tile([1.0, 0.0], (n_states, 1))
    g = oracle.termination_gradient(mdp, model, pi_omega, (0, 1))
    # descent along -dU/dvartheta per the update sign convention raises option 1's logit
    assert g[1, 0] > 0
    logits_after = model.termination.weights + 0.1 * g
    assert logits_after[1, 0] > model.termination.weights[1, 0]


def test_fixed_point_always_terminating_is_q_over_options():
    rng = np.random.default_rng(11)
    mdp = random_mdp(rng, n_states=4, n_actions=2, gamma=0.8)
    model = make_model(rng, 4, 2, 2)
    model.termination.weights[:] = 1e3
    fixed = oracle.intra_q_fixed_point(mdp, model)
    pi = model.action_probs()
    q_omega = (pi * fixed).sum(axis=2)
    rhs = mdp.reward[:, None, :] + 0.8 * np.einsum("sat,t->sa", mdp.transition, q_omega.max(axis=1))[:, None, :]
    np.testing.assert_allclose(fixed, np.broadcast_to(rhs, fixed.shape), atol=1e-11)


def test_fixed_point_matches_greedy_exact_values():
    rng = np.random.default_rng(12)
    inst = random_instance(rng)
    fixed = oracle.intra_q_fixed_point(inst.mdp, inst.model)
    greedy = oracle.epsilon_greedy_table((inst.model.action_probs() * fixed).sum(axis=2), 0.0)
    vals = oracle.exact_values(inst.mdp, inst.model, greedy)
    np.testing.assert_allclose(vals.q_u, fixed, atol=1e-9)


def test_pair_cap():
    mdp = random_mdp(np.random.default_rng(0), n_states=3)
    model = make_model(np.random.default_rng(0), 3, 2, 1)
    model = OptionModel(IntraOptionPolicy(np.zeros((700, 2, 3))), TerminationFunction(np.zeros((700, 3))), np.eye(3))
    with pytest.raises(ValueError, match="cap"):
        oracle.build_chain(mdp, model, np.full((3, 700), 1 / 700))
