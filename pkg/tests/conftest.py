import numpy as np
import pytest

from optioncritic.mdp import TabularMDP


@pytest.fixture
def chain2():
    """Two states, one action: s0 -> s1 (terminal) with reward 2."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    return TabularMDP.build(P, [[2.0], [0.0]], 0.9, [1.0, 0.0], [False, True])


def random_mdp(rng, n_states=4, n_actions=2, gamma=0.9, terminal=None):
    P = rng.random((n_states, n_actions, n_states))
    P /= P.sum(axis=2, keepdims=True)
    R = rng.normal(size=(n_states, n_actions))
    start = np.full(n_states, 1.0 / n_states)
    if terminal is not None:
        start[terminal] = 0
        start /= start.sum()
    return TabularMDP.build(P, R, gamma, start, terminal)
