"""Option-value estimation with intra-option Q-learning.

Two storage variants share one interface:

* ``"qu"``: learns Q_U(s, w, a); Q_Omega is always the policy-weighted
  average of Q_U and is never stored.
* ``"qomega"``: learns Q_Omega(s, w) directly; Q_U is never stored and is
  estimated per transition by the one-step bootstrap target.

Weights are linear in the features; one-hot features make them tabular.
"""

from __future__ import annotations

import math

import numpy as np

from .features import add_outer, dot
from .policies import IntraOptionPolicy, PolicyOverOptions, TerminationFunction

DIVERGENCE_LIMIT = 1e8


class DivergenceError(RuntimeError):
    """Raised when a TD error or parameter update stops being finite or explodes."""


class Critic:
    def __init__(
        self,
        variant: str,
        n_options: int,
        n_actions: int,
        n_features: int,
        lr: float,
        gamma: float,
        lr_scale: np.ndarray | None = None,
        lr_schedule: str = "constant",
        v_mode: str = "greedy",
        epsilon: float = 0.0,
    ):
        if variant not in ("qu", "qomega"):
            raise ValueError(f"unknown critic variant {variant!r}")
        if lr_schedule not in ("constant", "visits"):
            raise ValueError(f"unknown learning-rate schedule {lr_schedule!r}")
        if v_mode not in ("greedy", "soft"):
            raise ValueError(f"unknown V_Omega mode {v_mode!r}")
        self.variant = variant
        self.n_options = n_options
        self.n_actions = n_actions
        self.lr = lr
        self.gamma = gamma
        self.lr_scale = lr_scale
        self.lr_schedule = lr_schedule
        self.v_mode = v_mode
        self.epsilon = epsilon
        shape = (n_options, n_actions, n_features) if variant == "qu" else (n_options, n_features)
        self.weights = np.zeros(shape)
        self.visits = np.zeros(shape, dtype=np.int64) if lr_schedule == "visits" else None

    # value queries ------------------------------------------------------

    def q_u(self, phi, option: int, action: int) -> float:
        if self.variant != "qu":
            raise TypeError("Q_U is not stored by a qomega critic")
        return float(dot(self.weights[option, action], phi))

    def q_omega_row(self, policy: IntraOptionPolicy, phi, probs=None) -> np.ndarray:
        """Q_Omega(s, .) for every option; ``probs`` may carry precomputed (options, actions) probabilities."""
        if self.variant == "qomega":
            return dot(self.weights, phi)
        if probs is None:
            probs = policy.all_action_probs(phi)
        return (probs * dot(self.weights, phi)).sum(axis=1)

    def q_omega(self, policy: IntraOptionPolicy, phi, option: int) -> float:
        if self.variant == "qomega":
            return float(dot(self.weights[option], phi))
        probs = policy.action_probs(option, phi)
        return float(probs @ dot(self.weights[option], phi))

    def v_omega(self, q_row: np.ndarray) -> float:
        if self.v_mode == "greedy":
            return float(q_row.max())
        pomega = PolicyOverOptions(self.epsilon, self.n_options)
        return float(pomega.probs(q_row) @ q_row)

    def advantage(self, q_row: np.ndarray) -> np.ndarray:
        return q_row - self.v_omega(q_row)

    # learning -----------------------------------------------------------

    def g1_target(self, reward: float, q_row_next: np.ndarray, beta_next: float, option: int, done: bool) -> float:
        """One-step intra-option Q-learning target given Q_Omega(s', .) and beta_w(s')."""
        if done:
            return float(reward)
        cont = (1.0 - beta_next) * q_row_next[option] + beta_next * q_row_next.max()
        return float(reward + self.gamma * cont)

    def update(
        self,
        phi,
        option: int,
        action: int,
        reward: float,
        phi_next,
        done: bool,
        policy: IntraOptionPolicy,
        termination: TerminationFunction,
        q_next: np.ndarray | None = None,
    ) -> tuple[float, float]:
        """Apply one intra-option Q-learning step; return ``(td_error, target)``.

        ``q_next`` may carry a precomputed Q_Omega(s', .) row.
        """
        if done:
            target = float(reward)
        else:
            if q_next is None:
                q_next = self.q_omega_row(policy, phi_next)
            beta_next = termination.term_prob(option, phi_next)
            target = self.g1_target(reward, q_next, beta_next, option, done)
        if self.variant == "qu":
            index = (option, action)
        else:
            index = (option,)
        delta = target - float(dot(self.weights[index], phi))
        if not math.isfinite(delta) or abs(delta) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"critic TD error {delta!r} at option {option}, action {action}")
        self._step(index, phi, delta)
        return delta, target

    def _step(self, index, phi, delta: float) -> None:
        w = self.weights[index]
        if self.lr_schedule == "visits":
            if not isinstance(phi, (int, np.integer)):
                raise TypeError("visit-count learning rates need one-hot features")
            n = self.visits[index][phi]
            self.visits[index][phi] = n + 1
            w[phi] += delta / (n + 1)
            return
        add_outer(w, self.lr * delta, phi, self.lr_scale)


def critic_update(critic: Critic, transition, policy, termination) -> float:
    """Functional form of :meth:`Critic.update` for a ``(s, w, a, r, s', done)`` tuple of features."""
    phi, option, action, reward, phi_next, done = transition
    delta, _ = critic.update(phi, option, action, reward, phi_next, done, policy, termination)
    return delta
