"""Exact option values and gradients on small finite MDPs.

Everything here works on the augmented chain over (state, option) pairs.
The policy over options is passed in as an explicit, frozen table
``pi_omega[s, w]``; differentiation is only ever with respect to the
intra-option policy weights and the termination weights.

Pair ``(s, w)`` is flattened to index ``s * n_options + w``. Terminal
states have all-zero outgoing rows and zero value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import TabularMDP
from .policies import IntraOptionPolicy, TerminationFunction, sigmoid, softmax

MAX_PAIRS = 2000


@dataclass
class OptionModel:
    """Option parameters plus the feature matrix ``features[s]`` they act on."""

    policy: IntraOptionPolicy
    termination: TerminationFunction
    features: np.ndarray

    @property
    def n_options(self) -> int:
        return self.policy.n_options

    def action_probs(self) -> np.ndarray:
        """pi[s, w, a]."""
        logits = np.einsum("waf,sf->swa", self.policy.weights, self.features)
        return softmax(logits / self.policy.temperature)

    def term_probs(self) -> np.ndarray:
        """beta[s, w]."""
        return sigmoid(self.features @ self.termination.weights.T)

    def with_weights(self, theta=None, vartheta=None) -> "OptionModel":
        pol = IntraOptionPolicy(self.policy.weights if theta is None else theta, self.policy.temperature)
        term = TerminationFunction(self.termination.weights if vartheta is None else vartheta)
        return OptionModel(pol, term, self.features)


@dataclass
class AugmentedChain:
    """Discounted one-step operators over (state, option) pairs.

    ``same[(s, w), (s', w')]``: from the pair executing at time t to the
    pair executing at t+1.
    ``shifted[(s, w_prev), (s', w)]``: from arriving in s with option
    w_prev to arriving in s' while executing w.
    """

    same: np.ndarray
    shifted: np.ndarray
    n_states: int
    n_options: int
    gamma: float


@dataclass
class ExactValues:
    q_u: np.ndarray  # (s, w, a)
    q_omega: np.ndarray  # (s, w)
    u: np.ndarray  # (w, s)
    v_omega: np.ndarray  # (s,)
    rho: float


def epsilon_greedy_table(q_omega: np.ndarray, epsilon: float) -> np.ndarray:
    """Materialize epsilon-greedy selection probabilities pi_omega[s, w]."""
    n_states, n_options = q_omega.shape
    table = np.full((n_states, n_options), epsilon / n_options)
    table[np.arange(n_states), np.argmax(q_omega, axis=1)] += 1.0 - epsilon
    return table


def _continuation(beta: np.ndarray, pi_omega: np.ndarray) -> np.ndarray:
    """c[s, w, w'] = (1 - beta_w(s)) 1{w = w'} + beta_w(s) pi_omega(w'|s)."""
    n_options = beta.shape[1]
    eye = np.eye(n_options)
    return (1.0 - beta)[:, :, None] * eye[None] + beta[:, :, None] * pi_omega[:, None, :]


def build_chain(mdp: TabularMDP, model: OptionModel, pi_omega: np.ndarray) -> AugmentedChain:
    n_states, n_options = mdp.n_states, model.n_options
    if n_states * n_options > MAX_PAIRS:
        raise ValueError(f"{n_states * n_options} state-option pairs exceeds the oracle cap of {MAX_PAIRS}")
    pi = model.action_probs()
    cont = _continuation(model.term_probs(), pi_omega)
    live = (~mdp.terminal).astype(float)
    gamma = mdp.discount
    # state step under option w: K[s, w, s'] = gamma * sum_a pi[s, w, a] P[s, a, s']
    K = gamma * np.einsum("swa,sat->swt", pi, mdp.transition) * live[:, None, None]
    same = np.einsum("swt,twv->swtv", K, cont)
    # arrive in s with w_prev, continue/reselect to w, then step under w
    shifted = np.einsum("spw,swt->sptw", cont, K)
    n = n_states * n_options
    return AugmentedChain(same.reshape(n, n), shifted.reshape(n, n), n_states, n_options, gamma)


def _pair_vector(start, n_states: int, n_options: int) -> np.ndarray:
    if isinstance(start, tuple):
        e = np.zeros(n_states * n_options)
        e[start[0] * n_options + start[1]] = 1.0
        return e
    start = np.asarray(start, dtype=float)
    if start.shape != (n_states, n_options):
        raise ValueError(f"start weights must have shape {(n_states, n_options)}")
    return start.reshape(-1)


def default_start(mdp: TabularMDP, pi_omega: np.ndarray) -> np.ndarray:
    """Start distribution over pairs: s0 ~ start_dist, w0 ~ pi_omega(.|s0)."""
    return mdp.start_dist[:, None] * pi_omega


def exact_values(mdp: TabularMDP, model: OptionModel, pi_omega: np.ndarray, start=None) -> ExactValues:
    """Solve for Q_Omega with a dense direct solve and derive Q_U, U, V_Omega and rho."""
    if not mdp.discount < 1.0:
        raise ValueError("exact values need gamma < 1")
    chain = build_chain(mdp, model, pi_omega)
    pi = model.action_probs()
    live = ~mdp.terminal
    r_pi = np.einsum("swa,sa->sw", pi, mdp.reward) * live[:, None]
    A = np.eye(chain.same.shape[0]) - chain.same
    try:
        q_omega = np.linalg.solve(A, r_pi.reshape(-1)).reshape(mdp.n_states, model.n_options)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular option-value system: {exc}") from None
    v_omega = (pi_omega * q_omega).sum(axis=1)
    beta = model.term_probs()
    u = ((1.0 - beta) * q_omega + beta * v_omega[:, None]).T * live[None, :]
    q_u = mdp.reward[:, None, :] + mdp.discount * np.einsum("sat,wt->swa", mdp.transition, u)
    q_u[~live] = 0.0
    if start is None:
        start = default_start(mdp, pi_omega)
    rho = float(_pair_vector(start, mdp.n_states, model.n_options) @ q_omega.reshape(-1))
    return ExactValues(q_u, q_omega, u, v_omega, rho)


def residuals(mdp: TabularMDP, model: OptionModel, pi_omega: np.ndarray, values: ExactValues) -> dict:
    """Max absolute violation of each defining equation."""
    pi = model.action_probs()
    beta = model.term_probs()
    live = ~mdp.terminal
    eq1 = values.q_omega - (pi * values.q_u).sum(axis=2)
    rhs2 = mdp.reward[:, None, :] + mdp.discount * np.einsum("sat,wt->swa", mdp.transition, values.u)
    eq2 = (values.q_u - rhs2)[live]
    eq3 = values.u.T - ((1.0 - beta) * values.q_omega + beta * values.v_omega[:, None])
    eq_v = values.v_omega - (pi_omega * values.q_omega).sum(axis=1)
    return {
        "q_omega": float(np.abs(eq1[live]).max(initial=0.0)),
        "q_u": float(np.abs(eq2).max(initial=0.0)),
        "u": float(np.abs(eq3[live]).max(initial=0.0)),
        "v_omega": float(np.abs(eq_v).max(initial=0.0)),
    }


def discounted_weighting(chain: AugmentedChain, start, conditioning: str = "same") -> np.ndarray:
    """mu = e_start^T (I - P)^{-1}, returned with shape (states, options)."""
    P = {"same": chain.same, "shifted": chain.shifted}[conditioning]
    e = _pair_vector(start, chain.n_states, chain.n_options)
    mu = np.linalg.solve(np.eye(P.shape[0]) - P.T, e)
    return mu.reshape(chain.n_states, chain.n_options)


def truncated_weighting(chain: AugmentedChain, start, conditioning: str = "same", horizon: int = 200) -> np.ndarray:
    """sum_{t <= horizon} e_start^T P^t, accumulated one discounted step at a time."""
    P = {"same": chain.same, "shifted": chain.shifted}[conditioning]
    x = _pair_vector(start, chain.n_states, chain.n_options)
    total = x.copy()
    for _ in range(horizon):
        x = x @ P
        total += x
    return total.reshape(chain.n_states, chain.n_options)


def intra_option_gradient(mdp: TabularMDP, model: OptionModel, pi_omega: np.ndarray, start=None) -> np.ndarray:
    """Gradient of rho with respect to the intra-option policy weights, shape (w, a, f)."""
    if start is None:
        start = default_start(mdp, pi_omega)
    values = exact_values(mdp, model, pi_omega, start)
    mu = discounted_weighting(build_chain(mdp, model, pi_omega), start, "same")
    pi = model.action_probs()
    # sum_a dpi(a|s)/dtheta Q_U(a) = pi(a) (Q_U(a) - Q_Omega) phi(s) / tau
    local = pi * (values.q_u - values.q_omega[:, :, None]) / model.policy.temperature
    return np.einsum("sw,swa,sf->waf", mu, local, model.features)


def termination_gradient(mdp: TabularMDP, model: OptionModel, pi_omega: np.ndarray, start: tuple) -> np.ndarray:
    """Gradient of U(w0, s1) with respect to the termination weights, shape (w, f).

    ``start`` is the arrival pair ``(s1, w0)``.
    """
    values = exact_values(mdp, model, pi_omega)
    mu = discounted_weighting(build_chain(mdp, model, pi_omega), start, "shifted")
    beta = model.term_probs()
    adv = values.q_omega - values.v_omega[:, None]
    return -np.einsum("sw,sw,sf->wf", mu, beta * (1.0 - beta) * adv, model.features)


def intra_q_fixed_point(mdp: TabularMDP, model: OptionModel, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """Fixed point of the expected intra-option Q-learning update, Q_U[s, w, a].

    Q_U = r + gamma sum_s' P [(1 - beta) Q_Omega(s', w) + beta max_w' Q_Omega(s', w')]
    with Q_Omega the policy-weighted average of Q_U.
    """
    pi = model.action_probs()
    beta = model.term_probs()
    live = ~mdp.terminal
    q_u = np.zeros((mdp.n_states, model.n_options, mdp.n_actions))
    for _ in range(max_iter):
        q_omega = (pi * q_u).sum(axis=2)
        u = ((1.0 - beta) * q_omega + beta * q_omega.max(axis=1, keepdims=True)) * live[:, None]
        new = mdp.reward[:, None, :] + mdp.discount * np.einsum("sat,tw->swa", mdp.transition, u)
        new[~live] = 0.0
        diff = np.abs(new - q_u).max()
        q_u = new
        if diff <= tol:
            return q_u
    raise RuntimeError(f"fixed-point iteration did not reach {tol} in {max_iter} sweeps")


# finite-difference checks -----------------------------------------------


def central_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        g[i] = (up - down) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|a - n| / max(max|a|, max|n|, 1e-8), taken over the whole tensor."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def rho_objective(mdp, model: OptionModel, pi_omega, start):
    def f(theta):
        return exact_values(mdp, model.with_weights(theta=theta), pi_omega, start).rho

    return f


def arrival_objective(mdp, model: OptionModel, pi_omega, start: tuple):
    s1, w0 = start

    def f(vartheta):
        return exact_values(mdp, model.with_weights(vartheta=vartheta), pi_omega).u[w0, s1]

    return f
