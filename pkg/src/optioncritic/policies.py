"""Boltzmann intra-option policies, sigmoid terminations, and the epsilon-soft policy over options."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import add_outer, as_vector, dot


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z):
    # split by sign so neither branch overflows
    if isinstance(z, (float, np.floating)):
        if z >= 0:
            return 1.0 / (1.0 + math.exp(-z))
        ez = math.exp(z)
        return ez / (1.0 + ez)
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


class IntraOptionPolicy:
    """Boltzmann policies pi_w(a|s) proportional to exp(theta[w, a] . phi(s) / tau)."""

    def __init__(self, weights: np.ndarray, temperature: float = 1.0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.weights = np.asarray(weights, dtype=float)
        self.temperature = float(temperature)

    @classmethod
    def zeros(cls, n_options, n_actions, n_features, temperature=1.0):
        return cls(np.zeros((n_options, n_actions, n_features)), temperature)

    @property
    def n_options(self) -> int:
        return self.weights.shape[0]

    @property
    def n_actions(self) -> int:
        return self.weights.shape[1]

    def action_probs(self, option: int, phi) -> np.ndarray:
        return softmax(dot(self.weights[option], phi) / self.temperature)

    def all_action_probs(self, phi) -> np.ndarray:
        """Action distributions of every option at once, shape (options, actions)."""
        return softmax(dot(self.weights, phi) / self.temperature)

    def sample(self, option: int, phi, rng: np.random.Generator) -> int:
        return sample_index(self.action_probs(option, phi), rng)

    def logpi_grad(self, option: int, phi, action: int, probs=None) -> np.ndarray:
        """Gradient of log pi(action|s) with respect to ``weights[option]``.

        Other options' slices have zero gradient and are not returned.
        """
        if probs is None:
            probs = self.action_probs(option, phi)
        coeff = -probs
        coeff[action] += 1.0
        return np.multiply.outer(coeff / self.temperature, as_vector(phi, self.weights.shape[2]))

    def entropy(self, option: int, phi) -> float:
        p = self.action_probs(option, phi)
        nz = p > 0
        return float(-(p[nz] * np.log(p[nz])).sum())

    def entropy_grad(self, option: int, phi) -> np.ndarray:
        return np.multiply.outer(self.entropy_coeff(option, phi), as_vector(phi, self.weights.shape[2]))

    def entropy_coeff(self, option: int, phi, probs=None) -> np.ndarray:
        """Per-action factor of ``entropy_grad`` (the part multiplying phi)."""
        # dH/dz_a = -p_a (log p_a + H), with z the tempered logits
        p = self.action_probs(option, phi) if probs is None else probs
        logp = np.log(np.maximum(p, np.finfo(float).tiny))
        return -p * (logp - (p * logp).sum()) / self.temperature

    def copy(self) -> "IntraOptionPolicy":
        return IntraOptionPolicy(self.weights.copy(), self.temperature)


class TerminationFunction:
    """Sigmoid terminations beta_w(s) = sigmoid(vartheta[w] . phi(s))."""

    def __init__(self, weights: np.ndarray):
        self.weights = np.asarray(weights, dtype=float)

    @classmethod
    def zeros(cls, n_options, n_features):
        return cls(np.zeros((n_options, n_features)))

    @property
    def n_options(self) -> int:
        return self.weights.shape[0]

    def term_prob(self, option: int, phi) -> float:
        return sigmoid(float(dot(self.weights[option], phi)))

    def all_term_probs(self, phi) -> np.ndarray:
        return sigmoid(dot(self.weights, phi))

    def beta_grad(self, option: int, phi) -> np.ndarray:
        b = self.term_prob(option, phi)
        return b * (1.0 - b) * as_vector(phi, self.weights.shape[1])

    def copy(self) -> "TerminationFunction":
        return TerminationFunction(self.weights.copy())


@dataclass
class PolicyOverOptions:
    """Epsilon-greedy selection over option values; ties go to the lowest index."""

    epsilon: float
    n_options: int

    def probs(self, q_row) -> np.ndarray:
        p = np.full(self.n_options, self.epsilon / self.n_options)
        p[int(np.argmax(q_row))] += 1.0 - self.epsilon
        return p

    def select(self, q_row, rng: np.random.Generator) -> int:
        if self.epsilon > 0 and rng.random() < self.epsilon:
            return int(rng.integers(self.n_options))
        return int(np.argmax(q_row))


def select_option(pomega: PolicyOverOptions, q_row, rng: np.random.Generator) -> int:
    return pomega.select(q_row, rng)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector (one uniform per call)."""
    u = rng.random()
    acc = 0.0
    probs = probs.tolist()
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    # rounding left the cdf just below 1: take the last action with mass
    return max(i for i, p in enumerate(probs) if p > 0)


def apply_intra_gradient(policy: IntraOptionPolicy, option: int, phi, coeff, scale=None) -> None:
    """``theta[option] += coeff ⊗ phi`` where ``coeff`` is a per-action vector."""
    add_outer(policy.weights[option], coeff, phi, scale)
