"""Stochastic gradient steps for intra-option policies and termination functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .critic import DivergenceError
from .features import add_outer
from .policies import IntraOptionPolicy, TerminationFunction


@dataclass
class ActorConfig:
    lr_intra: float = 0.25
    lr_term: float = 0.25
    use_baseline: bool = False
    xi: float = 0.0
    entropy_coeff: float = 0.0

    def __post_init__(self):
        if self.lr_intra < 0 or self.lr_term < 0:
            raise ValueError("learning rates must be non-negative")
        if self.xi < 0 or self.entropy_coeff < 0:
            raise ValueError("xi and entropy_coeff must be non-negative")


def intra_policy_step(
    policy: IntraOptionPolicy,
    cfg: ActorConfig,
    phi,
    option: int,
    action: int,
    qu_sample: float,
    baseline: float = 0.0,
    probs: np.ndarray | None = None,
    lr_scale=None,
) -> None:
    """theta[w] += lr * (grad log pi(a|s) * (Q_U - b) + eta * grad H).

    Updates ``policy`` in place.
    """
    if cfg.lr_intra == 0.0:
        return
    if not math.isfinite(qu_sample):
        raise DivergenceError(f"non-finite Q_U sample {qu_sample!r}")
    if probs is None:
        probs = policy.action_probs(option, phi)
    weight = qu_sample - (baseline if cfg.use_baseline else 0.0)
    coeff = -probs * weight
    coeff[action] += weight
    coeff /= policy.temperature
    if cfg.entropy_coeff > 0.0:
        coeff += cfg.entropy_coeff * policy.entropy_coeff(option, phi, probs)
    coeff *= cfg.lr_intra
    if not math.isfinite(float(coeff.sum())):
        raise DivergenceError(f"non-finite intra-option update for option {option}")
    add_outer(policy.weights[option], coeff, phi, lr_scale)


def termination_step(
    termination: TerminationFunction,
    cfg: ActorConfig,
    phi_next,
    option: int,
    advantage: float,
    beta: float | None = None,
    lr_scale=None,
) -> None:
    """vartheta[w] -= lr * dbeta(s')/dvartheta * (A(s', w) + xi), in place.

    A negative advantage (beyond the margin) raises the termination probability.
    """
    if cfg.lr_term == 0.0:
        return
    if not math.isfinite(advantage):
        raise DivergenceError(f"non-finite advantage {advantage!r}")
    if beta is None:
        beta = termination.term_prob(option, phi_next)
    coeff = -cfg.lr_term * beta * (1.0 - beta) * (advantage + cfg.xi)
    if coeff == 0.0:
        return
    add_outer(termination.weights[option], coeff, phi_next, lr_scale)


def logpi_grad_full(policy: IntraOptionPolicy, option: int, phi, action: int) -> np.ndarray:
    """Gradient of log pi with respect to the whole weight tensor (zeros off ``option``)."""
    grad = np.zeros_like(policy.weights)
    grad[option] = policy.logpi_grad(option, phi, action)
    return grad


def beta_grad_full(termination: TerminationFunction, option: int, phi) -> np.ndarray:
    grad = np.zeros_like(termination.weights)
    grad[option] = termination.beta_grad(option, phi)
    return grad

