"""State feature maps: one-hot indicators and the Fourier cosine basis."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FeatureMap:
    kind: str
    input_dim: int
    order: int = 0
    coefficients: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def n_features(self) -> int:
        if self.kind == "one-hot":
            return self.input_dim
        return self.coefficients.shape[0]

    def featurize(self, x) -> np.ndarray:
        if self.kind == "one-hot":
            s = int(x)
            if not 0 <= s < self.input_dim:
                raise ValueError(f"state {s} out of range for {self.input_dim} states")
            phi = np.zeros(self.input_dim)
            phi[s] = 1.0
            return phi
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected input of shape ({self.input_dim},), got {x.shape}")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError(f"Fourier input {x} outside the unit box")
        return np.cos(np.pi * (self.coefficients @ x))

    def encode(self, x):
        """Feature representation used on hot paths.

        One-hot maps return the bare state index, which every consumer of
        features treats as the corresponding indicator vector.
        """
        if self.kind == "one-hot":
            return int(x)
        return self.featurize(x)


def one_hot(n_states: int) -> FeatureMap:
    return FeatureMap("one-hot", n_states)


def fourier(dim: int, order: int) -> FeatureMap:
    """Full Fourier basis; coefficient rows enumerate {0..order}^dim lexicographically."""
    coeffs = np.array(list(itertools.product(range(order + 1), repeat=dim)), dtype=np.int64)
    coeffs.setflags(write=False)
    return FeatureMap("fourier", dim, order, coeffs)


def fourier_lr_scaling(fmap: FeatureMap) -> np.ndarray:
    """Per-feature learning-rate divisors ||c_i||, with 1 for the constant feature."""
    if fmap.kind != "fourier":
        raise ValueError("learning-rate scaling only applies to Fourier features")
    norms = np.linalg.norm(fmap.coefficients, axis=1)
    norms[norms == 0] = 1.0
    return norms


def dot(weights: np.ndarray, phi) -> np.ndarray:
    """Contract the trailing feature axis of ``weights`` with ``phi``."""
    if isinstance(phi, (int, np.integer)):
        return weights[..., phi]
    return weights @ phi


def add_outer(weights: np.ndarray, coeff, phi, scale=None) -> None:
    """In place: ``weights += coeff ⊗ phi`` (optionally ``/ scale`` per feature)."""
    if isinstance(phi, (int, np.integer)):
        weights[..., phi] += coeff
        return
    step = np.multiply.outer(coeff, phi)
    if scale is not None:
        step /= scale
    weights += step


def as_vector(phi, n_features: int) -> np.ndarray:
    if isinstance(phi, (int, np.integer)):
        v = np.zeros(n_features)
        v[phi] = 1.0
        return v
    return np.asarray(phi, dtype=float)
