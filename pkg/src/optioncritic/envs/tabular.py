from __future__ import annotations

import numpy as np

from .. import mdp as mdp_mod
from ..features import one_hot
from ..mdp import StepOutcome, TabularMDP


class MDPEnv:
    """Adapter running a :class:`TabularMDP` with one-hot features."""

    name = "mdp-file"

    def __init__(self, mdp: TabularMDP):
        self.mdp = mdp
        self.n_actions = mdp.n_actions
        self.feature_map = one_hot(mdp.n_states)

    def reset(self, rng: np.random.Generator) -> int:
        return mdp_mod.sample_start(self.mdp, rng)

    def step(self, state: int, action: int, rng: np.random.Generator) -> StepOutcome:
        return mdp_mod.step(self.mdp, state, action, rng)

    def observe(self, state: int) -> int:
        return state

    def on_episode_start(self, episode: int, rng: np.random.Generator) -> None:
        pass
