"""Experiment environments.

Every environment exposes ``n_actions``, ``feature_map``, ``reset(rng)``,
``step(state, action, rng) -> StepOutcome``, ``observe(state)`` (the input
of ``feature_map``) and ``on_episode_start(episode, rng)``.
"""

from .fourrooms import FourRooms
from .pinball import Pinball, PinballConfig
from .tabular import MDPEnv

__all__ = ["FourRooms", "MDPEnv", "Pinball", "PinballConfig"]
