"""Call-and-return execution and on-line training (option-critic plus primitive baselines)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .actor import ActorConfig, intra_policy_step, termination_step
from .critic import Critic, DivergenceError
from .features import add_outer, dot, fourier_lr_scaling
from .mdp import make_rng
from .policies import IntraOptionPolicy, PolicyOverOptions, TerminationFunction, sample_index, softmax


@dataclass
class AgentConfig:
    agent: str = "oc"
    n_options: int = 4
    epsilon: float = 0.01
    temperature: float = 0.001
    gamma: float = 0.99
    lr_critic: float = 0.5
    actor: ActorConfig = field(default_factory=ActorConfig)
    episodes: int = 1500
    max_steps_per_episode: int = 50000
    seed: int = 0
    critic_variant: str = "qu"
    v_mode: str = "greedy"
    init_scale: float = 0.0
    fourier_scaling: bool = True
    lr_schedule: str = "constant"

    def __post_init__(self):
        if self.agent not in ("oc", "sarsa", "ac"):
            raise ValueError(f"unknown agent {self.agent!r}")
        if self.n_options < 1:
            raise ValueError("n_options must be at least 1")
        if self.max_steps_per_episode < 1:
            raise ValueError("max_steps_per_episode must be at least 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass
class EpisodeLog:
    episode: int
    steps: int
    undiscounted_return: float
    discounted_return: float
    option_switches: int
    option_usage: list

    @property
    def mean_option_duration(self) -> float:
        return self.steps / (self.option_switches + 1)


def _load_into(targets: dict, arrays: dict) -> None:
    """Copy named arrays into place after checking every name and shape first."""
    for name, target in targets.items():
        if name not in arrays:
            raise ValueError(f"missing array {name!r}")
        if arrays[name].shape != target.shape:
            raise ValueError(f"array {name!r} has shape {arrays[name].shape}, expected {target.shape}")
    for name, target in targets.items():
        target[...] = arrays[name]


class OptionCriticAgent:
    """Option-critic with intra-option Q-learning (QU- or QOmega-primary critic)."""

    kind = "oc"

    def __init__(self, n_features: int, n_actions: int, cfg: AgentConfig, rng: np.random.Generator,
                 lr_scale: np.ndarray | None = None):
        self.cfg = cfg
        n_options = cfg.n_options
        theta = np.zeros((n_options, n_actions, n_features))
        vartheta = np.zeros((n_options, n_features))
        if cfg.init_scale > 0:
            theta = rng.uniform(-cfg.init_scale, cfg.init_scale, theta.shape)
            vartheta = rng.uniform(-cfg.init_scale, cfg.init_scale, vartheta.shape)
        self.policy = IntraOptionPolicy(theta, cfg.temperature)
        self.termination = TerminationFunction(vartheta)
        self.pomega = PolicyOverOptions(cfg.epsilon, n_options)
        self.lr_scale = lr_scale
        self.critic = Critic(cfg.critic_variant, n_options, n_actions, n_features, cfg.lr_critic, cfg.gamma,
                             lr_scale=lr_scale, lr_schedule=cfg.lr_schedule, v_mode=cfg.v_mode,
                             epsilon=cfg.epsilon)

    def q_row(self, phi) -> np.ndarray:
        return self.critic.q_omega_row(self.policy, phi)

    def run_episode(self, env, rng: np.random.Generator, episode: int = 0, learn: bool = True) -> EpisodeLog:
        cfg, actor = self.cfg, self.cfg.actor
        policy, termination, critic = self.policy, self.termination, self.critic
        encode = env.feature_map.encode
        state = env.reset(rng)
        phi = encode(env.observe(state))
        option = self.pomega.select(self.q_row(phi), rng)
        sparse = env.feature_map.kind == "one-hot"
        usage = [0] * cfg.n_options
        switches = 0
        ret = disc_ret = 0.0
        discount = 1.0
        steps = 0
        while True:
            probs = policy.action_probs(option, phi)
            action = sample_index(probs, rng)
            state, reward, done = env.step(state, action, rng)
            phi_next = encode(env.observe(state))
            steps += 1
            usage[option] += 1
            ret += reward
            disc_ret += discount * reward
            discount *= cfg.gamma

            q_next = self.q_row(phi_next)
            if learn:
                # evaluation
                _, target = critic.update(phi, option, action, reward, phi_next, done, policy, termination, q_next)
                # improvement
                if critic.variant == "qu":
                    qu_sample = critic.q_u(phi, option, action)
                else:
                    qu_sample = target
                baseline = critic.q_omega(policy, phi, option) if actor.use_baseline else 0.0
                intra_policy_step(policy, actor, phi, option, action, qu_sample, baseline, probs, self.lr_scale)
                # one-hot updates only touch column s, so the row at s' != s is unchanged
                if not (sparse and phi_next != phi):
                    q_next = self.q_row(phi_next)
                if actor.lr_term > 0.0:
                    advantage = q_next[option] - critic.v_omega(q_next)
                    termination_step(termination, actor, phi_next, option, advantage, None, self.lr_scale)

            if done or steps >= cfg.max_steps_per_episode:
                break
            if rng.random() < termination.term_prob(option, phi_next):
                option = self.pomega.select(q_next, rng)
                switches += 1
            phi = phi_next
        return EpisodeLog(episode, steps, ret, disc_ret, switches, usage)

    def arrays(self) -> dict:
        return {"theta": self.policy.weights, "vartheta": self.termination.weights, "critic": self.critic.weights}

    def load_arrays(self, arrays: dict) -> None:
        _load_into(self.arrays(), arrays)


class SarsaAgent:
    """Primitive SARSA(0) with a Boltzmann policy over Q(s, .)."""

    kind = "sarsa"

    def __init__(self, n_features: int, n_actions: int, cfg: AgentConfig, rng=None, lr_scale=None):
        self.cfg = cfg
        self.q = np.zeros((n_actions, n_features))
        self.lr_scale = lr_scale

    def _act(self, phi, rng):
        return sample_index(softmax(dot(self.q, phi) / self.cfg.temperature), rng)

    def run_episode(self, env, rng, episode: int = 0, learn: bool = True) -> EpisodeLog:
        cfg = self.cfg
        encode = env.feature_map.encode
        state = env.reset(rng)
        phi = encode(env.observe(state))
        action = self._act(phi, rng)
        ret = disc_ret = 0.0
        discount = 1.0
        steps = 0
        while True:
            state, reward, done = env.step(state, action, rng)
            phi_next = encode(env.observe(state))
            steps += 1
            ret += reward
            disc_ret += discount * reward
            discount *= cfg.gamma
            next_action = None if done else self._act(phi_next, rng)
            if learn:
                target = reward if done else reward + cfg.gamma * float(dot(self.q[next_action], phi_next))
                delta = target - float(dot(self.q[action], phi))
                if not math.isfinite(delta) or abs(delta) > 1e8:
                    raise DivergenceError(f"SARSA TD error {delta!r}")
                add_outer(self.q[action], cfg.lr_critic * delta, phi, self.lr_scale)
            if done or steps >= cfg.max_steps_per_episode:
                break
            phi, action = phi_next, next_action
        return EpisodeLog(episode, steps, ret, disc_ret, 0, [steps])

    def arrays(self) -> dict:
        return {"q": self.q}

    def load_arrays(self, arrays: dict) -> None:
        _load_into(self.arrays(), arrays)


class ActorCriticAgent:
    """Primitive one-step actor-critic: Boltzmann actor, TD(0) state-value critic."""

    kind = "ac"

    def __init__(self, n_features: int, n_actions: int, cfg: AgentConfig, rng=None, lr_scale=None):
        self.cfg = cfg
        self.policy = IntraOptionPolicy(np.zeros((1, n_actions, n_features)), cfg.temperature)
        self.v = np.zeros(n_features)
        self.lr_scale = lr_scale

    def run_episode(self, env, rng, episode: int = 0, learn: bool = True) -> EpisodeLog:
        cfg = self.cfg
        encode = env.feature_map.encode
        state = env.reset(rng)
        phi = encode(env.observe(state))
        ret = disc_ret = 0.0
        discount = 1.0
        steps = 0
        while True:
            probs = self.policy.action_probs(0, phi)
            action = sample_index(probs, rng)
            state, reward, done = env.step(state, action, rng)
            phi_next = encode(env.observe(state))
            steps += 1
            ret += reward
            disc_ret += discount * reward
            discount *= cfg.gamma
            if learn:
                target = reward if done else reward + cfg.gamma * float(dot(self.v, phi_next))
                delta = target - float(dot(self.v, phi))
                if not math.isfinite(delta) or abs(delta) > 1e8:
                    raise DivergenceError(f"actor-critic TD error {delta!r}")
                add_outer(self.v, cfg.lr_critic * delta, phi, self.lr_scale)
                intra_policy_step(self.policy, cfg.actor, phi, 0, action, delta, 0.0, probs, self.lr_scale)
            if done or steps >= cfg.max_steps_per_episode:
                break
            phi = phi_next
        return EpisodeLog(episode, steps, ret, disc_ret, 0, [steps])

    def arrays(self) -> dict:
        return {"theta": self.policy.weights, "v": self.v}

    def load_arrays(self, arrays: dict) -> None:
        _load_into(self.arrays(), arrays)


AGENTS = {"oc": OptionCriticAgent, "sarsa": SarsaAgent, "ac": ActorCriticAgent}


def make_agent(env, cfg: AgentConfig, rng: np.random.Generator):
    fmap = env.feature_map
    lr_scale = fourier_lr_scaling(fmap) if fmap.kind == "fourier" and cfg.fourier_scaling else None
    return AGENTS[cfg.agent](fmap.n_features, env.n_actions, cfg, rng, lr_scale)


def run_episode(env, agent, rng, episode: int = 0) -> EpisodeLog:
    return agent.run_episode(env, rng, episode)


@dataclass
class TrainResult:
    logs: list
    agent: object


def train(env, cfg: AgentConfig, agent=None, progress=None) -> TrainResult:
    """Run ``cfg.episodes`` episodes from a fresh generator seeded with ``cfg.seed``."""
    rng = make_rng(cfg.seed)
    if agent is None:
        agent = make_agent(env, cfg, rng)
    logs = []
    for episode in range(cfg.episodes):
        env.on_episode_start(episode, rng)
        logs.append(agent.run_episode(env, rng, episode))
        if progress is not None:
            progress(logs[-1])
    return TrainResult(logs, agent)
