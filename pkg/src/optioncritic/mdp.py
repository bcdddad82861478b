"""Finite MDPs: representation, validation, sampling and a small text format."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

PROB_TOL = 1e-12
NORMALIZE_TOL = 1e-9


def make_rng(seed: int) -> np.random.Generator:
    """Return the generator used for every sampled quantity in this package.

    The bit generator is PCG64 (permuted congruential, 128-bit LCG state).
    Identical seeds give identical streams; independent runs use
    ``base_seed + run_index``.
    """
    return np.random.Generator(np.random.PCG64(seed))


class StepOutcome(NamedTuple):
    next_state: int
    reward: float
    done: bool


@dataclass(frozen=True)
class TabularMDP:
    """A finite MDP.

    ``transition[s, a, s']`` and ``reward[s, a]``. Entering a terminal state
    ends the episode; terminal rows of ``transition`` are never used.
    """

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    start_dist: np.ndarray
    terminal: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        n_states = transition.shape[0]
        terminal = self.terminal
        if terminal is None:
            terminal = np.zeros(n_states, dtype=bool)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=float))
        object.__setattr__(self, "start_dist", np.asarray(self.start_dist, dtype=float))
        object.__setattr__(self, "terminal", np.asarray(terminal, dtype=bool))
        object.__setattr__(self, "discount", float(self.discount))
        for arr in (self.transition, self.reward, self.start_dist, self.terminal):
            arr.setflags(write=False)
        object.__setattr__(self, "_cdf", np.cumsum(transition, axis=2))
        object.__setattr__(self, "_start_cdf", np.cumsum(self.start_dist))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @classmethod
    def build(cls, transition, reward, discount, start_dist, terminal=None) -> "TabularMDP":
        """Construct after normalizing rows that are within 1e-9 of stochastic.

        Rows further off than that are rejected with ``ValueError``.
        """
        transition = np.array(transition, dtype=float)
        sums = transition.sum(axis=2)
        bad = np.abs(sums - 1.0) > NORMALIZE_TOL
        if terminal is not None:
            bad &= ~np.asarray(terminal, dtype=bool)[:, None]
        if bad.any():
            s, a = np.argwhere(bad)[0]
            raise ValueError(f"row sum {sums[s, a]:.12g} at ({s},{a})")
        ok = np.abs(sums - 1.0) <= NORMALIZE_TOL
        transition[ok] /= sums[ok][:, None]
        start = np.array(start_dist, dtype=float)
        if abs(start.sum() - 1.0) > NORMALIZE_TOL:
            raise ValueError(f"start distribution sums to {start.sum():.12g}")
        start /= start.sum()
        return cls(transition, reward, discount, start, terminal)


def validate(mdp: TabularMDP) -> list[str]:
    """List every violated invariant; an empty list means the MDP is valid."""
    problems = []
    P = mdp.transition
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        return [f"transition has shape {P.shape}, expected (S, A, S)"]
    n_states, n_actions = P.shape[:2]
    if mdp.reward.shape != (n_states, n_actions):
        problems.append(f"reward has shape {mdp.reward.shape}, expected {(n_states, n_actions)}")
    for s, a, s2 in np.argwhere((P < 0) | (P > 1)):
        problems.append(f"probability {P[s, a, s2]:.12g} out of [0,1] at ({s},{a},{s2})")
    sums = P.sum(axis=2)
    for s, a in np.argwhere(np.abs(sums - 1.0) > PROB_TOL):
        if mdp.terminal[s]:
            continue
        problems.append(f"row sum {sums[s, a]:.12g} at ({s},{a})")
    if not 0.0 <= mdp.discount < 1.0:
        problems.append(f"discount out of range: {mdp.discount}")
    if mdp.start_dist.shape != (n_states,):
        problems.append(f"start_dist has shape {mdp.start_dist.shape}")
    else:
        if np.any(mdp.start_dist < 0):
            problems.append("start_dist has negative entries")
        if abs(mdp.start_dist.sum() - 1.0) > PROB_TOL:
            problems.append(f"start_dist sums to {mdp.start_dist.sum():.12g}")
    if mdp.terminal.shape != (n_states,):
        problems.append(f"terminal has shape {mdp.terminal.shape}")
    return problems


def step(mdp: TabularMDP, s: int, a: int, rng: np.random.Generator) -> StepOutcome:
    if mdp.terminal[s]:
        raise ValueError(f"cannot step from terminal state {s}")
    if not 0 <= a < mdp.n_actions:
        raise ValueError(f"action {a} out of range")
    cdf = mdp._cdf[s, a]
    s2 = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return StepOutcome(s2, float(mdp.reward[s, a]), bool(mdp.terminal[s2]))


def sample_start(mdp: TabularMDP, rng: np.random.Generator) -> int:
    cdf = mdp._start_cdf
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


# text format ---------------------------------------------------------------


def loads(text: str) -> TabularMDP:
    """Parse the line-oriented MDP format (``mdp``, ``t``, ``r``, ``start``, ``terminal``)."""
    lines = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), 1)]
    lines = [(i, toks) for i, toks in lines if toks and not toks[0].startswith("#")]
    if not lines or lines[0][1][0] != "mdp" or len(lines[0][1]) != 4:
        raise ValueError("line 1: expected header 'mdp <n_states> <n_actions> <gamma>'")
    _, (_, ns, na, g) = lines[0]
    n_states, n_actions = int(ns), int(na)
    P = np.zeros((n_states, n_actions, n_states))
    R = np.zeros((n_states, n_actions))
    start = np.zeros(n_states)
    terminal = np.zeros(n_states, dtype=bool)
    for lineno, toks in lines[1:]:
        try:
            kind, args = toks[0], toks[1:]
            if kind == "t" and len(args) == 4:
                P[int(args[0]), int(args[1]), int(args[2])] = float(args[3])
            elif kind == "r" and len(args) == 3:
                R[int(args[0]), int(args[1])] = float(args[2])
            elif kind == "start" and len(args) == 2:
                start[int(args[0])] = float(args[1])
            elif kind == "terminal" and len(args) == 1:
                terminal[int(args[0])] = True
            else:
                raise ValueError(f"unrecognized record {' '.join(toks)!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    # terminal rows may be left empty in the file
    for s in np.flatnonzero(terminal):
        if P[s].sum() == 0:
            P[s, :, s] = 1.0
    return TabularMDP.build(P, R, float(g), start, terminal)


def dumps(mdp: TabularMDP) -> str:
    out = [f"mdp {mdp.n_states} {mdp.n_actions} {mdp.discount!r}"]
    for s, a, s2 in np.argwhere(mdp.transition > 0):
        out.append(f"t {s} {a} {s2} {float(mdp.transition[s, a, s2])!r}")
    for s, a in np.argwhere(mdp.reward != 0):
        out.append(f"r {s} {a} {float(mdp.reward[s, a])!r}")
    for s in np.flatnonzero(mdp.start_dist):
        out.append(f"start {s} {float(mdp.start_dist[s])!r}")
    for s in np.flatnonzero(mdp.terminal):
        out.append(f"terminal {s}")
    return "\n".join(out) + "\n"


def load(path) -> TabularMDP:
    with open(path) as fh:
        return loads(fh.read())
