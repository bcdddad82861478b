"""Stochastic four-rooms gridworld with a goal that moves once during training."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..features import one_hot
from ..mdp import StepOutcome

LAYOUT = """\
wwwwwwwwwwwww
w     w     w
w     w     w
w           w
w     w     w
w     w     w
ww wwww     w
w     www www
w     w     w
w     w     w
w           w
w     w     w
wwwwwwwwwwwww
"""

# up, down, left, right
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
EAST_DOORWAY = (7, 9)
LOWER_RIGHT_ROOM = [(r, c) for r in range(8, 12) for c in range(7, 12)]


def parse_layout(text: str) -> np.ndarray:
    """Boolean wall mask from a map of ``w`` (wall) and space (navigable)."""
    rows = [ln for ln in text.splitlines() if ln.strip("\n")]
    width = len(rows[0])
    grid = np.zeros((len(rows), width), dtype=bool)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"row {i}: width {len(row)}, expected {width}")
        for j, ch in enumerate(row):
            if ch not in "w ":
                raise ValueError(f"row {i}: unexpected map character {ch!r}")
            grid[i, j] = ch == "w"
    return grid


class FourRooms:
    """Gridworld where moves slip with probability 1/3.

    A slip sends the agent to a uniformly chosen empty neighbour other than
    the intended destination. Entering the goal pays +1 and ends the episode;
    every other transition pays 0.
    """

    name = "fourrooms"
    n_actions = 4

    def __init__(self, layout: str = LAYOUT, goal=EAST_DOORWAY, relocation_episode: int = 1000,
                 slip: float = 1.0 / 3.0, new_goal_cells=LOWER_RIGHT_ROOM):
        self.walls = parse_layout(layout)
        self.cells = [tuple(int(v) for v in rc) for rc in np.argwhere(~self.walls)]
        self.index = {cell: i for i, cell in enumerate(self.cells)}
        self.n_states = len(self.cells)
        self.slip = slip
        self.relocation_episode = relocation_episode
        self.new_goal_cells = [c for c in new_goal_cells if c in self.index]
        self.feature_map = one_hot(self.n_states)
        self._build_tables()
        self.goal = self.index[tuple(goal)]
        self._check_connected()

    @classmethod
    def from_file(cls, path, **kwargs) -> "FourRooms":
        with open(path) as fh:
            return cls(fh.read(), **kwargs)

    def _build_tables(self):
        n = self.n_states
        self.intended = np.zeros((n, 4), dtype=np.int64)
        self.slips: list[list[list[int]]] = []
        for s, (r, c) in enumerate(self.cells):
            neighbours = []
            for dr, dc in MOVES:
                cell = (r + dr, c + dc)
                neighbours.append(self.index.get(cell, -1))
            empty = [x for x in neighbours if x >= 0]
            per_action = []
            for a, target in enumerate(neighbours):
                self.intended[s, a] = target if target >= 0 else s
                per_action.append([x for x in empty if x != self.intended[s, a]] or [int(self.intended[s, a])])
            self.slips.append(per_action)

    def _check_connected(self):
        seen = {0}
        queue = deque([0])
        while queue:
            s = queue.popleft()
            for t in self.intended[s]:
                if t not in seen:
                    seen.add(int(t))
                    queue.append(int(t))
        if len(seen) != self.n_states:
            raise ValueError("map has navigable cells unreachable from the rest")

    # environment protocol ----------------------------------------------

    def reset(self, rng: np.random.Generator) -> int:
        s = int(rng.integers(self.n_states - 1))
        return s + 1 if s >= self.goal else s

    def step(self, state: int, action: int, rng: np.random.Generator) -> StepOutcome:
        if state == self.goal:
            raise ValueError("cannot step from the goal cell")
        if rng.random() < self.slip:
            options = self.slips[state][action]
            nxt = options[int(rng.integers(len(options)))]
        else:
            nxt = int(self.intended[state, action])
        if nxt == self.goal:
            return StepOutcome(nxt, 1.0, True)
        return StepOutcome(nxt, 0.0, False)

    def observe(self, state: int) -> int:
        return state

    def on_episode_start(self, episode: int, rng: np.random.Generator) -> None:
        if episode == self.relocation_episode:
            self.relocate_goal(rng)

    def relocate_goal(self, rng: np.random.Generator) -> None:
        cell = self.new_goal_cells[int(rng.integers(len(self.new_goal_cells)))]
        self.goal = self.index[cell]

    @property
    def goal_cell(self) -> tuple:
        return self.cells[self.goal]

    @property
    def shape(self) -> tuple:
        return self.walls.shape
