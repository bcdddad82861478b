"""Continuous Pinball: a ball steered by thrusts through a polygon maze.

Positions live in the unit box and velocities in [-1, 1]^2. Each step
applies the thrust, integrates ``substeps`` sub-steps with elastic
reflections off obstacle edges and box walls, then applies drag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..features import fourier

ACCEL_X_POS, ACCEL_X_NEG, ACCEL_Y_POS, ACCEL_Y_NEG, NULL = range(5)
THRUST_REWARD = -5.0
NULL_REWARD = -1.0
GOAL_REWARD = 10000.0
MAX_REFLECTIONS = 4


class GeometryError(RuntimeError):
    """The ball ended up inside an obstacle."""


@dataclass
class PinballConfig:
    obstacles: list = field(default_factory=list)
    target: tuple = (0.9, 0.1)
    target_radius: float = 0.04
    start: tuple = (0.1, 0.9)
    ball_radius: float = 0.02
    drag: float = 0.995
    substeps: int = 20
    thrust: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.drag <= 1.0:
            raise ValueError("drag must lie in (0, 1]")
        if self.substeps < 1:
            raise ValueError("substeps must be positive")
        self.obstacles = [np.asarray(p, dtype=float).reshape(-1, 2) for p in self.obstacles]
        for i, poly in enumerate(self.obstacles):
            if len(poly) < 3:
                raise ValueError(f"polygon {i} has fewer than 3 vertices")
            if _self_intersecting(poly):
                raise ValueError(f"polygon {i} is self-intersecting")
            if point_in_polygon(self.start[0], self.start[1], poly):
                raise ValueError(f"start position lies inside polygon {i}")

    @classmethod
    def parse(cls, text: str) -> "PinballConfig":
        kw: dict = {"obstacles": []}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, *args = line.split()
            try:
                vals = [float(v) for v in args]
                if key == "ball" and len(vals) == 1:
                    kw["ball_radius"] = vals[0]
                elif key == "start" and len(vals) == 2:
                    kw["start"] = tuple(vals)
                elif key == "target" and len(vals) == 3:
                    kw["target"] = tuple(vals[:2])
                    kw["target_radius"] = vals[2]
                elif key == "polygon" and len(vals) >= 6 and len(vals) % 2 == 0:
                    kw["obstacles"].append(vals)
                elif key == "drag" and len(vals) == 1:
                    kw["drag"] = vals[0]
                elif key == "thrust" and len(vals) == 1:
                    kw["thrust"] = vals[0]
                elif key == "substeps" and len(vals) == 1:
                    kw["substeps"] = int(vals[0])
                else:
                    raise ValueError(f"bad record {line!r}")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PinballConfig":
        with open(path) as fh:
            return cls.parse(fh.read())

    @classmethod
    def default(cls) -> "PinballConfig":
        text = resources.files("optioncritic.envs").joinpath("pinball_default.cfg").read_text()
        return cls.parse(text)


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _self_intersecting(poly: np.ndarray) -> bool:
    n = len(poly)
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return True
    return False


def _time_of_impact(px, py, dx, dy, ax, ay, bx, by, r):
    """Earliest t in [0, 1] at which a disc moving p -> p + d touches segment ab.

    Returns ``(t, nx, ny)`` with the unit contact normal pointing at the
    disc, or ``None`` when no approaching contact occurs.
    """
    best = None
    ex, ey = bx - ax, by - ay
    length = math.hypot(ex, ey)
    nx, ny = -ey / length, ex / length
    side = (px - ax) * nx + (py - ay) * ny
    if side < 0:
        nx, ny, side = -nx, -ny, -side
    rate = dx * nx + dy * ny
    if rate < 0:
        t = max(0.0, (side - r) / -rate)
        if t <= 1.0:
            cx, cy = px + t * dx, py + t * dy
            u = ((cx - ax) * ex + (cy - ay) * ey) / (length * length)
            if 0.0 <= u <= 1.0:
                best = (t, nx, ny)
    aa = dx * dx + dy * dy
    if aa == 0.0:
        return best
    for vx, vy in ((ax, ay), (bx, by)):
        mx, my = px - vx, py - vy
        b = 2.0 * (mx * dx + my * dy)
        if b >= 0:
            continue
        c = mx * mx + my * my - r * r
        disc = b * b - 4.0 * aa * c
        if disc < 0:
            continue
        t = max(0.0, (-b - math.sqrt(disc)) / (2.0 * aa))
        if t <= 1.0 and (best is None or t < best[0]):
            cx, cy = px + t * dx - vx, py + t * dy - vy
            norm = math.hypot(cx, cy)
            best = (t, cx / norm, cy / norm)
    return best


class Pinball:
    """Pinball environment; states are ``(x, y, vx, vy)`` tuples."""

    name = "pinball"
    n_actions = 5

    def __init__(self, config: PinballConfig | None = None, fourier_order: int = 3):
        self.config = config or PinballConfig.default()
        cfg = self.config
        segs = []
        self._segment_polygon = []
        for k, poly in enumerate(cfg.obstacles):
            for i in range(len(poly)):
                segs.append((*poly[i], *poly[(i + 1) % len(poly)]))
                self._segment_polygon.append(k)
        for seg in ((0, 0, 1, 0), (1, 0, 1, 1), (1, 1, 0, 1), (0, 1, 0, 0)):
            segs.append(seg)
            self._segment_polygon.append(-1)
        self.segments = np.array(segs, dtype=float)
        self._seg_list = [tuple(map(float, s)) for s in segs]
        self._seg_min = np.minimum(self.segments[:, :2], self.segments[:, 2:])
        self._seg_max = np.maximum(self.segments[:, :2], self.segments[:, 2:])
        self.feature_map = fourier(4, fourier_order)

    # environment protocol ----------------------------------------------

    def reset(self, rng: np.random.Generator | None = None) -> tuple:
        x, y = self.config.start
        return (float(x), float(y), 0.0, 0.0)

    def observe(self, state) -> np.ndarray:
        x, y, vx, vy = state
        return np.array([x, y, (vx + 1.0) / 2.0, (vy + 1.0) / 2.0])

    def on_episode_start(self, episode: int, rng) -> None:
        pass

    def step(self, state, action: int, rng=None):
        from ..mdp import StepOutcome

        cfg = self.config
        x, y, vx, vy = state
        if action == ACCEL_X_POS:
            vx += cfg.thrust
        elif action == ACCEL_X_NEG:
            vx -= cfg.thrust
        elif action == ACCEL_Y_POS:
            vy += cfg.thrust
        elif action == ACCEL_Y_NEG:
            vy -= cfg.thrust
        elif action != NULL:
            raise ValueError(f"unknown pinball action {action}")
        vx = min(1.0, max(-1.0, vx))
        vy = min(1.0, max(-1.0, vy))
        reward = NULL_REWARD if action == NULL else THRUST_REWARD

        x, y, vx, vy, hit = self._integrate(x, y, vx, vy)
        vx *= cfg.drag
        vy *= cfg.drag
        # reflections can rotate speed onto one axis beyond the velocity box
        vx = min(1.0, max(-1.0, vx))
        vy = min(1.0, max(-1.0, vy))
        if hit:
            return StepOutcome((x, y, vx, vy), GOAL_REWARD, True)
        return StepOutcome((x, y, vx, vy), reward, False)

    # physics ------------------------------------------------------------

    def _candidates(self, x, y, reach):
        near = (
            (self._seg_min[:, 0] - reach <= x)
            & (x <= self._seg_max[:, 0] + reach)
            & (self._seg_min[:, 1] - reach <= y)
            & (y <= self._seg_max[:, 1] + reach)
        )
        return [self._seg_list[i] for i in np.flatnonzero(near)], np.flatnonzero(near)

    def _in_target(self, x, y) -> bool:
        tx, ty = self.config.target
        return (x - tx) ** 2 + (y - ty) ** 2 <= self.config.target_radius**2

    def _integrate(self, x, y, vx, vy):
        cfg = self.config
        r = cfg.ball_radius
        n = cfg.substeps
        scale = r / n
        speed = math.hypot(vx, vy)
        cands, idx = self._candidates(x, y, r + speed * r + 1e-6)
        if not cands:
            for _ in range(n):
                x += vx * scale
                y += vy * scale
                if self._in_target(x, y):
                    return x, y, vx, vy, True
            return x, y, vx, vy, False
        for _ in range(n):
            remaining = 1.0
            reflections = 0
            while remaining > 0.0:
                dx, dy = vx * scale * remaining, vy * scale * remaining
                first = None
                for seg in cands:
                    hit = _time_of_impact(x, y, dx, dy, *seg, r)
                    if hit is not None and (first is None or hit[0] < first[0]):
                        first = hit
                if first is None:
                    x += dx
                    y += dy
                    break
                t, nx, ny = first
                x += t * dx
                y += t * dy
                dot = vx * nx + vy * ny
                vx -= 2.0 * dot * nx
                vy -= 2.0 * dot * ny
                remaining *= 1.0 - t
                reflections += 1
                if reflections >= MAX_REFLECTIONS:
                    vx = vy = 0.0
                    break
            if self._in_target(x, y):
                return x, y, vx, vy, True
        self._check_geometry(x, y, idx)
        return x, y, vx, vy, False

    def _check_geometry(self, x, y, seg_idx):
        for k in {self._segment_polygon[i] for i in seg_idx}:
            if k >= 0 and point_in_polygon(x, y, self.config.obstacles[k]):
                raise GeometryError(f"ball centre ({x:.6f}, {y:.6f}) inside obstacle {k}")
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise GeometryError(f"ball centre ({x:.6f}, {y:.6f}) left the unit box")
