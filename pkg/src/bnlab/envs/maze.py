"""Continuous-action 2-D maze with exploration-coverage tracking.

The agent moves inside an axis-aligned bounding box by clipped
displacements.  Hitting an obstacle blocks the move entirely (the agent
stays put); entering the death zone ends the episode with a penalty;
reaching the goal radius ends it with a bonus.  Every other step pays a
small time penalty plus potential shaping equal to the decrease in
Euclidean distance to the goal.

Coverage discretizes the bounding box into a G x G grid and reports the
fraction of *reachable* cells (those whose center is not inside an
obstacle) visited so far.  The environment accumulates visited cells
across episodes for its whole lifetime, which is exactly the
"exploration over training" curve the experiments need.
"""

from dataclasses import dataclass, field

import numpy as np

from bnlab.envs.base import EnvStep


@dataclass(frozen=True)
class Box:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")

    def contains(self, p):
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def contains_interior(self, p):
        return self.x0 < p[0] < self.x1 and self.y0 < p[1] < self.y1


@dataclass(frozen=True)
class MazeSpec:
    bounds: Box
    start: tuple
    goal: tuple
    goal_radius: float
    obstacles: tuple = ()
    death_zone: Box | None = None
    max_step: float = 0.05
    episode_cap: int = 300
    grid_resolution: int = 20
    goal_bonus: float = 10.0
    death_penalty: float = -10.0
    step_penalty: float = -0.01
    shaping_weight: float = 1.0

    def __post_init__(self):
        if self.grid_resolution < 2:
            raise ValueError("grid_resolution must be >= 2")
        if self.max_step <= 0:
            raise ValueError("max_step must be > 0")
        for name, p in (("start", self.start), ("goal", self.goal)):
            if not self.bounds.contains(p):
                raise ValueError(f"{name} {p} outside bounds")
            for ob in self.obstacles:
                if ob.contains(p):
                    raise ValueError(f"{name} {p} inside obstacle {ob}")
            if self.death_zone is not None and self.death_zone.contains(p):
                raise ValueError(f"{name} {p} inside death zone")


def default_maze():
    """Wall with a bottom gap; death strip on the gap's far side.

    The straight line from start to goal is blocked, and greedy shaping
    walks the agent up the wall into a dead end -- progress requires
    descending (against shaping) through the gap, where cutting the
    corner too low lands in the death zone.  Exploration quality is
    therefore visible in both coverage and return.
    """
    return MazeSpec(
        bounds=Box(0.0, 0.0, 1.0, 1.0),
        start=(0.1, 0.1),
        goal=(0.9, 0.9),
        goal_radius=0.05,
        obstacles=(Box(0.45, 0.3, 0.55, 1.0),),
        death_zone=Box(0.55, 0.0, 0.7, 0.15),
        max_step=0.05,
        episode_cap=300,
        grid_resolution=20,
    )


def _dist(p, q):
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def maze_step(spec, s, a):
    """Pure transition from position ``s`` under action ``a`` in [-1,1]^2."""
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    b = spec.bounds
    candidate = (
        min(max(s[0] + a[0] * spec.max_step, b.x0), b.x1),
        min(max(s[1] + a[1] * spec.max_step, b.y0), b.y1),
    )
    blocked = any(ob.contains(candidate) for ob in spec.obstacles)
    new = s if blocked else candidate
    if spec.death_zone is not None and spec.death_zone.contains(new):
        return EnvStep(np.array(new), spec.death_penalty, True, {"death": True})
    if _dist(new, spec.goal) <= spec.goal_radius:
        return EnvStep(np.array(new), spec.goal_bonus, True, {"goal": True})
    shaping = spec.shaping_weight * (_dist(s, spec.goal) - _dist(new, spec.goal))
    return EnvStep(np.array(new), spec.step_penalty + shaping, False, {})


def maze_reset(spec, rng=None):
    """Reset is deterministic: episodes always begin at the start point."""
    return np.array(spec.start, dtype=float)


def cell_index(spec, p):
    g = spec.grid_resolution
    b = spec.bounds
    i = int((p[0] - b.x0) / (b.x1 - b.x0) * g)
    j = int((p[1] - b.y0) / (b.y1 - b.y0) * g)
    return (min(max(i, 0), g - 1), min(max(j, 0), g - 1))


def reachable_cells(spec):
    """Cells whose center is not strictly inside an obstacle."""
    g = spec.grid_resolution
    b = spec.bounds
    cells = set()
    for i in range(g):
        for j in range(g):
            cx = b.x0 + (i + 0.5) * (b.x1 - b.x0) / g
            cy = b.y0 + (j + 0.5) * (b.y1 - b.y0) / g
            if not any(ob.contains_interior((cx, cy)) for ob in spec.obstacles):
                cells.add((i, j))
    return cells


def coverage(visited_cells, spec):
    reachable = reachable_cells(spec)
    return len(visited_cells & reachable) / len(reachable)


class MazeEnv:
    def __init__(self, spec=None, rng=None):
        self.spec = spec if spec is not None else default_maze()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.observation_dim = 2
        self.action_dim = 2
        self.action_limit = 1.0
        self._s = np.array(self.spec.start, dtype=float)
        self._t = 0
        self._visited = set()
        self._reachable = reachable_cells(self.spec)

    def reset(self):
        self._s = maze_reset(self.spec, self.rng)
        self._t = 0
        self._visit(self._s)
        return self._s.copy()

    def _visit(self, p):
        self._visited.add(cell_index(self.spec, p))

    @property
    def coverage(self):
        return len(self._visited & self._reachable) / len(self._reachable)

    def step(self, action):
        out = maze_step(self.spec, tuple(self._s), action)
        self._s = out.next_state
        self._t += 1
        self._visit(self._s)
        if not out.done and self._t >= self.spec.episode_cap:
            return EnvStep(
                out.next_state, out.reward, True, {**out.info, "truncated": True}
            )
        return out
