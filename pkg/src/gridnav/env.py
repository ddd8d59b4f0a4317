"""Obstacle gridworld: construction, transition semantics, state encoding and map I/O.

Coordinates are ``(row, col)`` with row 0 at the bottom, so the lower-left
corner is ``(0, 0)``. Map text is written top row first.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

MAX_PLACEMENT_ATTEMPTS = 1000


class GridPos(NamedTuple):
    row: int
    col: int


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


N_ACTIONS = len(Action)

# (d_row, d_col); row grows upward
MOVES = {
    Action.UP: (1, 0),
    Action.DOWN: (-1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


class WorldError(ValueError):
    """Invalid world description (bad dimensions, layout or unreachable goal)."""


class UnreachableGoalError(WorldError):
    pass


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    start: GridPos
    goal: GridPos
    obstacles: frozenset = field(default_factory=frozenset)
    max_steps: int = 200
    step_cost: float = -1.0
    collision_penalty: float = -10.0
    goal_bonus: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "start", GridPos(*self.start))
        object.__setattr__(self, "goal", GridPos(*self.goal))
        object.__setattr__(self, "obstacles", frozenset(GridPos(*p) for p in self.obstacles))
        if self.width < 2 or self.height < 2:
            raise WorldError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if self.max_steps < 1:
            raise WorldError("max_steps must be positive")
        for name, p in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(p):
                raise WorldError(f"{name} {tuple(p)} outside the grid")
            if p in self.obstacles:
                raise WorldError(f"{name} {tuple(p)} is an obstacle")
        if self.start == self.goal:
            raise WorldError("start and goal coincide")
        if any(not self.in_bounds(p) for p in self.obstacles):
            raise WorldError("obstacle outside the grid")
        if len(self.obstacles) > self.n_cells - 2:
            raise WorldError("too many obstacles")
        if _bfs(self) is None:
            raise UnreachableGoalError("goal is not reachable from start")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def in_bounds(self, pos) -> bool:
        return 0 <= pos[0] < self.height and 0 <= pos[1] < self.width

    def is_free(self, pos) -> bool:
        return self.in_bounds(pos) and GridPos(*pos) not in self.obstacles

    def sorted_obstacles(self) -> list[GridPos]:
        return sorted(self.obstacles)


class StepOutcome(NamedTuple):
    next: GridPos
    reward: float
    collided: bool
    done: bool
    reached_goal: bool


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


def generate_world(width: int, height: int, obstacle_count: int, seed: int,
                   max_steps: int = 200, **rewards) -> GridWorld:
    """Random world with start at the lower-left and goal at the upper-right.

    Obstacle positions are drawn without replacement from the non-terminal
    cells and redrawn until the goal is reachable.
    """
    if width < 2 or height < 2:
        raise WorldError(f"grid must be at least 2x2, got {width}x{height}")
    if obstacle_count < 0 or obstacle_count > width * height - 2:
        raise WorldError(f"obstacle_count {obstacle_count} out of range for {width}x{height}")
    start, goal = GridPos(0, 0), GridPos(height - 1, width - 1)
    candidates = [GridPos(r, c) for r in range(height) for c in range(width)
                  if (r, c) != start and (r, c) != goal]
    rng = np.random.default_rng(seed)
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        idx = rng.choice(len(candidates), size=obstacle_count, replace=False)
        obstacles = frozenset(candidates[i] for i in idx)
        try:
            return GridWorld(width, height, start, goal, obstacles, max_steps, **rewards)
        except UnreachableGoalError:
            continue
    raise WorldError(
        f"could not place {obstacle_count} obstacles with a reachable goal "
        f"after {MAX_PLACEMENT_ATTEMPTS} attempts")


def step(world: GridWorld, pos, action) -> StepOutcome:
    action = Action(action)
    dr, dc = MOVES[action]
    target = GridPos(pos[0] + dr, pos[1] + dc)
    collided = not world.is_free(target)
    nxt = GridPos(*pos) if collided else target
    reached = nxt == world.goal
    reward = world.step_cost
    if collided:
        reward += world.collision_penalty
    if reached:
        reward += world.goal_bonus
    return StepOutcome(nxt, float(reward), collided, reached, reached)


def state_index(world: GridWorld, pos) -> int:
    return pos[0] * world.width + pos[1]


def encode_state(world: GridWorld, pos) -> np.ndarray:
    if not world.in_bounds(pos):
        raise WorldError(f"position {tuple(pos)} outside the grid")
    x = np.zeros(world.n_cells)
    x[state_index(world, pos)] = 1.0
    return x


def _bfs(world: GridWorld):
    prev = {world.start: None}
    queue = deque([world.start])
    while queue:
        cur = queue.popleft()
        if cur == world.goal:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        for a in Action:
            dr, dc = MOVES[a]
            nb = GridPos(cur.row + dr, cur.col + dc)
            if nb not in prev and world.in_bounds(nb) and nb not in world.obstacles:
                prev[nb] = cur
                queue.append(nb)
    return None


def bfs_shortest_path(world: GridWorld) -> tuple[int, list[GridPos]]:
    """Shortest start-to-goal path; neighbours expanded Up, Down, Left, Right."""
    path = _bfs(world)
    if path is None:
        raise UnreachableGoalError("goal is not reachable from start")
    return len(path) - 1, path


def parse_map(text: str, max_steps: int = 200, **rewards) -> GridWorld:
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise WorldError("empty map")
    width = len(lines[0])
    if any(len(ln) != width for ln in lines):
        raise WorldError("map is not rectangular")
    height = len(lines)
    if width < 2 or height < 2:
        raise WorldError(f"grid must be at least 2x2, got {width}x{height}")
    start = goal = None
    obstacles = set()
    for i, line in enumerate(lines):
        row = height - 1 - i
        for col, ch in enumerate(line):
            pos = GridPos(row, col)
            if ch == "#":
                obstacles.add(pos)
            elif ch == "S":
                if start is not None:
                    raise WorldError("duplicate start 'S'")
                start = pos
            elif ch == "G":
                if goal is not None:
                    raise WorldError("duplicate goal 'G'")
                goal = pos
            elif ch != ".":
                raise WorldError(f"unexpected map character {ch!r}")
    if start is None or goal is None:
        raise WorldError("map needs exactly one 'S' and one 'G'")
    return GridWorld(width, height, start, goal, frozenset(obstacles), max_steps, **rewards)


def load_map(path, **kwargs) -> GridWorld:
    with open(path) as fh:
        return parse_map(fh.read(), **kwargs)


def render(world: GridWorld, path=None) -> str:
    """ASCII picture, top row first; '*' marks path cells other than S and G."""
    grid = [["." for _ in range(world.width)] for _ in range(world.height)]
    for r, c in world.obstacles:
        grid[r][c] = "#"
    for r, c in path or ():
        if grid[r][c] == ".":
            grid[r][c] = "*"
    grid[world.start.row][world.start.col] = "S"
    grid[world.goal.row][world.goal.col] = "G"
    return "\n".join("".join(row) for row in reversed(grid)) + "\n"
