"""Per-episode and per-run navigation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EpisodeRecord:
    path: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    collisions: int = 0
    reached_goal: bool = False

    @property
    def steps(self) -> int:
        return len(self.actions)

    def validate(self) -> None:
        if not (len(self.actions) == len(self.rewards) == len(self.path) - 1):
            raise ValueError("path/actions/rewards lengths are inconsistent")
        if self.collisions > self.steps:
            raise ValueError("more collisions than steps")


@dataclass
class RunSummary:
    episodes: int
    success_rate: float
    mean_collisions: float
    std_collisions: float
    mean_smoothness: float
    std_smoothness: float
    mean_steps: float
    std_steps: float
    mean_return: float
    std_return: float


def collision_count(record: EpisodeRecord) -> int:
    return record.collisions


def replay_collisions(record: EpisodeRecord) -> int:
    """Collisions recounted from the path: steps where the agent did not move."""
    return sum(1 for a, b in zip(record.path, record.path[1:]) if tuple(a) == tuple(b))


def direction_changes(actions) -> int:
    return sum(1 for a, b in zip(actions, actions[1:]) if a != b)


def smoothness(record: EpisodeRecord) -> float:
    """``1 - turns / (steps - 1)``; 1.0 for episodes of at most one step."""
    n = record.steps
    if n <= 1:
        return 1.0
    return 1.0 - direction_changes(record.actions) / (n - 1)


def discounted_return(rewards, gamma: float) -> float:
    total, scale = 0.0, 1.0
    for r in rewards:
        total += scale * r
        scale *= gamma
    return total


def aggregate(records, gamma: float) -> RunSummary:
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    coll = np.array([r.collisions for r in records], dtype=np.float64)
    smooth = np.array([smoothness(r) for r in records])
    steps = np.array([r.steps for r in records], dtype=np.float64)
    ret = np.array([discounted_return(r.rewards, gamma) for r in records])
    return RunSummary(
        episodes=len(records),
        success_rate=sum(r.reached_goal for r in records) / len(records),
        mean_collisions=float(coll.mean()), std_collisions=float(coll.std()),
        mean_smoothness=float(smooth.mean()), std_smoothness=float(smooth.std()),
        mean_steps=float(steps.mean()), std_steps=float(steps.std()),
        mean_return=float(ret.mean()), std_return=float(ret.std()),
    )
