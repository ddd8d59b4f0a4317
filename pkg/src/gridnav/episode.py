"""Episode loop shared by the value-based agents and the random baseline."""

from __future__ import annotations

import numpy as np

from .env import GridWorld, step
from .metrics import EpisodeRecord


def play_episode(world: GridWorld, policy, observe=None) -> EpisodeRecord:
    """Run from ``world.start`` until the goal or ``world.max_steps``.

    ``policy(pos)`` returns an action; ``observe(pos, action, outcome)`` is
    called after every step (learning hooks go there).
    """
    pos = world.start
    record = EpisodeRecord(path=[pos])
    for _ in range(world.max_steps):
        action = int(policy(pos))
        out = step(world, pos, action)
        record.path.append(out.next)
        record.actions.append(action)
        record.rewards.append(out.reward)
        record.collisions += out.collided
        if observe is not None:
            observe(pos, action, out)
        pos = out.next
        if out.done:
            record.reached_goal = True
            break
    return record


def linear_epsilon(episode: int, start: float, end: float, decay_episodes: int) -> float:
    if decay_episodes <= 0:
        return end
    frac = min(episode / decay_episodes, 1.0)
    return start + (end - start) * frac


def greedy_action(values) -> int:
    """Argmax with ties broken toward the lowest action index."""
    return int(np.argmax(values))
