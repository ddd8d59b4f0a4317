"""Comparison agents: tabular Q-learning and a uniform random policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import N_ACTIONS, GridWorld, state_index
from .episode import greedy_action, linear_epsilon, play_episode


@dataclass
class TabularConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 300

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")


@dataclass
class RandomConfig:
    gamma: float = 0.95  # only used when reporting discounted returns


class TabularQAgent:
    def __init__(self, n_states: int, config: TabularConfig, table=None):
        self.config = config
        self.table = np.zeros((n_states, N_ACTIONS)) if table is None else np.asarray(table, dtype=np.float64)

    def act(self, world: GridWorld, pos, epsilon: float, rng: np.random.Generator) -> int:
        if rng.random() < epsilon:
            return int(rng.integers(N_ACTIONS))
        return greedy_action(self.table[state_index(world, pos)])

    def update(self, world: GridWorld, pos, action: int, out) -> None:
        s, s2 = state_index(world, pos), state_index(world, out.next)
        target = out.reward if out.done else out.reward + self.config.gamma * self.table[s2].max()
        self.table[s, action] += self.config.alpha * (target - self.table[s, action])


class RandomAgent:
    """Uniform over the four actions; never learns and ignores epsilon."""

    def __init__(self, config: RandomConfig | None = None):
        self.config = config or RandomConfig()

    def act(self, world: GridWorld, pos, epsilon: float, rng: np.random.Generator) -> int:
        return int(rng.integers(N_ACTIONS))


def tabular_q_agent(n_states: int, config: TabularConfig | None = None) -> TabularQAgent:
    return TabularQAgent(n_states, config or TabularConfig())


def random_agent(config: RandomConfig | None = None) -> RandomAgent:
    return RandomAgent(config)


def train_tabular(agent: TabularQAgent, world: GridWorld, episodes: int, seed: int) -> list:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    cfg = agent.config
    rng = np.random.default_rng(seed)
    records = []
    for ep in range(episodes):
        eps = linear_epsilon(ep, cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_decay_episodes)
        records.append(play_episode(
            world, lambda pos: agent.act(world, pos, eps, rng),
            lambda pos, a, out: agent.update(world, pos, a, out)))
    return records


def train_random(agent: RandomAgent, world: GridWorld, episodes: int, seed: int) -> list:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    return [play_episode(world, lambda pos: agent.act(world, pos, 1.0, rng)) for _ in range(episodes)]
