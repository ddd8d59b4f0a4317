"""Deep Q-Network: epsilon-greedy acting, experience replay and a hard-synced target net."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import N_ACTIONS, GridWorld, Transition, encode_state
from .episode import greedy_action, linear_epsilon, play_episode
from .mlp import AdamState, NeuralNet, adam_step, backward, forward, init_net


@dataclass
class DqnConfig:
    gamma: float = 0.95
    lr: float = 1e-3
    buffer_capacity: int = 10_000
    batch_size: int = 64
    target_sync_interval: int = 100
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 300
    learn_start: int = 500
    hidden: list = field(default_factory=lambda: [128])

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if self.target_sync_interval < 1:
            raise ValueError("target_sync_interval must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


class InsufficientBufferError(ValueError):
    pass


class ReplayBuffer:
    """Bounded FIFO of transitions backed by a ring array."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items = []
        self._head = 0  # index of the oldest item once full

    def __len__(self):
        return len(self._items)

    def push(self, t) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._head] = t
            self._head = (self._head + 1) % self.capacity

    def items(self) -> list:
        """Contents from oldest to newest."""
        return self._items[self._head:] + self._items[:self._head]

    def sample(self, n: int, rng: np.random.Generator) -> list:
        if len(self._items) < n:
            raise InsufficientBufferError(f"buffer holds {len(self._items)} < {n} transitions")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


def push_transition(buffer: ReplayBuffer, t) -> None:
    buffer.push(t)


def sample_minibatch(buffer: ReplayBuffer, n: int, rng: np.random.Generator) -> list:
    return buffer.sample(n, rng)


class DqnAgent:
    def __init__(self, online_net: NeuralNet, config: DqnConfig, target_net: NeuralNet | None = None):
        self.config = config
        self.online_net = online_net
        self.target_net = target_net if target_net is not None else online_net.copy()
        if self.target_net.dims != online_net.dims:
            raise ValueError("online and target nets must have the same shape")
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.adam = AdamState.for_net(online_net)
        self.gradient_steps = 0

    @classmethod
    def create(cls, n_inputs: int, config: DqnConfig, seed: int) -> "DqnAgent":
        net = init_net([n_inputs, *config.hidden, N_ACTIONS], seed)
        return cls(net, config)


def q_values(agent: DqnAgent, state) -> np.ndarray:
    return forward(agent.online_net, state)[0]


def select_action(agent: DqnAgent, state, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy_action(q_values(agent, state))


def td_targets(batch, target_net: NeuralNet, gamma: float) -> np.ndarray:
    """``r + gamma * max_a' Q(s', a'; target)``, with the bootstrap masked on terminal steps."""
    if not batch:
        raise ValueError("empty batch")
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    not_done = np.array([not t.done for t in batch], dtype=np.float64)
    q_next = forward(target_net, np.stack([t.next_state for t in batch]))[0]
    bootstrap = np.where(not_done > 0, gamma * q_next.max(axis=1), 0.0)
    return rewards + bootstrap


def dqn_loss_and_grads(online: NeuralNet, target: NeuralNet, batch, gamma: float):
    """Mean squared TD error at the taken actions and its gradient w.r.t. the online net."""
    y = td_targets(batch, target, gamma)
    states = np.stack([t.state for t in batch])
    actions = np.array([int(t.action) for t in batch])
    q, cache = forward(online, states)
    rows = np.arange(len(batch))
    diff = q[rows, actions] - y
    loss = float(np.mean(diff ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * diff / len(batch)
    return loss, backward(online, cache, dq)


def sync_target(agent: DqnAgent) -> None:
    agent.target_net.copy_from(agent.online_net)


def dqn_update(agent: DqnAgent, batch) -> float:
    cfg = agent.config
    if len(batch) != cfg.batch_size:
        raise ValueError(f"batch of {len(batch)} != configured batch_size {cfg.batch_size}")
    loss, grads = dqn_loss_and_grads(agent.online_net, agent.target_net, batch, cfg.gamma)
    adam_step(agent.online_net, grads, agent.adam, cfg.lr)
    agent.gradient_steps += 1
    if agent.gradient_steps % cfg.target_sync_interval == 0:
        sync_target(agent)
    return loss


def train_dqn(agent: DqnAgent, world: GridWorld, episodes: int, seed: int) -> list:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    cfg = agent.config
    rng = np.random.default_rng(seed)
    states = {}

    def enc(pos):
        if pos not in states:
            states[pos] = encode_state(world, pos)
        return states[pos]

    learn_after = max(cfg.learn_start, cfg.batch_size)

    def observe(pos, action, out):
        agent.buffer.push(Transition(enc(pos), action, out.reward, enc(out.next), out.done))
        if len(agent.buffer) >= learn_after:
            dqn_update(agent, agent.buffer.sample(cfg.batch_size, rng))

    records = []
    for ep in range(episodes):
        eps = linear_epsilon(ep, cfg.epsilon_start, cfg.epsilon_end, cfg.epsilon_decay_episodes)
        records.append(play_episode(
            world, lambda pos: select_action(agent, enc(pos), eps, rng), observe))
    return records


def greedy_policy(agent: DqnAgent, world: GridWorld):
    return lambda pos: greedy_action(q_values(agent, encode_state(world, pos)))
