"""Proximal policy optimization with separate policy and value networks.

The policy net maps a one-hot state to 4 action logits; the value net maps
it to a scalar. Advantages use GAE and the policy is trained on the clipped
surrogate plus a value-regression term and an entropy bonus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import N_ACTIONS, GridWorld, encode_state, step
from .episode import greedy_action
from .metrics import EpisodeRecord
from .mlp import AdamState, NeuralNet, adam_step, backward, forward, init_net

VARIANCE_GUARD = 1e-12


@dataclass
class PpoConfig:
    gamma: float = 0.95
    lam: float = 0.95
    clip_epsilon: float = 0.2
    rollout_length: int = 512
    update_epochs: int = 4
    minibatch_size: int = 64
    lr: float = 1e-3
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    hidden: list = field(default_factory=lambda: [128])

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if not 1 <= self.minibatch_size <= self.rollout_length:
            raise ValueError("need 1 <= minibatch_size <= rollout_length")
        if self.update_epochs < 1:
            raise ValueError("update_epochs must be >= 1")
        if self.value_coef < 0 or self.entropy_coef < 0 or self.lr < 0:
            raise ValueError("lr, value_coef and entropy_coef must be non-negative")


class ActorCritic:
    def __init__(self, policy_net: NeuralNet, value_net: NeuralNet, config: PpoConfig | None = None):
        if policy_net.in_dim != value_net.in_dim:
            raise ValueError("policy and value nets must share the input dimension")
        if policy_net.out_dim != N_ACTIONS or value_net.out_dim != 1:
            raise ValueError("policy net needs 4 outputs and value net 1")
        self.policy_net = policy_net
        self.value_net = value_net
        self.config = config or PpoConfig()
        self.policy_adam = AdamState.for_net(policy_net)
        self.value_adam = AdamState.for_net(value_net)

    @classmethod
    def create(cls, n_inputs: int, config: PpoConfig, seed: int) -> "ActorCritic":
        # independent streams for the two nets
        s_pol, s_val = np.random.SeedSequence(seed).generate_state(2)
        return cls(init_net([n_inputs, *config.hidden, N_ACTIONS], int(s_pol)),
                   init_net([n_inputs, *config.hidden, 1], int(s_val)), config)


def softmax(logits) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_probs(ac: ActorCritic, state) -> np.ndarray:
    return softmax(forward(ac.policy_net, state)[0])


def state_value(ac: ActorCritic, state) -> float:
    return float(forward(ac.value_net, state)[0][0])


@dataclass
class Rollout:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    logp_old: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    bootstrap_value: float
    episodes: list = field(default_factory=list)  # episodes completed during collection

    def __len__(self):
        return len(self.actions)


@dataclass
class Advantages:
    advantages: np.ndarray
    returns: np.ndarray
    raw: np.ndarray


class EpisodeCursor:
    """Where collection currently stands inside an episode; carried across rollouts."""

    def __init__(self, world: GridWorld):
        self.world = world
        self.reset()

    def reset(self):
        self.pos = self.world.start
        self.record = EpisodeRecord(path=[self.pos])


def _sample(probs, rng) -> int:
    a = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return min(a, N_ACTIONS - 1)


def collect_rollout(ac: ActorCritic, world: GridWorld, T: int, rng: np.random.Generator,
                    cursor: EpisodeCursor | None = None) -> Rollout:
    """Sample ``T`` steps from the current policy, resetting at goal or step cap."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if cursor is None:
        cursor = EpisodeCursor(world)
    n = world.n_cells
    states = np.zeros((T, n))
    actions = np.zeros(T, dtype=np.int64)
    rewards, logp, values, dones = np.zeros(T), np.zeros(T), np.zeros(T), np.zeros(T, dtype=bool)
    finished = []
    for t in range(T):
        x = encode_state(world, cursor.pos)
        logits = forward(ac.policy_net, x)[0]
        a = _sample(softmax(logits), rng)
        out = step(world, cursor.pos, a)
        states[t] = x
        actions[t] = a
        rewards[t] = out.reward
        logp[t] = log_softmax(logits)[a]
        values[t] = forward(ac.value_net, x)[0][0]
        rec = cursor.record
        rec.path.append(out.next)
        rec.actions.append(a)
        rec.rewards.append(out.reward)
        rec.collisions += out.collided
        cursor.pos = out.next
        if out.done or rec.steps >= world.max_steps:
            rec.reached_goal = out.reached_goal
            dones[t] = True
            finished.append(rec)
            cursor.reset()
    boot = state_value(ac, encode_state(world, cursor.pos))
    return Rollout(states, actions, rewards, logp, values, dones, boot, finished)


def compute_advantages(rollout: Rollout, gamma: float, lam: float, normalize: bool = True) -> Advantages:
    T = len(rollout)
    raw = np.zeros(T)
    next_adv = 0.0
    next_value = rollout.bootstrap_value
    for t in range(T - 1, -1, -1):
        live = 0.0 if rollout.dones[t] else 1.0
        delta = rollout.rewards[t] + gamma * next_value * live - rollout.values[t]
        next_adv = delta + gamma * lam * live * next_adv
        raw[t] = next_adv
        next_value = rollout.values[t]
    returns = raw + rollout.values
    adv = raw.copy()
    if normalize and T > 1 and adv.var() >= VARIANCE_GUARD:
        adv = (adv - adv.mean()) / adv.std()
    return Advantages(adv, returns, raw)


def clipped_surrogate(logp_new, logp_old, adv, clip_epsilon: float) -> float:
    """Mean of ``min(rho * A, clip(rho, 1-eps, 1+eps) * A)``; to be maximized."""
    logp_new, logp_old, adv = (np.asarray(v, dtype=np.float64) for v in (logp_new, logp_old, adv))
    if not (logp_new.shape == logp_old.shape == adv.shape):
        raise ValueError("inputs must have equal length")
    if not 0.0 < clip_epsilon < 1.0:
        raise ValueError("clip_epsilon must be in (0, 1)")
    if not all(np.isfinite(v).all() for v in (logp_new, logp_old, adv)):
        raise ValueError("non-finite surrogate input")
    rho = np.exp(logp_new - logp_old)
    terms = np.minimum(rho * adv, np.clip(rho, 1 - clip_epsilon, 1 + clip_epsilon) * adv)
    return float(terms.mean())


@dataclass
class LossParts:
    loss: float
    surrogate: float
    value_loss: float
    entropy: float
    clip_fraction: float


def ppo_loss_and_grads(ac: ActorCritic, states, actions, logp_old, adv, returns, config: PpoConfig):
    """Total loss ``-surrogate + c_v * MSE - c_e * entropy`` and its gradients.

    Returns ``(LossParts, policy_grads, value_grads)``.
    """
    n = len(actions)
    rows = np.arange(n)
    eps = config.clip_epsilon

    logits, pcache = forward(ac.policy_net, states)
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    logp_new = logp_all[rows, actions]
    rho = np.exp(logp_new - logp_old)
    unclipped = rho * adv
    clipped = np.clip(rho, 1 - eps, 1 + eps) * adv
    surrogate = float(np.minimum(unclipped, clipped).mean())
    # the min selects the constant clipped branch exactly in these cases
    clip_active = ((adv > 0) & (rho > 1 + eps)) | ((adv < 0) & (rho < 1 - eps))
    entropy_each = -(probs * logp_all).sum(axis=1)
    entropy = float(entropy_each.mean())

    values, vcache = forward(ac.value_net, states)
    err = values[:, 0] - returns
    value_loss = float(np.mean(err ** 2))

    loss = -surrogate + config.value_coef * value_loss - config.entropy_coef * entropy

    # d(-surrogate)/d logp_new, then through log-softmax
    d_logp = np.where(clip_active, 0.0, -unclipped) / n
    onehot = np.zeros_like(logits)
    onehot[rows, actions] = 1.0
    d_logits = d_logp[:, None] * (onehot - probs)
    # entropy: dH/dz_j = -p_j (log p_j + H)
    d_ent = -probs * (logp_all + entropy_each[:, None])
    d_logits -= config.entropy_coef * d_ent / n
    pgrads = backward(ac.policy_net, pcache, d_logits)
    vgrads = backward(ac.value_net, vcache, (2.0 * config.value_coef / n) * err[:, None])

    parts = LossParts(float(loss), surrogate, value_loss, entropy, float(clip_active.mean()))
    return parts, pgrads, vgrads


@dataclass
class UpdateStats:
    surrogate: float
    value_loss: float
    entropy: float
    clip_fraction: float
    minibatches: list  # LossParts per minibatch, in order


def ppo_update(ac: ActorCritic, rollout: Rollout, adv: Advantages, config: PpoConfig,
               rng: np.random.Generator) -> UpdateStats:
    T = len(rollout)
    history = []
    for _ in range(config.update_epochs):
        order = rng.permutation(T)
        for lo in range(0, T, config.minibatch_size):
            idx = order[lo:lo + config.minibatch_size]
            parts, pg, vg = ppo_loss_and_grads(
                ac, rollout.states[idx], rollout.actions[idx], rollout.logp_old[idx],
                adv.advantages[idx], adv.returns[idx], config)
            adam_step(ac.policy_net, pg, ac.policy_adam, config.lr)
            adam_step(ac.value_net, vg, ac.value_adam, config.lr)
            history.append(parts)
    return UpdateStats(
        surrogate=float(np.mean([h.surrogate for h in history])),
        value_loss=float(np.mean([h.value_loss for h in history])),
        entropy=float(np.mean([h.entropy for h in history])),
        clip_fraction=float(np.mean([h.clip_fraction for h in history])),
        minibatches=history,
    )


def train_ppo(ac: ActorCritic, world: GridWorld, episodes: int, config: PpoConfig, seed: int) -> list:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    cursor = EpisodeCursor(world)
    records = []
    while True:
        rollout = collect_rollout(ac, world, config.rollout_length, rng, cursor)
        records.extend(rollout.episodes)
        if len(records) >= episodes:
            return records[:episodes]
        adv = compute_advantages(rollout, config.gamma, config.lam)
        ppo_update(ac, rollout, adv, config, rng)


def mode_policy(ac: ActorCritic, world: GridWorld):
    return lambda pos: greedy_action(forward(ac.policy_net, encode_state(world, pos))[0])
