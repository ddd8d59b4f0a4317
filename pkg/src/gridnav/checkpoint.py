"""Agent checkpoints: a short header followed by one or more network blocks.

Layout (text, UTF-8)::

    gridnav-agent 1
    role <dqn|ppo|tabular_q>
    config <one-line JSON of the agent configuration>
    counters <one-line JSON, e.g. {"gradient_steps": 1200}>
    net <name>
    <network block in the gridnav-mlp format>
    net <name>
    ...

Net names per role: dqn -> online, target; ppo -> policy, value;
tabular_q -> table (a single linear layer whose weight matrix is the
transposed Q table, so a one-hot forward pass returns one table row).
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .baselines import TabularConfig, TabularQAgent
from .dqn import DqnAgent, DqnConfig
from .mlp import NeuralNet, dump_net_lines, parse_net_lines
from .ppo import ActorCritic, PpoConfig

AGENT_MAGIC = "gridnav-agent"
AGENT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _table_net(agent: TabularQAgent) -> NeuralNet:
    return NeuralNet([agent.table.T.copy()], [np.zeros(agent.table.shape[1])])


def agent_to_text(agent) -> str:
    if isinstance(agent, DqnAgent):
        role, counters = "dqn", {"gradient_steps": agent.gradient_steps}
        nets = [("online", agent.online_net), ("target", agent.target_net)]
    elif isinstance(agent, ActorCritic):
        role, counters = "ppo", {}
        nets = [("policy", agent.policy_net), ("value", agent.value_net)]
    elif isinstance(agent, TabularQAgent):
        role, counters = "tabular_q", {}
        nets = [("table", _table_net(agent))]
    else:
        raise CheckpointError(f"cannot checkpoint {type(agent).__name__}")
    lines = [
        f"{AGENT_MAGIC} {AGENT_VERSION}",
        f"role {role}",
        "config " + json.dumps(asdict(agent.config), sort_keys=True),
        "counters " + json.dumps(counters, sort_keys=True),
    ]
    for name, net in nets:
        lines.append(f"net {name}")
        lines.extend(dump_net_lines(net))
    return "\n".join(lines) + "\n"


def agent_from_text(text: str):
    lines = text.splitlines()
    try:
        if lines[0].split() != [AGENT_MAGIC, str(AGENT_VERSION)]:
            raise CheckpointError(f"not a {AGENT_MAGIC} v{AGENT_VERSION} file")
        role = lines[1].split(maxsplit=1)[1]
        config = json.loads(lines[2].split(maxsplit=1)[1])
        counters = json.loads(lines[3].split(maxsplit=1)[1])
        nets, pos = {}, 4
        while pos < len(lines) and lines[pos]:
            if not lines[pos].startswith("net "):
                raise CheckpointError(f"expected a 'net' line, got {lines[pos]!r}")
            name = lines[pos][4:]
            nets[name], pos = parse_net_lines(lines, pos + 1)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc

    if role == "dqn":
        agent = DqnAgent(nets["online"], DqnConfig(**config), nets["target"])
        agent.gradient_steps = counters.get("gradient_steps", 0)
        return agent
    if role == "ppo":
        return ActorCritic(nets["policy"], nets["value"], PpoConfig(**config))
    if role == "tabular_q":
        table = nets["table"].weights[0].T.copy()
        return TabularQAgent(table.shape[0], TabularConfig(**config), table)
    raise CheckpointError(f"unknown role {role!r}")


def save_agent(agent, path) -> None:
    with open(path, "w") as fh:
        fh.write(agent_to_text(agent))


def load_agent(path):
    with open(path) as fh:
        return agent_from_text(fh.read())


def input_dim(agent) -> int:
    if isinstance(agent, DqnAgent):
        return agent.online_net.in_dim
    if isinstance(agent, ActorCritic):
        return agent.policy_net.in_dim
    if isinstance(agent, TabularQAgent):
        return agent.table.shape[0]
    raise CheckpointError(f"unsupported agent {type(agent).__name__}")
