"""Gridworld navigation with DQN and PPO implemented on a numpy MLP."""

from .env import Action, GridPos, GridWorld, generate_world, parse_map
from .metrics import EpisodeRecord, RunSummary

__all__ = ["Action", "GridPos", "GridWorld", "generate_world", "parse_map",
           "EpisodeRecord", "RunSummary"]
__version__ = "0.1.0"
