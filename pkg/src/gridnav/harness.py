"""Experiment protocol: independent runs on one fixed world, CSV outputs.

Seed contract
-------------
``mix(a, b) = splitmix64(splitmix64(a) XOR b)`` over unsigned 64-bit
integers, where ``splitmix64`` is the standard finalizer (add
0x9E3779B97F4A7C15, then xor-shift-multiply by 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB with shifts 30, 27, 31).

* world:        ``generate_world(..., seed=master_seed)`` (shared by all runs)
* run seed:     ``mix(master_seed, run_id)``
* agent init:   ``mix(run_seed, 0)``
* training RNG: ``mix(run_seed, 1)``
* random-baseline trajectory RNG: ``mix(run_seed, 2)``
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import (RandomAgent, RandomConfig, TabularConfig, TabularQAgent,
                        train_random, train_tabular)
from .checkpoint import CheckpointError, agent_to_text, input_dim, load_agent
from .dqn import DqnAgent, DqnConfig, greedy_policy, train_dqn
from .env import GridWorld, generate_world, load_map, render, state_index
from .episode import greedy_action, play_episode
from .metrics import (EpisodeRecord, RunSummary, aggregate, direction_changes,
                      discounted_return, smoothness)
from .ppo import ActorCritic, PpoConfig, mode_policy, train_ppo

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

AGENT_CONFIGS = {
    "dqn": DqnConfig,
    "ppo": PpoConfig,
    "tabular_q": TabularConfig,
    "random": RandomConfig,
}

EPISODE_COLUMNS = ["run_id", "episode", "steps", "collisions", "reward_sum", "discounted_return",
                   "reached_goal", "direction_changes", "smoothness"]
AGGREGATE_COLUMNS = ["run_id", "mean_collisions", "std_collisions", "mean_smoothness",
                     "std_smoothness", "mean_steps", "success_rate"]
CROSS_METRICS = ["collisions", "smoothness", "steps", "return", "success_rate"]


class ConfigError(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_seed(a: int, b: int) -> int:
    return splitmix64(splitmix64(a & MASK64) ^ (b & MASK64))


def run_seed(master_seed: int, run_id: int) -> int:
    return mix_seed(master_seed, run_id)


@dataclass
class WorldConfig:
    width: int = 10
    height: int = 10
    obstacle_count: int = 15
    max_steps: int = 200
    map: str | None = None
    step_cost: float = -1.0
    collision_penalty: float = -10.0
    goal_bonus: float = 100.0


@dataclass
class ExperimentConfig:
    algorithm: str = "dqn"
    world: WorldConfig = field(default_factory=WorldConfig)
    agent: object = None
    runs: int = 100
    episodes: int = 500
    master_seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        if self.algorithm not in AGENT_CONFIGS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {sorted(AGENT_CONFIGS)}")
        if self.agent is None:
            self.agent = AGENT_CONFIGS[self.algorithm]()
        if not isinstance(self.agent, AGENT_CONFIGS[self.algorithm]):
            raise ConfigError(f"agent block does not match algorithm {self.algorithm!r}")
        if self.runs < 1 or self.episodes < 1:
            raise ConfigError("runs and episodes must be >= 1")

    @property
    def gamma(self) -> float:
        return self.agent.gamma


def _strict(cls, block, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def config_from_dict(doc: dict, base_dir=None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    algorithm = doc.get("algorithm", "dqn")
    if algorithm not in AGENT_CONFIGS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {sorted(AGENT_CONFIGS)}")
    world = _strict(WorldConfig, doc.get("world", {}), "world")
    if world.map and base_dir is not None and not os.path.isabs(world.map):
        world.map = str(Path(base_dir) / world.map)
    agent = _strict(AGENT_CONFIGS[algorithm], doc.get("agent", {}), "agent")
    rest = {k: doc[k] for k in ("runs", "episodes", "master_seed", "output_dir") if k in doc}
    for k in ("runs", "episodes", "master_seed"):
        if k in rest and (not isinstance(rest[k], int) or isinstance(rest[k], bool)):
            raise ConfigError(f"{k} must be an integer")
    return ExperimentConfig(algorithm=algorithm, world=world, agent=agent, **rest)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc, base_dir=Path(path).parent)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "algorithm": config.algorithm,
        "world": asdict(config.world),
        "agent": asdict(config.agent),
        "runs": config.runs,
        "episodes": config.episodes,
        "master_seed": config.master_seed,
        "output_dir": config.output_dir,
    }


def build_world(config: ExperimentConfig) -> GridWorld:
    """The suite's single world; depends on ``master_seed`` only, never on the run."""
    w = config.world
    rewards = dict(step_cost=w.step_cost, collision_penalty=w.collision_penalty, goal_bonus=w.goal_bonus)
    if w.map:
        return load_map(w.map, max_steps=w.max_steps, **rewards)
    return generate_world(w.width, w.height, w.obstacle_count, config.master_seed,
                          max_steps=w.max_steps, **rewards)


def make_agent(config: ExperimentConfig, world: GridWorld, seed: int):
    cfg, n = config.agent, world.n_cells
    if config.algorithm == "dqn":
        return DqnAgent.create(n, cfg, seed)
    if config.algorithm == "ppo":
        return ActorCritic.create(n, cfg, seed)
    if config.algorithm == "tabular_q":
        return TabularQAgent(n, cfg)
    return RandomAgent(cfg)


def train_agent(agent, world: GridWorld, episodes: int, seed: int) -> list:
    if isinstance(agent, DqnAgent):
        return train_dqn(agent, world, episodes, seed)
    if isinstance(agent, ActorCritic):
        return train_ppo(agent, world, episodes, agent.config, seed)
    if isinstance(agent, TabularQAgent):
        return train_tabular(agent, world, episodes, seed)
    return train_random(agent, world, episodes, seed)


def greedy_trajectory(agent, world: GridWorld, rng: np.random.Generator | None = None) -> EpisodeRecord:
    """Deterministic greedy (or policy-mode) rollout from the start, capped at ``max_steps``.

    ``agent`` may be a checkpoint path. The random baseline has no mode, so
    it needs ``rng`` and samples a path instead.
    """
    if isinstance(agent, (str, os.PathLike)):
        agent = load_agent(agent)
    if isinstance(agent, RandomAgent):
        if rng is None:
            raise ValueError("the random agent needs an rng to produce a trajectory")
        return play_episode(world, lambda pos: agent.act(world, pos, 1.0, rng))
    if input_dim(agent) != world.n_cells:
        raise CheckpointError(
            f"checkpoint expects {input_dim(agent)} cells, world has {world.n_cells}")
    if isinstance(agent, DqnAgent):
        policy = greedy_policy(agent, world)
    elif isinstance(agent, ActorCritic):
        policy = mode_policy(agent, world)
    else:
        policy = lambda pos: greedy_action(agent.table[state_index(world, pos)])  # noqa: E731
    return play_episode(world, policy)


@dataclass
class RunResult:
    run_id: int
    records: list
    summary: RunSummary
    trajectory: EpisodeRecord
    checkpoint: str | None


def run_single(config: ExperimentConfig, run_id: int, world: GridWorld | None = None,
               keep_checkpoint: bool = True) -> RunResult:
    if not 0 <= run_id < config.runs:
        raise ValueError(f"run_id {run_id} outside [0, {config.runs})")
    if world is None:
        world = build_world(config)
    seed = run_seed(config.master_seed, run_id)
    agent = make_agent(config, world, mix_seed(seed, 0))
    records = train_agent(agent, world, config.episodes, mix_seed(seed, 1))
    summary = aggregate(records, config.gamma)
    traj = greedy_trajectory(agent, world, rng=np.random.default_rng(mix_seed(seed, 2)))
    ckpt = None
    if keep_checkpoint and not isinstance(agent, RandomAgent):
        ckpt = agent_to_text(agent)
    return RunResult(run_id, records, summary, traj, ckpt)


def _run_job(args):
    config, run_id, world = args
    return run_single(config, run_id, world, keep_checkpoint=(run_id == 0))


@dataclass
class SuiteResult:
    algorithm: str
    summaries: list
    cross: dict
    records: list = field(default_factory=list)  # per run
    trajectory: EpisodeRecord | None = None  # run 0's greedy path
    checkpoint: str | None = None  # run 0's agent


def cross_run(summaries) -> dict:
    """Mean and population std of the per-run means, per metric."""
    out = {}
    for name in CROSS_METRICS:
        attr = "success_rate" if name == "success_rate" else f"mean_{name}"
        vals = np.array([getattr(s, attr) for s in summaries])
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def execute_runs(config: ExperimentConfig, world: GridWorld, workers: int = 1) -> list:
    jobs = [(config, i, world) for i in range(config.runs)]
    if workers <= 1 or config.runs == 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_job, j) for j in jobs]
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        for fut in futures:
            if fut.done() and fut.exception() is not None:
                for p in pending:
                    p.cancel()
                raise fut.exception()
        return [f.result() for f in futures]


def run_suite(config: ExperimentConfig, workers: int = 1, write: bool = True) -> SuiteResult:
    world = build_world(config)
    log.info("suite %s: %d runs x %d episodes, workers=%d",
             config.algorithm, config.runs, config.episodes, workers)
    results = execute_runs(config, world, workers)
    summaries = [r.summary for r in results]
    suite = SuiteResult(config.algorithm, summaries, cross_run(summaries),
                        [r.records for r in results], results[0].trajectory, results[0].checkpoint)
    if write:
        write_suite(suite, config, Path(config.output_dir))
    return suite


def _f(x: float) -> str:
    return format(float(x), ".17g")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def episode_rows(run_id: int, records, gamma: float):
    for ep, r in enumerate(records):
        yield [run_id, ep, r.steps, r.collisions, _f(sum(r.rewards)),
               _f(discounted_return(r.rewards, gamma)), int(r.reached_goal),
               direction_changes(r.actions), _f(smoothness(r))]


def write_episodes_csv(path, records_by_run, gamma: float) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(EPISODE_COLUMNS)
        for run_id, records in records_by_run:
            w.writerows(episode_rows(run_id, records, gamma))


def write_aggregate_csv(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for run_id, s in enumerate(summaries):
            w.writerow([run_id, _f(s.mean_collisions), _f(s.std_collisions), _f(s.mean_smoothness),
                        _f(s.std_smoothness), _f(s.mean_steps), _f(s.success_rate)])


def suite_to_json(suite: SuiteResult) -> str:
    doc = {
        "algorithm": suite.algorithm,
        "runs": [asdict(s) for s in suite.summaries],
        "cross": suite.cross,
        "trajectory": [list(p) for p in suite.trajectory.path] if suite.trajectory else [],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def suite_from_json(text: str) -> SuiteResult:
    doc = json.loads(text)
    summaries = [RunSummary(**s) for s in doc["runs"]]
    path = [tuple(p) for p in doc["trajectory"]]
    traj = EpisodeRecord(path=path) if path else None
    return SuiteResult(doc["algorithm"], summaries, doc["cross"], [], traj)


def write_suite(suite: SuiteResult, config: ExperimentConfig, out: Path) -> list:
    """Write every suite artifact; on failure remove whatever was written."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        p = out / "episodes.csv"
        write_episodes_csv(p, enumerate(suite.records), config.gamma)
        written.append(p)
        p = out / "aggregate.csv"
        write_aggregate_csv(p, suite.summaries)
        written.append(p)
        p = out / "suite.json"
        p.write_text(suite_to_json(suite))
        written.append(p)
        p = out / "world.map"
        p.write_text(render(build_world(config)))
        written.append(p)
        p = out / "config.json"
        p.write_text(json.dumps(config_to_dict(config), indent=1, sort_keys=True) + "\n")
        written.append(p)
        if suite.checkpoint is not None:
            p = out / "checkpoint.txt"
            p.write_text(suite.checkpoint)
            written.append(p)
        written.extend(emit_figure_data({suite.algorithm: suite}, out))
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def emit_figure_data(results: dict, output_dir) -> list:
    """Write ``paths.csv``, ``collisions.csv`` and ``smoothness.csv``; algorithms in name order."""
    if not results:
        raise ValueError("nothing to emit: no algorithm results given")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = sorted(results)
    paths = [out / "paths.csv", out / "collisions.csv", out / "smoothness.csv"]
    with open(paths[0], "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["algorithm", "step", "row", "col"])
        for name in names:
            traj = results[name].trajectory
            for i, (r, c) in enumerate(traj.path if traj else []):
                w.writerow([name, i, r, c])
    for path, attr in ((paths[1], "mean_collisions"), (paths[2], "mean_smoothness")):
        with open(path, "w", newline="") as fh:
            w = _writer(fh)
            w.writerow(["algorithm", "run_id", attr])
            for name in names:
                for run_id, s in enumerate(results[name].summaries):
                    w.writerow([name, run_id, _f(getattr(s, attr))])
    return paths


def load_suite_dirs(root) -> dict:
    """Collect ``suite.json`` from ``root`` and its immediate subdirectories."""
    root = Path(root)
    found = {}
    for p in [root / "suite.json", *sorted(root.glob("*/suite.json"))]:
        if p.is_file():
            suite = suite_from_json(p.read_text())
            if suite.algorithm in found:
                raise ValueError(f"algorithm {suite.algorithm!r} appears in more than one suite under {root}")
            found[suite.algorithm] = suite
    return found


def final_window(records, window: int = 100):
    return records[-window:]
