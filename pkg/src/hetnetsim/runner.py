"""Experiment orchestration: multi-seed training, deterministic evaluation,
seed aggregation with 95% confidence intervals, scenario/method comparison
tables, and learning-curve emission.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import baselines as bl
from . import neuro
from .channel import ChannelParams
from .env import EnvConfig, HetNetEnv
from .errors import ContractViolation, ValidationError
from .ppo import PpoConfig, train_ppo
from .records import RECORD_COLUMNS, TrainingRecord
from .td3 import Td3Config, train_td3
from .topology import ScenarioKind, generate_scenario

FULL_SEEDS = (0, 10, 18, 28, 42, 64, 128, 256, 512, 1024)
DESK_SEEDS = (0, 10, 18)

METRIC_NAMES = ("mean_band_fraction", "mean_power_norm", "mean_sched_score",
                "mean_reward", "mean_fairness")
# comparison-table ranking direction; higher is better unless inverted
LOWER_IS_BETTER = {"mean_power_norm"}


class Method(str, Enum):
    TD3 = "td3"
    PPO = "ppo"
    G_OFDMA = "g-ofdma"
    IP_PC = "ip-pc"
    PF_EQ = "pf-eq"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise ValidationError(f"unknown method: {name!r}")

    @property
    def is_learned(self) -> bool:
        return self in (Method.TD3, Method.PPO)


HEURISTIC_METHODS = (Method.G_OFDMA, Method.IP_PC, Method.PF_EQ)
ALL_METHODS = (Method.TD3, Method.PPO) + HEURISTIC_METHODS


@dataclass
class ExperimentConfig:
    scenario: ScenarioKind = ScenarioKind.DENSE_URBAN
    method: Method = Method.TD3
    seeds: tuple = DESK_SEEDS
    episodes: int = 200
    horizon: int = 200
    n_users: int = 20
    topology_seed: int = 0
    eval_episodes: int = 20
    out_root: str = "results"
    kappa: float = 1.0
    beta: float = 0.01
    phi: float = 0.96
    gamma: float = 0.99
    eta: float = 3.5
    sigma_sh_db: float = 8.0
    td3: Td3Config = field(default_factory=Td3Config)
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self):
        seeds = tuple(self.seeds)
        if not seeds or len(set(seeds)) != len(seeds):
            raise ValidationError("seeds must be nonempty and distinct")
        self.seeds = seeds


def desk_profile(**overrides) -> ExperimentConfig:
    """Small-scale profile sized for ordinary hardware. Learning rates sit
    well above the full-scale 2e-5 so a 4e4-step budget learns measurably,
    and PPO uses near-TD(0) advantages: channel evolution here is
    action-independent, so long GAE traces only add noise at this budget."""
    cfg = ExperimentConfig(
        seeds=DESK_SEEDS, episodes=200, horizon=200, n_users=20,
        td3=Td3Config(hidden_dims=(64, 64), batch_size=128, warmup_steps=1000,
                      lr_actor=1e-4, lr_critic=3e-4, capacity=50_000),
        ppo=PpoConfig(hidden_dims=(64, 64), rollout_T=250, minibatch=64,
                      epochs=10, lr=2e-3, entropy_coef=0.0, init_log_std=-1.0,
                      gae_lambda=0.2))
    return replace(cfg, **overrides) if overrides else cfg


def full_profile(**overrides) -> ExperimentConfig:
    """Full-scale protocol: 10 seeds, 1000 episodes of 1000 steps, 50 users,
    shared learning rate 2e-5."""
    cfg = ExperimentConfig(seeds=FULL_SEEDS, episodes=1000, horizon=1000,
                           n_users=50, td3=Td3Config(), ppo=PpoConfig())
    return replace(cfg, **overrides) if overrides else cfg


def build_env(config: ExperimentConfig, scenario: ScenarioKind | None = None,
              trace_path: str | None = None) -> HetNetEnv:
    scenario = scenario or config.scenario
    topo = generate_scenario(scenario, config.n_users, config.topology_seed)
    env_cfg = EnvConfig(
        topology=topo,
        channel_params=ChannelParams(eta=config.eta, sigma_sh_db=config.sigma_sh_db),
        horizon=config.horizon, kappa=config.kappa, beta=config.beta,
        phi=config.phi, gamma=config.gamma, user_placement=scenario,
        trace_path=trace_path)
    return HetNetEnv(env_cfg)


# --------------------------------------------------------------- policies

class EvalPolicy:
    """Deterministic policy protocol used by the evaluator."""

    def reset(self, env: HetNetEnv) -> None:
        pass

    def act(self, env: HetNetEnv, state: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FunctionPolicy(EvalPolicy):
    def __init__(self, fn):
        self.fn = fn

    def act(self, env, state):
        return self.fn(state)


class ConstantPolicy(EvalPolicy):
    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)

    def act(self, env, state):
        return self.action


class RandomPolicy(EvalPolicy):
    """Uniform actions; reseeded per episode so evaluation is deterministic."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._episode = 0

    def reset(self, env):
        self._rng = np.random.default_rng([self.seed, 0xD1CE, self._episode])
        self._episode += 1

    def act(self, env, state):
        return self._rng.uniform(0.0, 1.0, size=env.action_dim)


class HeuristicPolicy(EvalPolicy):
    def __init__(self, method: Method):
        if method not in HEURISTIC_METHODS:
            raise ValidationError(f"{method} is not a heuristic")
        self.method = method

    def reset(self, env):
        self._pf = bl.init_pf_state(env.n_users)
        self._last_mbps = np.zeros(env.n_users)

    def act(self, env, state):
        gains = env.current_gains
        if self.method is Method.G_OFDMA:
            return bl.g_ofdma_policy(gains, env.topology)
        if self.method is Method.IP_PC:
            return bl.ip_pc_policy(gains, env.topology)
        action, self._pf = bl.pf_eq_policy(gains, self._last_mbps, self._pf,
                                           env.topology)
        return action

    def observe(self, info: dict) -> None:
        self._last_mbps = info["per_user_throughput"] / 1e6


def load_policy_fn(method: Method, path: str):
    """Greedy policy closure from a checkpoint (TD3 actor or PPO mean)."""
    items = neuro.load_params(path)
    if method is Method.TD3:
        net = items["actor"]

        def act(state):
            out, _ = neuro.mlp_forward(net, state)
            return (out + 1.0) / 2.0
    elif method is Method.PPO:
        policy = neuro.GaussianPolicy(items["policy_mean"], items["log_std"])

        def act(state):
            mean, _ = neuro.policy_mean(policy, state)
            return np.clip(mean, 0.0, 1.0)
    else:
        raise ContractViolation(f"{method} has no checkpoint form")
    return act


# --------------------------------------------------------------- training

def checkpoint_path(out_root: str, scenario: ScenarioKind, method: Method,
                    seed: int) -> str:
    return os.path.join(out_root, scenario.value, method.value, f"seed{seed}.npz")


def record_path(out_root: str, scenario: ScenarioKind, method: Method,
                seed: int) -> str:
    return os.path.join(out_root, scenario.value, method.value, f"seed{seed}_record.csv")


def run_training(config: ExperimentConfig, save: bool = True) -> list[TrainingRecord]:
    """Train the configured method once per seed; heuristics have nothing to
    train and are rejected."""
    if not config.method.is_learned:
        raise ContractViolation(f"{config.method.value} is a heuristic; nothing to train")
    total_steps = config.episodes * config.horizon
    records = []
    for seed in config.seeds:
        env = build_env(config)
        if config.method is Method.TD3:
            agent, record = train_td3(env, config.td3, total_steps, seed)
        else:
            agent, record = train_ppo(env, config.ppo, total_steps, seed)
        if save:
            path = checkpoint_path(config.out_root, config.scenario,
                                   config.method, seed)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            agent.save(path)
            record.to_csv(record_path(config.out_root, config.scenario,
                                      config.method, seed))
        records.append(record)
    return records


# --------------------------------------------------------------- evaluation

def evaluate_policy(policy: EvalPolicy, env: HetNetEnv, n_episodes: int,
                    seed: int) -> list[tuple]:
    """Greedy rollouts; one row of episode-mean metrics per episode, columns
    as in RECORD_COLUMNS."""
    if n_episodes < 1:
        raise ValidationError("n_episodes must be >= 1")
    rows = []
    for ep in range(n_episodes):
        state = env.reset([int(seed) & 0xFFFFFFFF, 0xEA7, ep])
        policy.reset(env)
        acc = {name: [] for name in RECORD_COLUMNS[1:]}
        done = False
        while not done:
            out = env.step(policy.act(env, state))
            state = out.next_state
            done = out.done
            acc["mean_reward"].append(out.reward)
            acc["mean_fairness"].append(out.info["fairness"])
            acc["mean_power_norm"].append(out.info["mean_power_norm"])
            acc["mean_band_fraction"].append(out.info["mean_band_fraction"])
            acc["mean_sched_score"].append(out.info["mean_sched_score"])
            if isinstance(policy, HeuristicPolicy):
                policy.observe(out.info)
        rows.append((ep,) + tuple(float(np.mean(acc[name]))
                                  for name in RECORD_COLUMNS[1:]))
    return rows


@dataclass
class MetricSummary:
    mean_band_fraction: tuple
    mean_power_norm: tuple
    mean_sched_score: tuple
    mean_reward: tuple
    mean_fairness: tuple
    n_seeds: int = 0
    single_seed: bool = False

    def metric(self, name: str) -> tuple:
        if name not in METRIC_NAMES:
            raise ValidationError(f"unknown metric {name!r}")
        return getattr(self, name)


def aggregate_seeds(rows_by_seed: dict) -> MetricSummary:
    """Mean of per-seed means with a normal-approximation 95% CI halfwidth
    1.96 * std / sqrt(n); a single seed yields zero halfwidth and a warning
    flag."""
    if not rows_by_seed:
        raise ValidationError("no seed rows to aggregate")
    col_of = {name: RECORD_COLUMNS.index(name) for name in METRIC_NAMES}
    summaries = {}
    n = len(rows_by_seed)
    for name, col in col_of.items():
        seed_means = np.array([np.mean([row[col] for row in rows])
                               for rows in rows_by_seed.values()])
        mean = float(np.mean(seed_means))
        if n >= 2:
            hw = float(1.96 * np.std(seed_means, ddof=1) / np.sqrt(n))
        else:
            hw = 0.0
        summaries[name] = (mean, hw)
    return MetricSummary(**summaries, n_seeds=n, single_seed=(n == 1))


def evaluate_method(config: ExperimentConfig, scenario: ScenarioKind,
                    method: Method) -> dict:
    """Per-seed evaluation rows for one (scenario, method) cell; learned
    methods read their checkpoints."""
    rows_by_seed = {}
    for seed in config.seeds:
        env = build_env(config, scenario)
        if method.is_learned:
            path = checkpoint_path(config.out_root, scenario, method, seed)
            if not os.path.exists(path):
                raise ContractViolation(
                    f"missing checkpoint for scenario={scenario.value} "
                    f"method={method.value} seed={seed}: {path}")
            policy = FunctionPolicy(load_policy_fn(method, path))
        else:
            policy = HeuristicPolicy(method)
        rows_by_seed[seed] = evaluate_policy(policy, env, config.eval_episodes, seed)
    return rows_by_seed


# --------------------------------------------------------------- comparison

def compare_table(scenarios, methods, config: ExperimentConfig) -> list[dict]:
    """Comparison rows with best/second-best marks per column per scenario
    (bandwidth and scheduling score rank high-to-low, transmit power
    low-to-high)."""
    table = []
    for scenario in scenarios:
        cell_rows = []
        for method in methods:
            summary = aggregate_seeds(evaluate_method(config, scenario, method))
            row = {"scenario": scenario.value, "method": method.value}
            for name in METRIC_NAMES:
                mean, hw = summary.metric(name)
                row[name] = mean
                row[name + "_ci95"] = hw
            cell_rows.append(row)
        for name in ("mean_band_fraction", "mean_power_norm", "mean_sched_score"):
            reverse = name not in LOWER_IS_BETTER
            order = sorted(range(len(cell_rows)), key=lambda i: cell_rows[i][name],
                           reverse=reverse)
            for rank, idx in enumerate(order):
                mark = "best" if rank == 0 else "second" if rank == 1 else ""
                cell_rows[idx][name + "_mark"] = mark
        table.extend(cell_rows)
    return table


TABLE_FIELDS = ("scenario", "method",
                "mean_band_fraction", "mean_band_fraction_ci95", "mean_band_fraction_mark",
                "mean_power_norm", "mean_power_norm_ci95", "mean_power_norm_mark",
                "mean_sched_score", "mean_sched_score_ci95", "mean_sched_score_mark",
                "mean_reward", "mean_reward_ci95",
                "mean_fairness", "mean_fairness_ci95")


def write_table_csv(table: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TABLE_FIELDS) + "\n")
        for row in table:
            fh.write(",".join(_cell(row[f]) for f in TABLE_FIELDS) + "\n")


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_table_markdown(table: list[dict], path: str) -> None:
    """Markdown rendering: best bold, second-best underlined, ranking
    arrows in the header."""
    header = ("| Scenario | Method | Bandwidth Allocation (up) | "
              "Transmit Power (down) | Scheduling Score (up) | Reward | Fairness |")
    rule = "|" + "---|" * 7
    lines = [header, rule]
    for row in table:
        cells = [row["scenario"], row["method"]]
        for name in ("mean_band_fraction", "mean_power_norm", "mean_sched_score"):
            text = f"{row[name]:.2f} ± {row[name + '_ci95']:.2f}"
            mark = row.get(name + "_mark", "")
            if mark == "best":
                text = f"**{text}**"
            elif mark == "second":
                text = f"<u>{text}</u>"
            cells.append(text)
        cells.append(f"{row['mean_reward']:.2f} ± {row['mean_reward_ci95']:.2f}")
        cells.append(f"{row['mean_fairness']:.3f} ± {row['mean_fairness_ci95']:.3f}")
        lines.append("| " + " | ".join(cells) + " |")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------- curves

def emit_learning_curve(records: list[TrainingRecord], path: str,
                        column: str = "mean_reward") -> None:
    """Per-episode cross-seed mean and 95% CI band, one row per episode."""
    if not records:
        raise ValidationError("no records to summarise")
    lengths = {r.n_episodes for r in records}
    if len(lengths) != 1:
        raise ValidationError("records must cover the same number of episodes")
    data = np.stack([r.column(column) for r in records])  # (seeds, episodes)
    n = data.shape[0]
    mean = data.mean(axis=0)
    if n >= 2:
        hw = 1.96 * data.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        hw = np.zeros_like(mean)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("episode,mean_over_seeds,ci95_lo,ci95_hi\n")
            for ep in range(data.shape[1]):
                m, w = float(mean[ep]), float(hw[ep])
                fh.write(f"{ep},{m!r},{m - w!r},{m + w!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write learning curve to {path}: {exc}") from exc


def write_eval_rows(rows: list[tuple], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for row in rows:
            fh.write("%d,%r,%r,%r,%r,%r\n" % row)
