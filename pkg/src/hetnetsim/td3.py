"""Twin-delayed deterministic actor-critic: twin critics trained on clipped
double-Q targets with smoothed target actions, a delayed actor, Polyak
target tracking, and a FIFO replay buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuro
from .env import HetNetEnv
from .errors import ValidationError
from .records import EpisodeAccumulator, TrainingRecord


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    policy_delay: int = 2
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    exploration_sigma: float = 0.1
    batch_size: int = 256
    lr_actor: float = 2.0e-5
    lr_critic: float = 2.0e-5
    capacity: int = 100_000
    warmup_steps: int = 1000
    hidden_dims: tuple = (256, 256)
    prioritized: bool = False
    per_alpha: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must lie in [0,1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValidationError("tau must lie in (0,1]")
        if self.policy_delay < 1:
            raise ValidationError("policy_delay must be >= 1")
        if not self.target_noise_clip > 0:
            raise ValidationError("target noise clip must be positive")


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform (or optionally
    priority-proportional) sampling with replacement."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.priorities = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def add(self, state, action, reward, next_state, done) -> None:
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.priorities[i] = self.priorities[:self.size].max() if self.size else 1.0
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int,
               prioritized: bool = False, per_alpha: float = 0.6) -> dict:
        if prioritized:
            # proportional variant without importance correction; biased but
            # matches the sampling law, and is off by default
            weights = (self.priorities[:self.size] + 1e-6) ** per_alpha
            idx = rng.choice(self.size, size=batch_size, p=weights / weights.sum())
        else:
            idx = rng.integers(0, self.size, size=batch_size)
        return {"states": self.states[idx], "actions": self.actions[idx],
                "rewards": self.rewards[idx], "next_states": self.next_states[idx],
                "dones": self.dones[idx], "indices": idx}

    def update_priorities(self, indices, td_errors) -> None:
        self.priorities[indices] = np.abs(td_errors) + 1e-6


def clipped_double_q_target(rewards, dones, q1, q2, gamma: float) -> np.ndarray:
    """y = r + gamma * min(Q1', Q2'); terminal transitions bootstrap nothing."""
    rewards = np.asarray(rewards, dtype=float)
    dones = np.asarray(dones, dtype=float)
    return rewards + gamma * (1.0 - dones) * np.minimum(np.asarray(q1, dtype=float),
                                                        np.asarray(q2, dtype=float))


class Td3Agent:
    """One agent per environment instance; training is single-caller."""

    def __init__(self, state_dim: int, action_dim: int, cfg: Td3Config, seed: int):
        self.cfg = cfg
        self.state_dim = state_dim
        self.action_dim = action_dim
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x7D3])
        dims_a = [state_dim, *cfg.hidden_dims, action_dim]
        dims_q = [state_dim + action_dim, *cfg.hidden_dims, 1]
        self.actor = neuro.init_mlp(dims_a, rng, "relu", "tanh")
        self.critic1 = neuro.init_mlp(dims_q, rng, "relu", "linear")
        self.critic2 = neuro.init_mlp(dims_q, rng, "relu", "linear")
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self.opt_actor = neuro.init_adam(self.actor)
        self.opt_critic1 = neuro.init_adam(self.critic1)
        self.opt_critic2 = neuro.init_adam(self.critic2)
        self.update_count = 0

    # ------------------------------------------------------------ forward

    def actor_forward(self, states, params: neuro.MlpParams | None = None):
        """Deterministic policy output mapped from tanh range onto [0,1]."""
        params = params if params is not None else self.actor
        out, cache = neuro.mlp_forward(params, states)
        return (out + 1.0) / 2.0, cache

    def critic_forward(self, critic: neuro.MlpParams, states, actions):
        x = np.concatenate([states, actions], axis=-1)
        q, cache = neuro.mlp_forward(critic, x)
        return q[..., 0], cache

    def select_action(self, state, exploration_sigma: float,
                      rng: np.random.Generator) -> np.ndarray:
        a, _ = self.actor_forward(np.asarray(state, dtype=float))
        noisy = a + rng.normal(0.0, exploration_sigma, size=a.shape)
        return np.clip(noisy, 0.0, 1.0)

    def smoothed_target_actions(self, next_states, rng: np.random.Generator):
        a, _ = self.actor_forward(next_states, self.target_actor)
        noise = np.clip(rng.normal(0.0, self.cfg.target_noise_sigma, size=a.shape),
                        -self.cfg.target_noise_clip, self.cfg.target_noise_clip)
        return np.clip(a + noise, 0.0, 1.0)

    def compute_target(self, batch: dict, rng: np.random.Generator) -> np.ndarray:
        a_next = self.smoothed_target_actions(batch["next_states"], rng)
        q1, _ = self.critic_forward(self.target_critic1, batch["next_states"], a_next)
        q2, _ = self.critic_forward(self.target_critic2, batch["next_states"], a_next)
        return clipped_double_q_target(batch["rewards"], batch["dones"], q1, q2,
                                       self.cfg.gamma)

    # ------------------------------------------------------------ training

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator) -> dict:
        """One critic step (both critics, MSE on the clipped double-Q target)
        and, on every policy_delay-th call, one actor ascent step plus soft
        target updates."""
        cfg = self.cfg
        if buffer.size < cfg.batch_size:
            return {"ready": False}
        batch = buffer.sample(rng, cfg.batch_size, cfg.prioritized, cfg.per_alpha)
        y = self.compute_target(batch, rng)
        n = cfg.batch_size

        losses = []
        td_err = None
        for name in ("critic1", "critic2"):
            critic = getattr(self, name)
            q, cache = self.critic_forward(critic, batch["states"], batch["actions"])
            err = q - y
            if td_err is None:
                td_err = err
            losses.append(float(np.mean(err ** 2)))
            upstream = (2.0 * err / n)[:, None]
            grads = neuro.mlp_backward(critic, cache, upstream)
            opt = getattr(self, "opt_" + name)
            new_params, new_opt = neuro.adam_step(opt, critic, grads, cfg.lr_critic)
            setattr(self, name, new_params)
            setattr(self, "opt_" + name, new_opt)
        if cfg.prioritized:
            buffer.update_priorities(batch["indices"], td_err)

        self.update_count += 1
        actor_updated = self.update_count % cfg.policy_delay == 0
        if actor_updated:
            states = batch["states"]
            actions, actor_cache = self.actor_forward(states)
            q, q_cache = self.critic_forward(self.critic1, states, actions)
            # d(mean Q)/d(action), then through the (tanh+1)/2 output map
            dq = neuro.mlp_backward(self.critic1, q_cache,
                                    np.full((n, 1), 1.0 / n))
            d_action = dq.input[:, self.state_dim:]
            actor_grads = neuro.mlp_backward(self.actor, actor_cache, d_action * 0.5)
            ascent = neuro.scale_grads(actor_grads, -1.0)
            self.actor, self.opt_actor = neuro.adam_step(self.opt_actor, self.actor,
                                                         ascent, cfg.lr_actor)
            self.target_actor = neuro.soft_update(self.target_actor, self.actor,
                                                  cfg.tau)
            self.target_critic1 = neuro.soft_update(self.target_critic1, self.critic1,
                                                    cfg.tau)
            self.target_critic2 = neuro.soft_update(self.target_critic2, self.critic2,
                                                    cfg.tau)
        return {"ready": True, "critic_loss": losses, "actor_updated": actor_updated,
                "mean_target": float(np.mean(y))}

    def save(self, path: str) -> None:
        neuro.save_params(path, {"actor": self.actor, "critic1": self.critic1,
                                 "critic2": self.critic2})

    def load_actor(self, path: str) -> None:
        self.actor = neuro.load_params(path)["actor"]
        self.target_actor = self.actor.copy()


def train_td3(env: HetNetEnv, cfg: Td3Config, total_steps: int, seed: int
              ) -> tuple[Td3Agent, TrainingRecord]:
    """Standard off-policy loop: act with exploration noise, store, update
    every step after a uniform-random warmup."""
    agent = Td3Agent(env.state_dim, env.action_dim, cfg, seed)
    buffer = ReplayBuffer(cfg.capacity, env.state_dim, env.action_dim)
    master = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xA1])
    explore_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xA2])
    update_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xA3])

    record = TrainingRecord(method="td3", seed=seed)
    acc = EpisodeAccumulator()
    state = env.reset(int(master.integers(2 ** 31)))
    for step in range(total_steps):
        if step < cfg.warmup_steps:
            action = explore_rng.uniform(0.0, 1.0, size=env.action_dim)
        else:
            action = agent.select_action(state, cfg.exploration_sigma, explore_rng)
        out = env.step(action)
        buffer.add(state, action, out.reward, out.next_state, out.done)
        acc.add_step(out.reward, out.info)
        state = out.next_state
        if step >= cfg.warmup_steps:
            agent.update(buffer, update_rng)
        if out.done:
            acc.flush_into(record)
            if step + 1 < total_steps:
                state = env.reset(int(master.integers(2 ** 31)))
    return agent, record
