"""Clipped-surrogate on-policy actor-critic with GAE advantages and
multi-epoch shuffled minibatch updates over each rollout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neuro
from .env import HetNetEnv
from .errors import ValidationError
from .records import EpisodeAccumulator, TrainingRecord


@dataclass
class PpoConfig:
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    rollout_T: int = 2048
    epochs: int = 10
    minibatch: int = 64
    lr: float = 2.0e-5
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    hidden_dims: tuple = (256, 256)
    max_grad_norm: float = 0.5
    init_log_std: float = -0.5

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ValidationError("clip range must lie in (0,1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValidationError("lambda must lie in [0,1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must lie in [0,1)")


@dataclass
class Rollout:
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    next_value: float = 0.0

    def __post_init__(self):
        t = len(self.states)
        for name in ("actions", "log_probs", "rewards", "values", "dones"):
            if len(getattr(self, name)) != t:
                raise ValidationError("rollout sequences must have equal length")
        if not np.all(np.isfinite(self.log_probs)):
            raise ValidationError("log probabilities must be finite")

    def __len__(self):
        return len(self.states)


def compute_gae(rewards, values, dones, next_value: float, gamma: float,
                lam: float, normalize: bool = True):
    """Exponentially weighted TD-residual advantages, truncated at episode
    boundaries, plus bootstrap returns. Normalization (zero mean, unit
    variance) applies to the advantages only."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    t_len = len(rewards)
    adv = np.zeros(t_len)
    next_v = float(next_value)
    gae = 0.0
    for t in range(t_len - 1, -1, -1):
        mask = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_v * mask - values[t]
        gae = delta + gamma * lam * mask * gae
        adv[t] = gae
        next_v = values[t]
    returns = adv + values
    if normalize:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv, returns


def clipped_surrogate(ratios, advantages, clip_eps: float) -> np.ndarray:
    """Per-sample pessimistic surrogate min(r*A, clip(r)*A)."""
    ratios = np.asarray(ratios, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    clipped = np.clip(ratios, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return np.minimum(ratios * advantages, clipped)


class _VecAdam:
    """Adam for a bare parameter vector (the state-independent log std)."""

    def __init__(self, dim, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, x, g, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return x - lr * mhat / (np.sqrt(vhat) + self.eps)


class PpoAgent:
    def __init__(self, state_dim: int, action_dim: int, cfg: PpoConfig, seed: int):
        self.cfg = cfg
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x990])
        self.policy = neuro.GaussianPolicy(
            neuro.init_mlp([state_dim, *cfg.hidden_dims, action_dim], rng,
                           "relu", "tanh"),
            np.full(action_dim, cfg.init_log_std))
        self.critic = neuro.init_mlp([state_dim, *cfg.hidden_dims, 1], rng,
                                     "relu", "linear")
        self.opt_mean = neuro.init_adam(self.policy.mean_net)
        self.opt_critic = neuro.init_adam(self.critic)
        self.opt_log_std = _VecAdam(action_dim)

    def value(self, states) -> np.ndarray:
        v, _ = neuro.mlp_forward(self.critic, states)
        return v[..., 0]

    def greedy_action(self, state) -> np.ndarray:
        mean, _ = neuro.policy_mean(self.policy, state)
        return np.clip(mean, 0.0, 1.0)

    def sample_action(self, state, rng) -> tuple[np.ndarray, float]:
        return neuro.gaussian_sample(self.policy, state, rng)

    def save(self, path: str) -> None:
        neuro.save_params(path, {"policy_mean": self.policy.mean_net,
                                 "log_std": self.policy.log_std,
                                 "critic": self.critic})

    def load_policy(self, path: str) -> None:
        items = neuro.load_params(path)
        self.policy = neuro.GaussianPolicy(items["policy_mean"], items["log_std"])
        self.critic = items["critic"]


def collect_rollout(env: HetNetEnv, agent: PpoAgent, t_steps: int,
                    rng: np.random.Generator, seed_rng: np.random.Generator,
                    start_state=None, on_step=None):
    """Run the stochastic policy for t_steps, auto-resetting episodes with
    seeds drawn from seed_rng; values come from the critic at collection.

    Returns (rollout, carry_state); carry_state is None when the rollout
    ended exactly on an episode boundary and feeds the next call otherwise.
    """
    states = np.zeros((t_steps, env.state_dim))
    actions = np.zeros((t_steps, env.action_dim))
    log_probs = np.zeros(t_steps)
    rewards = np.zeros(t_steps)
    values = np.zeros(t_steps)
    dones = np.zeros(t_steps)
    state = (env.reset(int(seed_rng.integers(2 ** 31)))
             if start_state is None else start_state)
    for t in range(t_steps):
        action, logp = agent.sample_action(state, rng)
        out = env.step(action)
        states[t] = state
        actions[t] = action
        log_probs[t] = logp
        rewards[t] = out.reward
        values[t] = float(agent.value(state))
        dones[t] = float(out.done)
        if on_step is not None:
            on_step(out.reward, out.info, out.done)
        state = out.next_state
        if out.done and t + 1 < t_steps:
            state = env.reset(int(seed_rng.integers(2 ** 31)))
    # bootstrap value; masked out by the done flag at an episode boundary
    next_value = float(agent.value(state))
    carry = None if dones[-1] else state
    return (Rollout(states, actions, log_probs, rewards, values, dones, next_value),
            carry)


def _minibatch_grads(agent: PpoAgent, states, actions, old_logp, adv, returns,
                     cfg: PpoConfig):
    """Loss value and exact gradients of the clipped objective with value and
    entropy terms for one minibatch."""
    n = len(states)
    policy = agent.policy
    mean, cache = neuro.policy_mean(policy, states)
    std = np.exp(policy.log_std)
    z = (actions - mean) / std
    logp = np.sum(-policy.log_std - 0.5 * np.log(2 * np.pi) - 0.5 * z * z, axis=1)
    ratio = np.exp(logp - old_logp)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv
    per_sample = np.minimum(unclipped, clipped)
    surrogate = float(np.mean(per_sample))
    entropy = neuro.gaussian_entropy(policy.log_std)

    # gradient flows through the ratio only where the unclipped branch is active
    mask = (unclipped <= clipped).astype(float)
    dlogp = -(mask * ratio * adv) / n                      # d(policy loss)/d logp
    dmean = dlogp[:, None] * (z / std)                     # chain into the mean
    mean_grads = neuro.mlp_backward(policy.mean_net, cache, dmean * 0.5)
    dlog_std = np.sum(dlogp[:, None] * (z * z - 1.0), axis=0) - cfg.entropy_coef

    v, v_cache = neuro.mlp_forward(agent.critic, states)
    v = v[:, 0]
    v_err = v - returns
    value_loss = float(np.mean(v_err ** 2))
    critic_grads = neuro.mlp_backward(agent.critic, v_cache,
                                      (cfg.value_coef * 2.0 * v_err / n)[:, None])

    loss = -surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    stats = {"ratio": ratio, "surrogate": surrogate, "value_loss": value_loss,
             "entropy": entropy}
    return loss, mean_grads, dlog_std, critic_grads, stats


def ppo_loss(agent: PpoAgent, states, actions, old_logp, adv, returns,
             cfg: PpoConfig):
    """Scalar clipped-objective loss and its gradients (policy net, log std,
    critic) for a minibatch."""
    loss, mean_grads, dlog_std, critic_grads, _ = _minibatch_grads(
        agent, states, actions, old_logp, adv, returns, cfg)
    return loss, (mean_grads, dlog_std, critic_grads)


def _clip_by_norm(grads_list, max_norm: float) -> float:
    norm = neuro.grad_global_norm(grads_list)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads_list:
            if isinstance(g, neuro.MlpGrads):
                for arr in g.weights + g.biases:
                    arr *= scale
            else:
                g *= scale
    return norm


def update(agent: PpoAgent, rollout: Rollout, cfg: PpoConfig,
           rng: np.random.Generator) -> dict:
    """Multi-epoch shuffled minibatch optimisation of the clipped surrogate
    on one frozen rollout; the collection-time log probs play the role of
    the old policy."""
    adv, returns = compute_gae(rollout.rewards, rollout.values, rollout.dones,
                               rollout.next_value, cfg.gamma, cfg.gae_lambda)
    t_len = len(rollout)
    for _ in range(cfg.epochs):
        perm = rng.permutation(t_len)
        for lo in range(0, t_len, cfg.minibatch):
            idx = perm[lo:lo + cfg.minibatch]
            _, mean_grads, dlog_std, critic_grads, _ = _minibatch_grads(
                agent, rollout.states[idx], rollout.actions[idx],
                rollout.log_probs[idx], adv[idx], returns[idx], cfg)
            _clip_by_norm([mean_grads, dlog_std], cfg.max_grad_norm)
            _clip_by_norm([critic_grads], cfg.max_grad_norm)
            policy = agent.policy
            new_mean, agent.opt_mean = neuro.adam_step(agent.opt_mean,
                                                       policy.mean_net,
                                                       mean_grads, cfg.lr)
            new_log_std = agent.opt_log_std.step(policy.log_std, dlog_std, cfg.lr)
            agent.policy = neuro.GaussianPolicy(new_mean, new_log_std)
            agent.critic, agent.opt_critic = neuro.adam_step(agent.opt_critic,
                                                             agent.critic,
                                                             critic_grads, cfg.lr)
    # diagnostics against the frozen rollout
    mean, _ = neuro.policy_mean(agent.policy, rollout.states)
    logp = neuro.gaussian_log_prob(mean, agent.policy.log_std, rollout.actions)
    ratio = np.exp(logp - rollout.log_probs)
    return {"mean_ratio": float(np.mean(ratio)),
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
            "approx_kl": float(np.mean(rollout.log_probs - logp))}


def train_ppo(env: HetNetEnv, cfg: PpoConfig, total_steps: int, seed: int
              ) -> tuple[PpoAgent, TrainingRecord]:
    """Alternate rollout collection and surrogate optimisation until
    total_steps environment steps are consumed."""
    agent = PpoAgent(env.state_dim, env.action_dim, cfg, seed)
    sample_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xB1])
    update_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xB2])
    seed_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0xB3])

    record = TrainingRecord(method="ppo", seed=seed)
    acc = EpisodeAccumulator()

    def on_step(reward, info, done):
        acc.add_step(reward, info)
        if done:
            acc.flush_into(record)

    state = None
    steps_left = total_steps
    while steps_left > 0:
        t_steps = min(cfg.rollout_T, steps_left)
        rollout, state = collect_rollout(env, agent, t_steps, sample_rng, seed_rng,
                                         start_state=state, on_step=on_step)
        update(agent, rollout, cfg, update_rng)
        steps_left -= t_steps
    return agent, record
