"""Downlink control MDP: joint power, bandwidth, and scheduling decisions
over a HetNet, with a throughput / power / fairness reward.

State layout (all entries in [0,1]):
    [powers (N_B) | per-user interference (N_U) | allocation matrix
     row-major (N_B*N_U) | BS positions (2*N_B) | user positions (2*N_U)]

Action layout (entries clamped to [0,1] at the environment boundary):
    [p_adj (N_B) | w_alloc (N_B) | s_score (N_U)]
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as ch
from .errors import ContractViolation, ValidationError
from .topology import NetworkTopology, ScenarioKind, scenario_user_positions

# Floor on scheduling scores so all-zero scores degrade to an equal split.
SCHED_EPS = 1e-6


def state_length(n_b: int, n_u: int) -> int:
    return n_b + n_u + n_b * n_u + 2 * n_b + 2 * n_u


def action_length(n_b: int, n_u: int) -> int:
    return 2 * n_b + n_u


@dataclass
class EnvConfig:
    topology: NetworkTopology
    channel_params: ch.ChannelParams = field(default_factory=ch.ChannelParams)
    horizon: int = 1000
    kappa: float = 1.0    # throughput weight (per Mbit/s)
    beta: float = 0.01    # power weight (per W)
    phi: float = 0.96     # fairness weight
    gamma: float = 0.99
    # Placement law used when users are re-randomised at reset; None = uniform.
    user_placement: ScenarioKind | None = None
    trace_path: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.kappa < 0 or self.beta < 0 or self.phi < 0:
            raise ValidationError("reward weights must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("discount must lie in [0,1)")
        if self.topology.n_users < 1:
            raise ValidationError("environment requires at least one user")


def jain_fairness(z) -> float:
    """Jain index (sum z)^2 / (N sum z^2) in [1/N, 1]; the all-zero vector is
    treated as perfectly fair (equally starved) to keep rewards continuous."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise ValidationError("fairness of an empty vector is undefined")
    total_sq = float(np.sum(z * z))
    if total_sq == 0.0:
        return 1.0
    return float(np.sum(z)) ** 2 / (z.size * total_sq)


def compute_reward(throughputs_bps, powers_mw, kappa: float, beta: float,
                   phi: float) -> float:
    """Weighted combination: throughput summed in Mbit/s, power in W, plus
    Jain fairness of the per-user throughputs."""
    t = np.asarray(throughputs_bps, dtype=float)
    p = np.asarray(powers_mw, dtype=float)
    if t.size == 0 or p.size == 0:
        raise ValidationError("reward inputs must be nonempty")
    return (kappa * float(np.sum(t)) / 1e6
            - beta * float(np.sum(p)) / 1e3
            + phi * jain_fairness(t))


@dataclass
class PhysicalAllocation:
    powers_mw: np.ndarray       # (N_B,)
    band_fractions: np.ndarray  # (N_B,) in [0,1]
    association: np.ndarray     # (N_B, N_U) one-hot columns
    user_bands_hz: np.ndarray   # (N_U,)

    def serving_index(self) -> np.ndarray:
        return np.argmax(self.association, axis=0)


@dataclass
class StepOutcome:
    next_state: np.ndarray
    reward: float
    done: bool
    info: dict


def clamp_action(raw) -> np.ndarray:
    return np.clip(np.asarray(raw, dtype=float), 0.0, 1.0)


def decode_action(raw, topology: NetworkTopology, gains: np.ndarray) -> PhysicalAllocation:
    """Map a normalized action onto powers (affine between the per-station
    limits), band fractions, strongest-received-power association, and
    score-proportional intra-cell band shares."""
    n_b, n_u = topology.n_stations, topology.n_users
    a = clamp_action(raw)
    if a.shape != (action_length(n_b, n_u),):
        raise ContractViolation(
            f"action length {a.shape} does not match layout ({action_length(n_b, n_u)},)")
    if gains.shape != (n_b, n_u):
        raise ContractViolation("gain matrix does not match topology")
    p_adj = a[:n_b]
    w_alloc = a[n_b:2 * n_b]
    s_score = a[2 * n_b:]

    p_min, p_max = topology.p_min_vec(), topology.p_max_vec()
    powers = p_min + p_adj * (p_max - p_min)

    received = powers[:, None] * gains            # (B,U)
    serving = np.argmax(received, axis=0)         # ties resolve to lowest id
    association = np.zeros((n_b, n_u), dtype=int)
    association[serving, np.arange(n_u)] = 1

    band_total = topology.band_vec()
    user_bands = np.zeros(n_u)
    floored = s_score + SCHED_EPS
    for b in range(n_b):
        members = np.flatnonzero(serving == b)
        if members.size == 0:
            continue
        shares = floored[members] / np.sum(floored[members])
        user_bands[members] = w_alloc[b] * band_total[b] * shares
    return PhysicalAllocation(powers_mw=powers, band_fractions=w_alloc.copy(),
                              association=association, user_bands_hz=user_bands)


def build_state(powers_mw, interference_mw, user_bands_hz, association,
                topology: NetworkTopology) -> np.ndarray:
    """Assemble the normalized observation vector."""
    n_b, n_u = topology.n_stations, topology.n_users
    powers_mw = np.asarray(powers_mw, dtype=float)
    interference_mw = np.asarray(interference_mw, dtype=float)
    user_bands_hz = np.asarray(user_bands_hz, dtype=float)
    association = np.asarray(association)
    if (powers_mw.shape != (n_b,) or interference_mw.shape != (n_u,)
            or user_bands_hz.shape != (n_u,) or association.shape != (n_b, n_u)):
        raise ContractViolation("state component dimensions do not match topology")

    p_min, p_max = topology.p_min_vec(), topology.p_max_vec()
    p_norm = np.clip((powers_mw - p_min) / (p_max - p_min), 0.0, 1.0)
    # Squash mW interference (orders of magnitude) into [0,1).
    i_norm = interference_mw / (interference_mw + ch.NOISE_REF_MW)
    serving = np.argmax(association, axis=0)
    band_norm = user_bands_hz / topology.band_vec()[serving]
    alloc = np.zeros((n_b, n_u))
    alloc[serving, np.arange(n_u)] = band_norm

    xmin, ymin, xmax, ymax = topology.bounds
    scale = np.array([xmax - xmin, ymax - ymin])
    origin = np.array([xmin, ymin])
    bs_pos = ((topology.station_positions() - origin) / scale).ravel()
    user_pos = ((topology.users - origin) / scale).ravel()

    return np.concatenate([p_norm, i_norm, alloc.ravel(), bs_pos, user_pos])


class HetNetEnv:
    """Single-agent control environment; one instance serves one caller.

    reset(seed) re-randomises user positions and episode shadowing; fading is
    redrawn every step, so the transition kernel is genuinely stochastic.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.topology = config.topology
        self._episode = -1
        self._step_index = 0
        self._done = True
        self._started = False
        self._current_gains = None
        self._trace_fh = None
        if config.trace_path:
            new = not os.path.exists(config.trace_path)
            self._trace_fh = open(config.trace_path, "a", encoding="utf-8", newline="\n")
            if new:
                self._trace_fh.write(
                    "episode,step,reward,fairness,total_power_mW,sum_throughput_Mbps\n")

    @property
    def n_stations(self) -> int:
        return self.topology.n_stations

    @property
    def n_users(self) -> int:
        return self.topology.n_users

    @property
    def state_dim(self) -> int:
        return state_length(self.n_stations, self.n_users)

    @property
    def action_dim(self) -> int:
        return action_length(self.n_stations, self.n_users)

    @property
    def current_gains(self) -> np.ndarray:
        """Most recent link gains (expected-fading at reset, realized after
        each step); this is what a controller can observe before acting."""
        if self._current_gains is None:
            raise ContractViolation("reset must be called before observing gains")
        return self._current_gains

    def reset(self, seed) -> np.ndarray:
        cfg = self.config
        key = ([int(s) & 0xFFFFFFFF for s in seed]
               if isinstance(seed, (list, tuple)) else [int(seed) & 0xFFFFFFFF])
        place_rng = np.random.default_rng(key + [0xE1])
        episode_rng = np.random.default_rng(key + [0xE2])
        self._step_rng = np.random.default_rng(key + [0xE3])

        users = scenario_user_positions(cfg.user_placement, self.topology.stations,
                                        self.topology.n_users, place_rng,
                                        self.topology.bounds)
        self.topology = replace(self.topology, users=users)

        self._distances = ch.link_distances(self.topology)
        self._shadowing = ch.draw_shadowing(episode_rng, cfg.channel_params.sigma_sh_db,
                                            size=self._distances.shape)
        # Expected-fading gains seed the initial association and observation.
        mean_gains = ch.assemble_gains(np.ones_like(self._distances), self._distances,
                                       cfg.channel_params.eta, self._shadowing)
        self._current_gains = mean_gains

        self._powers = self.topology.p_min_vec().copy()
        n_u = self.n_users
        serving = np.argmax(mean_gains, axis=0)
        self._association = np.zeros((self.n_stations, n_u), dtype=int)
        self._association[serving, np.arange(n_u)] = 1
        self._user_bands = np.zeros(n_u)
        self._interference = np.zeros(n_u)

        self._episode += 1
        self._step_index = 0
        self._done = False
        self._started = True
        return build_state(self._powers, self._interference, self._user_bands,
                           self._association, self.topology)

    def step(self, raw_action) -> StepOutcome:
        if not self._started:
            raise ContractViolation("step called before reset")
        if self._done:
            raise ContractViolation("step called after episode end")
        cfg = self.config
        a = clamp_action(raw_action)
        alloc = decode_action(a, self.topology, self._current_gains)

        fading = ch.draw_fading(self._step_rng, size=self._distances.shape)
        gains = ch.assemble_gains(fading, self._distances, cfg.channel_params.eta,
                                  self._shadowing)

        serving = alloc.serving_index()
        received = alloc.powers_mw[:, None] * gains          # (B,U)
        total_rx = np.sum(received, axis=0)                  # (U,)
        serving_rx = received[serving, np.arange(self.n_users)]
        # guard against summation rounding driving this a hair negative
        interference = np.maximum(total_rx - serving_rx, 0.0)
        noise = ch.noise_power_mw(alloc.user_bands_hz,
                                  cfg.channel_params.noise_density_dbm_per_hz)
        sinr = serving_rx / (interference + noise)
        throughputs = ch.throughput(alloc.user_bands_hz, sinr)

        reward = compute_reward(throughputs, alloc.powers_mw,
                                cfg.kappa, cfg.beta, cfg.phi)
        fairness = jain_fairness(throughputs)

        self._powers = alloc.powers_mw
        self._user_bands = alloc.user_bands_hz
        self._association = alloc.association
        self._interference = interference
        self._current_gains = gains

        self._step_index += 1
        self._done = self._step_index >= cfg.horizon
        next_state = build_state(self._powers, self._interference, self._user_bands,
                                 self._association, self.topology)
        n_b = self.n_stations
        info = {
            "per_user_throughput": throughputs,
            "total_power_mW": float(np.sum(alloc.powers_mw)),
            "fairness": fairness,
            "mean_band_fraction": float(np.mean(a[n_b:2 * n_b])),
            "mean_power_norm": float(np.mean(a[:n_b])),
            "mean_sched_score": float(np.mean(a[2 * n_b:])),
        }
        if self._trace_fh is not None:
            self._trace_fh.write(
                f"{self._episode},{self._step_index - 1},{reward!r},{fairness!r},"
                f"{info['total_power_mW']!r},{float(np.sum(throughputs)) / 1e6!r}\n")
            self._trace_fh.flush()
        return StepOutcome(next_state=next_state, reward=reward,
                           done=self._done, info=info)

    def close(self):
        if self._trace_fh is not None:
            self._trace_fh.close()
            self._trace_fh = None
