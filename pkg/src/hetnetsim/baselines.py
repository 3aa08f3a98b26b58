"""Single-objective heuristic controllers: greedy throughput (G-OFDMA),
interference-priced power control (IP-PC), and proportional-fair with equal
bandwidth (PF-EQ). All three emit the same normalized action vector the
learned agents do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import NOISE_REF_MW
from .errors import ContractViolation
from .topology import NetworkTopology

# Near-budget power for the throughput-greedy policy; band fraction at the
# level its evaluation reportedly measures (0.09-0.20 across scenarios).
G_OFDMA_POWER = 0.98
G_OFDMA_BAND = 0.15
# Conservative settings for the interference-pricing policy.
IP_PC_POWER_FLOOR = 0.01
IP_PC_POWER_CAP = 0.3
IP_PC_BAND = 0.25
# Moderate power for the fairness-first policy; measured band range 0.07-0.18.
PF_EQ_POWER = 0.3
PF_EQ_BAND = 0.12

PF_RATE_FLOOR = 1e-6


@dataclass
class PfState:
    """EWMA throughput memory of the proportional-fair scheduler (Mbit/s)."""
    avg_rate: np.ndarray
    ewma_factor: float = 0.99


def init_pf_state(n_users: int, ewma_factor: float = 0.99) -> PfState:
    return PfState(avg_rate=np.full(n_users, PF_RATE_FLOOR), ewma_factor=ewma_factor)


def strongest_gain_association(gains: np.ndarray) -> np.ndarray:
    """Serving-station index per user by raw link gain; ties go to the
    lowest station id."""
    return np.argmax(gains, axis=0)


def _check_dims(gains: np.ndarray, topology: NetworkTopology) -> None:
    if gains.shape != (topology.n_stations, topology.n_users):
        raise ContractViolation("gain matrix does not match topology")


def g_ofdma_policy(gains: np.ndarray, topology: NetworkTopology) -> np.ndarray:
    """Throughput-first: near full power, each station handing its scheduled
    band to its best-link user only."""
    _check_dims(gains, topology)
    n_b, n_u = gains.shape
    serving = strongest_gain_association(gains)
    s_score = np.zeros(n_u)
    for b in range(n_b):
        members = np.flatnonzero(serving == b)
        if members.size == 0:
            continue
        best = members[np.argmax(gains[b, members])]
        s_score[best] = 1.0
    return np.concatenate([np.full(n_b, G_OFDMA_POWER),
                           np.full(n_b, G_OFDMA_BAND), s_score])


def interference_price(gains: np.ndarray, topology: NetworkTopology) -> np.ndarray:
    """Per-station leakage price: total gain toward users the station does
    not serve."""
    _check_dims(gains, topology)
    serving = strongest_gain_association(gains)
    mask = np.ones_like(gains)
    mask[serving, np.arange(gains.shape[1])] = 0.0
    return np.sum(gains * mask, axis=1)


def ip_pc_policy(gains: np.ndarray, topology: NetworkTopology) -> np.ndarray:
    """Power-first: stations causing above-average interference leakage back
    off exponentially; conservative band, uniform scheduling."""
    _check_dims(gains, topology)
    n_b, n_u = gains.shape
    prices = interference_price(gains, topology)
    mean_price = float(np.mean(prices))
    ratios = prices / mean_price if mean_price > 0 else np.zeros(n_b)
    p_adj = np.clip(np.exp(-ratios), IP_PC_POWER_FLOOR, IP_PC_POWER_CAP)
    return np.concatenate([p_adj, np.full(n_b, IP_PC_BAND), np.full(n_u, 1.0 / n_u)])


def pf_priorities(gains: np.ndarray, pf: PfState, topology: NetworkTopology) -> np.ndarray:
    """Instantaneous-rate proxy over EWMA served rate. The proxy ignores
    interference (standard proportional-fair simplification)."""
    serving = strongest_gain_association(gains)
    p_min, p_max = topology.p_min_vec(), topology.p_max_vec()
    powers = p_min + PF_EQ_POWER * (p_max - p_min)
    h = gains[serving, np.arange(gains.shape[1])]
    proxy = np.log2(1.0 + powers[serving] * h / NOISE_REF_MW)
    return proxy / np.maximum(pf.avg_rate, PF_RATE_FLOOR)


def pf_eq_policy(gains: np.ndarray, last_throughputs_mbps: np.ndarray,
                 pf: PfState, topology: NetworkTopology) -> tuple[np.ndarray, PfState]:
    """Fairness-first: moderate power, near-equal intra-cell shares ordered
    by proportional-fair priority.

    Scores are per-cell priority weights blended 50/50 with uniform, so the
    resulting shares stay close to an even split while recently-starved
    users rank first.
    """
    _check_dims(gains, topology)
    n_b, n_u = gains.shape
    serving = strongest_gain_association(gains)
    priorities = pf_priorities(gains, pf, topology)
    s_score = np.zeros(n_u)
    for b in range(n_b):
        members = np.flatnonzero(serving == b)
        if members.size == 0:
            continue
        w = priorities[members] / np.sum(priorities[members])
        s_score[members] = 0.5 * w + 0.5 / members.size
    action = np.concatenate([np.full(n_b, PF_EQ_POWER),
                             np.full(n_b, PF_EQ_BAND), s_score])
    new_avg = np.maximum(
        pf.ewma_factor * pf.avg_rate
        + (1.0 - pf.ewma_factor) * np.asarray(last_throughputs_mbps, dtype=float),
        PF_RATE_FLOOR)
    return action, PfState(avg_rate=new_avg, ewma_factor=pf.ewma_factor)
