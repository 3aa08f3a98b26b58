"""Stochastic link model: log-normal shadowing, Rayleigh power fading,
distance path loss, effective gain, SINR, and Shannon throughput.

All powers are linear mW, distances in meters, bands in Hz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .topology import NetworkTopology

# Near-field floor: the d^-eta law diverges as d -> 0.
DISTANCE_FLOOR_M = 1.0

THERMAL_NOISE_DBM_PER_HZ = -174.0

# Reference noise over 1 MHz, used to squash interference into [0,1) and as
# the proportional-fair rate-proxy noise.
NOISE_REF_MW = 10.0 ** ((THERMAL_NOISE_DBM_PER_HZ + 60.0) / 10.0)


@dataclass
class ChannelParams:
    eta: float = 3.5                 # path-loss exponent
    sigma_sh_db: float = 8.0         # shadowing std dev (dB domain)
    noise_density_dbm_per_hz: float = THERMAL_NOISE_DBM_PER_HZ

    def __post_init__(self):
        if not self.eta > 0:
            raise ValidationError("path-loss exponent must be positive")
        if self.sigma_sh_db < 0:
            raise ValidationError("shadowing std dev must be nonnegative")


def draw_shadowing(rng: np.random.Generator, sigma_sh_db: float, size=None):
    """Log-normal shadowing: Psi = 10^(X/10) with X ~ N(0, sigma^2) in dB.
    Positive X increases path loss."""
    x_db = rng.normal(0.0, sigma_sh_db, size=size)
    return 10.0 ** (x_db / 10.0)


def draw_fading(rng: np.random.Generator, size=None):
    """Unit-mean exponential power fading (Rayleigh amplitude), one draw per
    link per step."""
    return rng.exponential(1.0, size=size)


def effective_gain(fading, distance_m, eta: float, shadowing):
    """H = S / (d^eta * Psi), with d floored at the near-field reference."""
    d = np.maximum(np.asarray(distance_m, dtype=float), DISTANCE_FLOOR_M)
    return np.asarray(fading, dtype=float) / (d ** eta * np.asarray(shadowing, dtype=float))


def compute_sinr(serving_power_mw: float, serving_gain: float,
                 interferer_powers_mw, interferer_gains,
                 noise_mw: float) -> float:
    """Linear SINR: serving received power over aggregate interference from
    all non-serving stations plus noise."""
    if not noise_mw > 0:
        raise ValidationError("noise power must be positive")
    p = np.asarray(interferer_powers_mw, dtype=float)
    g = np.asarray(interferer_gains, dtype=float)
    if p.shape != g.shape:
        raise ValidationError("interferer power/gain lists must match")
    interference = float(np.sum(p * g))
    return (serving_power_mw * serving_gain) / (interference + noise_mw)


def throughput(band_hz, sinr):
    """Shannon rate over the allocated band: B * log2(1 + SINR), bits/s."""
    return np.asarray(band_hz, dtype=float) * np.log2(1.0 + np.asarray(sinr, dtype=float))


def noise_power_mw(band_hz, density_dbm_per_hz: float = THERMAL_NOISE_DBM_PER_HZ):
    """Thermal noise over an allocated band, in mW; the 1 Hz floor keeps the
    zero-band case finite."""
    band = np.maximum(np.asarray(band_hz, dtype=float), 1.0)
    return 10.0 ** ((density_dbm_per_hz + 10.0 * np.log10(band)) / 10.0)


def link_distances(topology: NetworkTopology) -> np.ndarray:
    """(N_B, N_U) Euclidean distances, floored at the near-field reference."""
    bs = topology.station_positions()[:, None, :]   # (B,1,2)
    users = topology.users[None, :, :]              # (1,U,2)
    d = np.sqrt(np.sum((bs - users) ** 2, axis=2))
    return np.maximum(d, DISTANCE_FLOOR_M)


@dataclass
class ChannelRealization:
    gains: np.ndarray       # (N_B, N_U) effective power gains, linear
    distances: np.ndarray   # (N_B, N_U) meters (floored)
    shadowing: np.ndarray   # (N_B, N_U) linear Psi
    fading: np.ndarray      # (N_B, N_U) linear S

    def __post_init__(self):
        for name in ("gains", "distances", "shadowing", "fading"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
                raise ValidationError(f"channel {name} must be positive and finite")


def assemble_gains(fading: np.ndarray, distances: np.ndarray, eta: float,
                   shadowing: np.ndarray) -> np.ndarray:
    return fading / (distances ** eta * shadowing)


def sample_channel_state(topology: NetworkTopology, params: ChannelParams,
                         episode_rng: np.random.Generator,
                         step_rng: np.random.Generator) -> ChannelRealization:
    """One full realization: shadowing from the episode stream (redrawn once
    per episode per link), fading from the step stream (every step)."""
    shape = (topology.n_stations, topology.n_users)
    distances = link_distances(topology)
    shadowing = draw_shadowing(episode_rng, params.sigma_sh_db, size=shape)
    fading = draw_fading(step_rng, size=shape)
    gains = assemble_gains(fading, distances, params.eta, shadowing)
    return ChannelRealization(gains=gains, distances=distances,
                              shadowing=shadowing, fading=fading)
