"""Network layouts: base-station tiers, user placement, and the four
evaluation scenarios (dense urban, sparse suburban, hotspot, mixed).

Positions are in meters inside an axis-aligned deployment rectangle.
Powers are linear-scale mW, bands in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import TopologyParseError, ValidationError

DEFAULT_BOUNDS = (0.0, 0.0, 2000.0, 2000.0)

# Typical LTE budgets; macro limits must dominate micro limits.
MACRO_P_MIN_MW = 1000.0
MACRO_P_MAX_MW = 40000.0
MACRO_BAND_HZ = 20e6
MICRO_P_MIN_MW = 100.0
MICRO_P_MAX_MW = 1000.0
MICRO_BAND_HZ = 10e6

N_MACRO = 3
N_MICRO = 10

# Stand-in layout geometry: macros on an equilateral triangle (800 m side)
# around the rectangle center, micros on a 600 m ring.
MACRO_TRIANGLE_SIDE_M = 800.0
MICRO_RING_RADIUS_M = 600.0

HOTSPOT_FRACTION = 0.8
HOTSPOT_STD_M = 50.0


class Tier(str, Enum):
    MACRO = "Macro"
    MICRO = "Micro"


TIER_DEFAULTS = {
    Tier.MACRO: (MACRO_P_MIN_MW, MACRO_P_MAX_MW, MACRO_BAND_HZ),
    Tier.MICRO: (MICRO_P_MIN_MW, MICRO_P_MAX_MW, MICRO_BAND_HZ),
}


class ScenarioKind(str, Enum):
    DENSE_URBAN = "dense-urban"
    SPARSE_SUBURBAN = "sparse-suburban"
    HOTSPOT = "hotspot"
    MIXED = "mixed"

    @classmethod
    def parse(cls, name: str) -> "ScenarioKind":
        key = name.strip().lower().replace("_", "-").replace(" ", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValidationError(f"unknown scenario kind: {name!r}")


@dataclass
class BaseStation:
    id: int
    tier: Tier
    position: np.ndarray  # (2,) meters
    p_min_mw: float
    p_max_mw: float
    band_hz: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (2,):
            raise ValidationError(f"station {self.id}: position must be a 2-vector")
        if not self.p_min_mw > 0:
            raise ValidationError(f"station {self.id}: p_min must be positive")
        if not self.p_max_mw > self.p_min_mw:
            raise ValidationError(f"station {self.id}: p_max must exceed p_min")
        if not self.band_hz > 0:
            raise ValidationError(f"station {self.id}: band must be positive")


@dataclass
class NetworkTopology:
    stations: list[BaseStation]
    users: np.ndarray  # (N_U, 2) meters; may be empty until placed
    bounds: tuple[float, float, float, float] = DEFAULT_BOUNDS

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=float).reshape(-1, 2)
        self.validate()

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    def station_positions(self) -> np.ndarray:
        return np.array([bs.position for bs in self.stations])

    def p_min_vec(self) -> np.ndarray:
        return np.array([bs.p_min_mw for bs in self.stations])

    def p_max_vec(self) -> np.ndarray:
        return np.array([bs.p_max_mw for bs in self.stations])

    def band_vec(self) -> np.ndarray:
        return np.array([bs.band_hz for bs in self.stations])

    def validate(self) -> None:
        if not self.stations:
            raise ValidationError("topology must contain at least one station")
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValidationError(f"degenerate bounds {self.bounds}")
        ids = [bs.id for bs in self.stations]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate station ids")
        for i, bs in enumerate(self.stations):
            if not _inside(bs.position, self.bounds):
                raise ValidationError(f"station {bs.id} lies outside bounds")
            for other in self.stations[i + 1:]:
                if np.array_equal(bs.position, other.position):
                    raise ValidationError(
                        f"stations {bs.id} and {other.id} share a position")
        micro_pmax = [bs.p_max_mw for bs in self.stations if bs.tier is Tier.MICRO]
        for bs in self.stations:
            if bs.tier is Tier.MACRO and micro_pmax and bs.p_max_mw < max(micro_pmax):
                raise ValidationError(
                    f"macro station {bs.id} has smaller p_max than a micro station")
        if self.users.size:
            if not np.all((self.users[:, 0] >= xmin) & (self.users[:, 0] <= xmax)
                          & (self.users[:, 1] >= ymin) & (self.users[:, 1] <= ymax)):
                raise ValidationError("a user position lies outside bounds")


def _inside(p, bounds) -> bool:
    xmin, ymin, xmax, ymax = bounds
    return xmin <= p[0] <= xmax and ymin <= p[1] <= ymax


def _macro_grid(bounds) -> np.ndarray:
    """Equilateral-triangle macro sites centered in the rectangle."""
    xmin, ymin, xmax, ymax = bounds
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    radius = MACRO_TRIANGLE_SIDE_M / math.sqrt(3.0)
    angles = np.deg2rad([90.0, 210.0, 330.0])
    return np.stack([cx + radius * np.cos(angles), cy + radius * np.sin(angles)], axis=1)


def _micro_ring(bounds) -> np.ndarray:
    """Ten micro sites evenly spaced on a ring around the center."""
    xmin, ymin, xmax, ymax = bounds
    cx, cy = (xmin + xmax) / 2.0, (ymin + ymax) / 2.0
    angles = 2.0 * np.pi * np.arange(N_MICRO) / N_MICRO
    return np.stack([cx + MICRO_RING_RADIUS_M * np.cos(angles),
                     cy + MICRO_RING_RADIUS_M * np.sin(angles)], axis=1)


def _make_station(idx: int, tier: Tier, position) -> BaseStation:
    p_min, p_max, band = TIER_DEFAULTS[tier]
    return BaseStation(id=idx, tier=tier, position=position,
                       p_min_mw=p_min, p_max_mw=p_max, band_hz=band)


def scenario_stations(kind: ScenarioKind, rng: np.random.Generator,
                      bounds=DEFAULT_BOUNDS) -> list[BaseStation]:
    """Station layout for a scenario. Only the mixed scenario randomizes
    micro positions; the urban layouts are fixed so scenarios stay distinct."""
    macros = _macro_grid(bounds)
    stations = [_make_station(i, Tier.MACRO, macros[i]) for i in range(N_MACRO)]
    if kind is ScenarioKind.SPARSE_SUBURBAN:
        return stations
    if kind is ScenarioKind.MIXED:
        xmin, ymin, xmax, ymax = bounds
        micros = np.stack([rng.uniform(xmin, xmax, size=N_MICRO),
                           rng.uniform(ymin, ymax, size=N_MICRO)], axis=1)
    else:
        micros = _micro_ring(bounds)
    stations += [_make_station(N_MACRO + i, Tier.MICRO, micros[i])
                 for i in range(N_MICRO)]
    return stations


def scenario_user_positions(kind: ScenarioKind | None, stations: list[BaseStation],
                            n_users: int, rng: np.random.Generator,
                            bounds=DEFAULT_BOUNDS) -> np.ndarray:
    """Draw user positions per the scenario's placement law (uniform unless
    hotspot); kind=None means plain uniform placement."""
    xmin, ymin, xmax, ymax = bounds
    if kind is not ScenarioKind.HOTSPOT:
        return np.stack([rng.uniform(xmin, xmax, size=n_users),
                         rng.uniform(ymin, ymax, size=n_users)], axis=1)
    micros = np.array([bs.position for bs in stations if bs.tier is Tier.MICRO])
    if micros.size == 0:
        raise ValidationError("hotspot placement requires micro stations")
    n_hot = math.ceil(HOTSPOT_FRACTION * n_users)
    centers = micros[rng.integers(0, len(micros), size=n_hot)]
    hot = centers + rng.normal(0.0, HOTSPOT_STD_M, size=(n_hot, 2))
    hot[:, 0] = np.clip(hot[:, 0], xmin, xmax)
    hot[:, 1] = np.clip(hot[:, 1], ymin, ymax)
    rest = np.stack([rng.uniform(xmin, xmax, size=n_users - n_hot),
                     rng.uniform(ymin, ymax, size=n_users - n_hot)], axis=1)
    return np.concatenate([hot, rest], axis=0)


def generate_scenario(kind: ScenarioKind, n_users: int, seed: int) -> NetworkTopology:
    """Build one of the four benchmark layouts, deterministically in seed."""
    if n_users < 1:
        raise ValidationError("n_users must be >= 1")
    station_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x5747])
    user_rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x1137])
    stations = scenario_stations(kind, station_rng)
    users = scenario_user_positions(kind, stations, n_users, user_rng)
    return NetworkTopology(stations=stations, users=users)


def place_users(topology: NetworkTopology, n_users: int, seed: int) -> NetworkTopology:
    """Copy of the topology with n_users uniform positions inside bounds."""
    if n_users < 1:
        raise ValidationError("n_users must be >= 1")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 0x1137])
    users = scenario_user_positions(None, topology.stations, n_users, rng,
                                    topology.bounds)
    return replace(topology, users=users)


def load_topology(path: str) -> NetworkTopology:
    """Parse a station layout from CSV.

    A `#bounds,xmin,ymin,xmax,ymax` header is required; optional
    `#tier,<Macro|Micro>,p_min_mW,p_max_mW,band_Hz` lines override the
    per-tier defaults; data rows are `id,tier,x_m,y_m`. Users are not part
    of the file and are placed separately.
    """
    bounds = None
    tier_defaults = dict(TIER_DEFAULTS)
    stations: list[BaseStation] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                if fields[0] == "#bounds":
                    bounds = tuple(float(v) for v in fields[1:5])
                    if len(fields) != 5:
                        raise ValueError("expected 4 bound values")
                elif fields[0] == "#tier":
                    tier = _parse_tier(fields[1])
                    tier_defaults[tier] = (float(fields[2]), float(fields[3]),
                                           float(fields[4]))
                elif fields[0].startswith("#"):
                    continue  # comment
                else:
                    if len(fields) != 4:
                        raise ValueError("expected id,tier,x_m,y_m")
                    sid = int(fields[0])
                    tier = _parse_tier(fields[1])
                    pos = (float(fields[2]), float(fields[3]))
                    p_min, p_max, band = tier_defaults[tier]
                    stations.append(BaseStation(id=sid, tier=tier, position=pos,
                                                p_min_mw=p_min, p_max_mw=p_max,
                                                band_hz=band))
            except (ValueError, IndexError) as exc:
                raise TopologyParseError(
                    f"{path}:{lineno}: cannot parse {line!r} ({exc})") from exc
    if bounds is None:
        raise TopologyParseError(f"{path}: missing #bounds header")
    stations.sort(key=lambda bs: bs.id)  # index order == id order everywhere
    return NetworkTopology(stations=stations, users=np.empty((0, 2)), bounds=bounds)


def _parse_tier(token: str) -> Tier:
    for tier in Tier:
        if tier.value.lower() == token.strip().lower():
            return tier
    raise ValueError(f"unknown tier {token!r}")


def save_topology(topology: NetworkTopology, path: str) -> None:
    xmin, ymin, xmax, ymax = topology.bounds
    lines = [f"#bounds,{xmin},{ymin},{xmax},{ymax}"]
    seen_tiers = []
    for bs in topology.stations:
        if bs.tier not in seen_tiers:
            seen_tiers.append(bs.tier)
            lines.append(f"#tier,{bs.tier.value},{bs.p_min_mw},{bs.p_max_mw},{bs.band_hz}")
    for bs in topology.stations:
        lines.append(f"{bs.id},{bs.tier.value},{bs.position[0]},{bs.position[1]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
