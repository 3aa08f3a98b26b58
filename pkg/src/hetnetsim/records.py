"""Per-episode training/evaluation records and their CSV forms.

CSV files use a header row, repr-exact decimal floats, UTF-8, LF endings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

RECORD_COLUMNS = ("episode", "mean_reward", "mean_fairness", "mean_power_norm",
                  "mean_band_fraction", "mean_sched_score")


@dataclass
class TrainingRecord:
    method: str
    seed: int
    rows: list = field(default_factory=list)

    def append_episode(self, mean_reward: float, mean_fairness: float,
                       mean_power_norm: float, mean_band_fraction: float,
                       mean_sched_score: float) -> None:
        self.rows.append((len(self.rows), float(mean_reward), float(mean_fairness),
                          float(mean_power_norm), float(mean_band_fraction),
                          float(mean_sched_score)))

    @property
    def n_episodes(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in RECORD_COLUMNS:
            raise ValidationError(f"unknown record column {name!r}")
        idx = RECORD_COLUMNS.index(name)
        return np.array([r[idx] for r in self.rows])

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("#method,%s\n#seed,%d\n" % (self.method, self.seed))
            fh.write(",".join(RECORD_COLUMNS) + "\n")
            for row in self.rows:
                fh.write("%d,%r,%r,%r,%r,%r\n" % row)

    @classmethod
    def from_csv(cls, path: str) -> "TrainingRecord":
        method, seed, rows = "", 0, []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#method,"):
                    method = line.split(",", 1)[1]
                elif line.startswith("#seed,"):
                    seed = int(line.split(",", 1)[1])
                elif line[0].isdigit() or line[0] == "-":
                    parts = line.split(",")
                    rows.append((int(parts[0]),) + tuple(float(p) for p in parts[1:]))
        return cls(method=method, seed=seed, rows=rows)


class EpisodeAccumulator:
    """Collects per-step info dicts and reduces them to record columns."""

    def __init__(self):
        self.reset()

    def reset(self):
        self._rewards = []
        self._fairness = []
        self._power = []
        self._band = []
        self._sched = []

    def add_step(self, reward: float, info: dict) -> None:
        self._rewards.append(reward)
        self._fairness.append(info["fairness"])
        self._power.append(info["mean_power_norm"])
        self._band.append(info["mean_band_fraction"])
        self._sched.append(info["mean_sched_score"])

    def flush_into(self, record: TrainingRecord) -> None:
        record.append_episode(np.mean(self._rewards), np.mean(self._fairness),
                              np.mean(self._power), np.mean(self._band),
                              np.mean(self._sched))
        self.reset()
