"""Line-delimited JSON metrics records for rollout runs.

One record per logging interval; keys are stable for the whole run so the
file is trivially machine-parseable. Timing (steps/sec) is only written when
explicitly requested: with it off, a metrics log is a pure function of
(seed, config) and two identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class MetricsRecord:
    step: int
    reward_mean: float
    steps_per_sec: float | None = None
    reward_terms: dict[str, float] = field(default_factory=dict)
    termination_counts: dict[str, int] = field(default_factory=dict)
    terrain_row_histogram: list[int] = field(default_factory=list)
    nonfinite_worlds: int = 0

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)


def build_record(env, step: int, reward: np.ndarray, steps_per_sec: float | None) -> MetricsRecord:
    rm = env.reward_manager
    reward_terms = {
        name: round(float(values.mean()), 10) for name, values in rm.episodic_sums.items()
    }
    rows = np.bincount(env.terrain_rows, minlength=env.terrain.rows)
    return MetricsRecord(
        step=step,
        reward_mean=round(float(reward.mean()), 10),
        steps_per_sec=steps_per_sec,
        reward_terms=reward_terms,
        termination_counts={k: int(v) for k, v in env.termination_manager.trigger_counts.items()},
        terrain_row_histogram=rows.tolist(),
        nonfinite_worlds=int(env.termination_manager.last_nonfinite.sum()),
    )


class MetricsWriter:
    """Append-only JSONL writer."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w")

    def write(self, record: MetricsRecord) -> None:
        self._fh.write(record.to_json_line() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()
