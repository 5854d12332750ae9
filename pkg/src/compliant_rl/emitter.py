"""Metrics emitter: per-episode CSV rows, checkpoints and the run summary."""
from __future__ import annotations

import json
import logging
import typing as t
from dataclasses import asdict, dataclass
from pathlib import Path

import pandas as pd

from compliant_rl.sac import SACAgent, save_checkpoint

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class MetricsRow:
    episode: int
    global_step: int
    cumulative_reward: float
    steps: int
    termination: str
    collisions: int
    holds_no_ik: int
    holds_velocity: int


METRICS_COLUMNS = list(MetricsRow.__dataclass_fields__)


class MetricsEmitter:
    """Writes a run's artifacts into its run directory."""

    def __init__(self, run_dir: t.Union[str, Path], config_hash: str):
        self.run_dir = Path(run_dir)
        self.config_hash = config_hash
        self.metrics_path = self.run_dir / METRICS_FILE
        self.checkpoint_dir = self.run_dir / CHECKPOINT_DIR
        self._last_step = -1
        self._rows_written = 0

    def start(self) -> None:
        """Create the run directory and truncate any previous metrics file."""
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=METRICS_COLUMNS).to_csv(self.metrics_path, index=False)
        self._last_step = -1
        self._rows_written = 0

    def emit_episode(self, row: MetricsRow) -> None:
        """Append one finished episode; global steps must strictly increase."""
        if row.global_step <= self._last_step:
            raise ValueError(
                f"global step {row.global_step} does not follow {self._last_step} "
                f"in {self.metrics_path}"
            )
        pd.DataFrame([asdict(row)], columns=METRICS_COLUMNS).to_csv(
            self.metrics_path, mode="a", header=False, index=False
        )
        self._last_step = row.global_step
        self._rows_written += 1

    def emit_checkpoint(
        self, agent: SACAgent, global_step: int, name: t.Optional[str] = None
    ) -> t.Optional[Path]:
        path = self.checkpoint_dir / f"{name or f'step_{global_step}'}.npz"
        try:
            return save_checkpoint(path, agent, self.config_hash, global_step)
        except OSError:
            logger.warning(f"Failed to write checkpoint {path}", exc_info=True)
            return None

    def emit_summary(self, summary: t.Mapping[str, t.Any]) -> Path:
        path = self.run_dir / SUMMARY_FILE
        path.write_text(json.dumps(dict(summary), indent=2, sort_keys=True) + "\n")
        return path

    @property
    def rows_written(self) -> int:
        return self._rows_written
