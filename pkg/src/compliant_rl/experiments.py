"""Multi-run experiments: the action-space sweep and the collision-penalty ablation."""
from __future__ import annotations

import json
import logging
import math
import typing as t
from dataclasses import asdict, dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np
import pandas as pd

from compliant_rl.config import RunConfig
from compliant_rl.controllers import get_action_space
from compliant_rl.emitter import METRICS_FILE, SUMMARY_FILE
from compliant_rl.training import train

logger = logging.getLogger(__name__)

EMA_WEIGHT = 0.6
DEFAULT_MILESTONE = 100.0
GRID_POINTS = 100


@dataclass(frozen=True)
class SweepMember:
    model: str
    seed: int
    penalize: bool

    @property
    def name(self) -> str:
        return f"{self.model}-{'pen' if self.penalize else 'nopen'}-seed{self.seed}"


@dataclass
class MemberStatus:
    name: str
    model: str
    seed: int
    penalize: bool
    status: str
    run_dir: str
    error: t.Optional[str] = None


def plan_sweep(
    models: t.Sequence[str],
    seeds: int,
    penalize: t.Sequence[bool] = (True, False),
    base_seed: int = 0,
) -> t.List[SweepMember]:
    """Cross product of models, seeds and penalty settings, in that nesting order."""
    for model in models:
        get_action_space(model)
    return [
        SweepMember(model, base_seed + i, p)
        for model in models
        for p in penalize
        for i in range(seeds)
    ]


def member_config(base: RunConfig, member: SweepMember) -> RunConfig:
    reward = base.reward.model_copy(update={"penalize_collisions": member.penalize})
    data = base.model_copy(update={"model": member.model, "seed": member.seed, "reward": reward})
    return RunConfig.model_validate(data.model_dump())


def _run_member(job: t.Tuple[t.Dict[str, t.Any], str, str]) -> MemberStatus:
    cfg_data, run_dir, name = job
    cfg = RunConfig.model_validate(cfg_data)
    status = MemberStatus(
        name, cfg.model, cfg.seed, cfg.reward.penalize_collisions, "finished", run_dir
    )
    try:
        train(cfg, run_dir)
    except Exception as e:
        logger.warning(f"Sweep member {name} failed; continuing", exc_info=True)
        status.status = "failed"
        status.error = f"{type(e).__name__}: {e}"
    return status


def load_metrics(run_dir: t.Union[str, Path]) -> t.Optional[pd.DataFrame]:
    path = Path(run_dir) / METRICS_FILE
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.EmptyDataError):
        logger.warning(f"No metrics at {path}", exc_info=True)
        return None
    return frame if not frame.empty else None


def load_summary(run_dir: t.Union[str, Path]) -> t.Dict[str, t.Any]:
    path = Path(run_dir) / SUMMARY_FILE
    try:
        return t.cast(t.Dict[str, t.Any], json.loads(path.read_text()))
    except (OSError, ValueError):
        logger.warning(f"No summary at {path}", exc_info=True)
        return {}


def ema(values: t.Sequence[float], weight: float = EMA_WEIGHT) -> np.ndarray:
    """``s_0 = x_0``, ``s_t = weight * s_{t-1} + (1 - weight) * x_t``."""
    x = np.asarray(values, dtype=np.float64)
    out = np.empty_like(x)
    for i, v in enumerate(x):
        out[i] = v if i == 0 else weight * out[i - 1] + (1.0 - weight) * v
    return out


def common_grid(
    frames: t.Sequence[pd.DataFrame], points: int = GRID_POINTS
) -> t.Tuple[np.ndarray, bool]:
    """Shared global-step grid; the flag says whether curves had to be resampled."""
    steps = [f["global_step"].to_numpy() for f in frames]
    if all(len(s) == len(steps[0]) and np.array_equal(s, steps[0]) for s in steps):
        return steps[0].astype(np.float64), False
    lo = max(float(s[0]) for s in steps)
    hi = min(float(s[-1]) for s in steps)
    if hi <= lo:
        hi = max(float(s[-1]) for s in steps)
    return np.linspace(lo, hi, points), True


def mean_curve(
    frames: t.Sequence[pd.DataFrame], label: str = "", points: int = GRID_POINTS
) -> pd.DataFrame:
    """Mean and standard deviation of cumulative reward across runs on a common grid."""
    grid, resampled = common_grid(frames, points)
    if resampled:
        logger.warning(
            f"Step grids differ across runs of {label or 'group'}; "
            f"resampling to {len(grid)} points"
        )
    curves = np.stack(
        [
            np.interp(grid, f["global_step"].to_numpy(), f["cumulative_reward"].to_numpy())
            for f in frames
        ]
    )
    return pd.DataFrame(
        {
            "global_step": grid,
            "mean": curves.mean(axis=0),
            "std": curves.std(axis=0) if len(frames) > 1 else np.zeros(len(grid)),
            "runs": len(frames),
        }
    )


def aggregate_curves(runs: pd.DataFrame, points: int = GRID_POINTS) -> pd.DataFrame:
    """Learning curves per (model, penalize) from a table of ``model, penalize, run_dir``."""
    parts = []
    for (model, penalize), group in runs.groupby(["model", "penalize"], sort=True):
        frames = [f for f in (load_metrics(d) for d in group["run_dir"]) if f is not None]
        if not frames:
            continue
        curve = mean_curve(frames, f"{model} penalize={penalize}", points)
        curve.insert(0, "penalize", bool(penalize))
        curve.insert(0, "model", model)
        parts.append(curve)
    if not parts:
        return pd.DataFrame(columns=["model", "penalize", "global_step", "mean", "std", "runs"])
    return pd.concat(parts, ignore_index=True)


def run_collisions(runs: pd.DataFrame) -> pd.DataFrame:
    """Collision count of each run, read from the last metrics row."""
    rows = []
    for record in runs.itertuples(index=False):
        frame = load_metrics(record.run_dir)
        if frame is None:
            continue
        rows.append(
            {
                "model": record.model,
                "penalize": bool(record.penalize),
                "seed": record.seed,
                "collisions": int(frame["collisions"].iloc[-1]),
            }
        )
    return pd.DataFrame(rows, columns=["model", "penalize", "seed", "collisions"])


def percent_difference(penalized: float, non_penalized: float) -> float:
    if penalized == 0:
        return math.nan
    return (penalized - non_penalized) / penalized * 100.0


def _mean_or_nan(values: pd.Series) -> float:
    return float(values.mean()) if len(values) else math.nan


def collision_table(per_run: pd.DataFrame) -> pd.DataFrame:
    """Mean collisions per training session with and without the penalty, per model."""
    columns = ["model", "penalized_collisions", "non_penalized_collisions", "percent_difference"]
    if per_run.empty:
        return pd.DataFrame(columns=columns)
    rows = []
    for model, group in per_run.groupby("model", sort=True):
        flags = group["penalize"].astype(bool)
        pen = _mean_or_nan(group.loc[flags, "collisions"])
        nonpen = _mean_or_nan(group.loc[~flags, "collisions"])
        rows.append(
            {
                "model": model,
                "penalized_collisions": pen,
                "non_penalized_collisions": nonpen,
                "percent_difference": percent_difference(pen, nonpen),
            }
        )
    return pd.DataFrame(rows, columns=columns)


def milestone_steps(
    curves: pd.DataFrame, milestone: float = DEFAULT_MILESTONE, weight: float = EMA_WEIGHT
) -> pd.DataFrame:
    """First step at which the smoothed mean curve reaches ``milestone`` (NaN if never)."""
    rows = []
    for (model, penalize), group in curves.groupby(["model", "penalize"], sort=True):
        smoothed = ema(group["mean"].to_numpy(), weight)
        hits = np.nonzero(smoothed >= milestone)[0]
        step = float(group["global_step"].iloc[hits[0]]) if hits.size else math.nan
        rows.append({"model": model, "penalize": bool(penalize), "milestone_step": step})
    return pd.DataFrame(rows, columns=["model", "penalize", "milestone_step"])


@dataclass
class SweepResult:
    out_dir: Path
    statuses: t.List[MemberStatus]
    curves: pd.DataFrame
    collisions: pd.DataFrame
    milestones: pd.DataFrame


def run_sweep(
    base: RunConfig,
    models: t.Sequence[str],
    seeds: int,
    penalize: t.Sequence[bool],
    out_dir: t.Union[str, Path],
    processes: int = 1,
    milestone: float = DEFAULT_MILESTONE,
) -> t.Optional[SweepResult]:
    """Train every sweep member, then aggregate curves and the collision comparison.

    Failed members are recorded in ``sweep.json`` and left out of the tables.
    """
    out_dir = Path(out_dir)
    members = plan_sweep(models, seeds, penalize, base.seed)
    if not members:
        logger.warning("Sweep has no members; nothing to run")
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (member_config(base, m).model_dump(mode="json"), str(out_dir / "runs" / m.name), m.name)
        for m in members
    ]
    logger.info(f"Running {len(jobs)} sweep members with {processes} process(es)")
    if processes > 1:
        with Pool(processes) as pool:
            statuses = pool.map(_run_member, jobs)
    else:
        statuses = [_run_member(job) for job in jobs]

    finished = pd.DataFrame(
        [asdict(s) for s in statuses if s.status == "finished"],
        columns=list(MemberStatus.__dataclass_fields__),
    )
    curves = aggregate_curves(finished)
    collisions = collision_table(run_collisions(finished))
    milestones = milestone_steps(curves, milestone)

    curves.to_csv(out_dir / "curves.csv", index=False)
    collisions.to_csv(out_dir / "collisions.csv", index=False)
    (out_dir / "sweep.json").write_text(
        json.dumps(
            {
                "members": [asdict(s) for s in statuses],
                "milestone": milestone,
                "milestones": milestones.to_dict(orient="records"),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return SweepResult(out_dir, statuses, curves, collisions, milestones)
