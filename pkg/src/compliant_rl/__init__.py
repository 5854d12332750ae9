"""Compliant RL: learned force-control gains for contact-rich insertion.

This package trains a Soft Actor-Critic policy that streams gain updates and
pose offsets to a parallel position/force or an admittance controller running
at 500 Hz, while a safety gate rejects commands that are unreachable, too
fast or pressing too hard. The task is a simulated peg insertion with a
penalty contact model and a noisy, filtered force/torque sensor.

## Quick Start (CLI Users)

```bash
compliant-rl train --config configs/sim.yaml --model P-14 --steps 50000
compliant-rl sweep --models P-14 A-13pd --seeds 3
compliant-rl plot runs/sweep
compliant-rl eval --checkpoint runs/P-14-pen-seed0/checkpoints/final.npz --episodes 20
```

Each run directory holds the resolved `config.yaml`, `metrics.csv`,
`checkpoints/` and `summary.json`.

## Environment Variables

```bash
export COMPLIANT_RL_OUTPUT_ROOT=runs      # where run directories are created
export COMPLIANT_RL_LOG_LEVEL=INFO        # overridden by --log-level
```

## Programmatic Usage

```python
import compliant_rl
from compliant_rl import load_config, train

root = compliant_rl.configure(log_level="INFO")
cfg = load_config("configs/sim.yaml", ["model=A-13pd", "training.total_steps=5000"])
result = train(cfg, root / "a13pd-smoke")
print(result.summary["success_rate_last_20"])
```
"""

from compliant_rl.settings import configure, is_configured
from compliant_rl.config import ConfigError, RunConfig, build_env, load_config
from compliant_rl.controllers import ACTION_SPACE_MODELS, get_action_space
from compliant_rl.env import PegInsertionEnv
from compliant_rl.safety import GateVerdict, SafetyStats
from compliant_rl.sac import CheckpointMismatchError, NonFiniteLossError, SACAgent
from compliant_rl.training import evaluate, train

__version__ = "0.1.0"

__all__ = [
    "configure",
    "is_configured",
    "ConfigError",
    "RunConfig",
    "build_env",
    "load_config",
    "ACTION_SPACE_MODELS",
    "get_action_space",
    "PegInsertionEnv",
    "GateVerdict",
    "SafetyStats",
    "CheckpointMismatchError",
    "NonFiniteLossError",
    "SACAgent",
    "train",
    "evaluate",
]
