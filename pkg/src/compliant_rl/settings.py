"""Process-wide settings for CLI usage: output root and logging."""
from __future__ import annotations

import logging
import os
import typing as t
from pathlib import Path

OUTPUT_ROOT_ENV = "COMPLIANT_RL_OUTPUT_ROOT"
LOG_LEVEL_ENV = "COMPLIANT_RL_LOG_LEVEL"
DEFAULT_OUTPUT_ROOT = "runs"
DEFAULT_LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_configured = False
_output_root: t.Optional[Path] = None


def resolve_output_root(output_root: t.Optional[t.Union[str, Path]] = None) -> Path:
    """Explicit argument, then ``COMPLIANT_RL_OUTPUT_ROOT``, then ``runs``."""
    return Path(output_root or os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT)


def resolve_log_level(log_level: t.Optional[str] = None) -> int:
    name = (log_level or os.environ.get(LOG_LEVEL_ENV) or DEFAULT_LOG_LEVEL).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level {name!r}. Pass log_level= or set {LOG_LEVEL_ENV}.")
    return level


def configure(
    output_root: t.Optional[t.Union[str, Path]] = None,
    log_level: t.Optional[str] = None,
) -> Path:
    """
    Configure logging handlers and the output root once per process.

    Call this from entry points only; library modules just log.

    Args:
        output_root: Where run directories are created. Falls back to
            COMPLIANT_RL_OUTPUT_ROOT env var, then ``runs``.
        log_level: Logging level name. Falls back to COMPLIANT_RL_LOG_LEVEL
            env var, then INFO.

    Example:
        import compliant_rl

        root = compliant_rl.configure(log_level="DEBUG")
    """
    global _configured, _output_root

    if _configured:
        assert _output_root is not None
        return _output_root

    level = resolve_log_level(log_level)
    _output_root = resolve_output_root(output_root)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    package_logger = logging.getLogger("compliant_rl")
    package_logger.addHandler(handler)
    package_logger.setLevel(level)

    _configured = True
    return _output_root


def is_configured() -> bool:
    """Check if settings have been configured for this process."""
    return _configured


def output_root() -> Path:
    """The configured output root, or the resolved default when unconfigured."""
    return _output_root if _output_root is not None else resolve_output_root()
