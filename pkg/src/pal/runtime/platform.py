"""Discovery of the execution platform (processor count)."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

log = logging.getLogger(__name__)

DETECTED = "Detected"
OVERRIDDEN = "Overridden"


@dataclass(frozen=True)
class PlatformInfo:
    cores: int
    source: str = DETECTED

    def __post_init__(self):
        if not isinstance(self.cores, int) or self.cores < 1:
            raise ValueError(f"cores must be a positive integer, got {self.cores!r}")


def _visible_cpus() -> Optional[int]:
    try:
        return len(os.sched_getaffinity(0))
    except (AttributeError, OSError):
        return os.cpu_count()


def detect_platform(override: Optional[int] = None) -> PlatformInfo:
    """Logical processors visible to this process, or ``override`` when given.

    Hyper-threads count as processors. Detection failure falls back to a
    single core with a warning.
    """
    if override is not None:
        return PlatformInfo(override, OVERRIDDEN)
    cores = _visible_cpus()
    if not cores:
        log.warning("could not detect processor count; assuming 1 core")
        return PlatformInfo(1, DETECTED)
    return PlatformInfo(cores, DETECTED)
