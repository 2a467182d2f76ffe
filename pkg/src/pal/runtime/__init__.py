from .errors import DeadlockDetected, Halted, PoolShutdown, TaskTrapped, Trap
from .futures import FutureRef, TaskDescriptor
from .machine import ExecutionStats, Machine, RuntimeConfig, WorkerPool, run
from .platform import PlatformInfo, detect_platform

__all__ = [
    "DeadlockDetected", "ExecutionStats", "FutureRef", "Halted", "Machine", "PlatformInfo",
    "PoolShutdown", "RuntimeConfig", "TaskDescriptor", "TaskTrapped", "Trap", "WorkerPool",
    "detect_platform", "run",
]
