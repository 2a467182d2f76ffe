"""Exceptions raised while executing IL programs."""
from __future__ import annotations

from typing import Optional

DIVIDE_BY_ZERO = "DivideByZero"
OUT_OF_BOUNDS = "OutOfBoundsArray"
TYPE_MISMATCH = "TypeMismatch"
STACK_UNDERFLOW = "StackUnderflow"
CALL_DEPTH = "CallDepthExceeded"


class Trap(Exception):
    """A runtime fault at a specific instruction."""

    def __init__(self, kind: str, method: str, index: Optional[int], detail: str = ""):
        self.kind = kind
        self.method = method
        self.index = index
        self.detail = detail
        where = method if index is None else f"{method}#{index}"
        super().__init__(f"trap {kind} at {where}" + (f": {detail}" if detail else ""))


class TaskTrapped(Trap):
    """A spawned task trapped; surfaces where its future is touched."""

    def __init__(self, trap: Trap):
        self.trap = trap
        super().__init__(trap.kind, trap.method, trap.index, trap.detail)
        self.args = (f"task {trap}",)


class Halted(Exception):
    """HALT was executed; unwinds the whole program."""


class DeadlockDetected(RuntimeError):
    pass


class PoolShutdown(RuntimeError):
    pass
