"""Single-assignment result cells with blocking reads."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Any, Optional

from ..il import Kind


class FutureAlreadySet(RuntimeError):
    pass


class FutureRef:
    """Empty until the producing task finishes, then Filled forever.

    ``wait`` blocks until Filled (or timeout); once Filled, reads take no
    lock at all.
    """

    __slots__ = ("kind", "started", "_cond", "_done", "_value", "_error")

    def __init__(self, kind: Optional[Kind] = None):
        self.kind = kind
        self.started = False
        self._cond = threading.Condition(threading.Lock())
        self._done = False
        self._value: Any = None
        self._error: Optional[BaseException] = None

    @classmethod
    def filled(cls, value, kind: Optional[Kind] = None) -> "FutureRef":
        f = cls(kind)
        f.started = True
        f._value = value
        f._done = True
        return f

    def done(self) -> bool:
        return self._done

    def _settle(self, value, error) -> None:
        with self._cond:
            if self._done:
                raise FutureAlreadySet("future is single-assignment")
            self._value = value
            self._error = error
            self._done = True
            self._cond.notify_all()

    def set_result(self, value) -> None:
        self._settle(value, None)

    def set_error(self, error: BaseException) -> None:
        self._settle(None, error)

    def wait(self, timeout: Optional[float] = None) -> bool:
        if self._done:
            return True
        with self._cond:
            if not self._done:
                self._cond.wait(timeout)
            return self._done

    def result(self):
        """Value of a Filled future; re-raises the task's failure."""
        if not self._done:
            raise RuntimeError("future is still empty")
        if self._error is not None:
            raise self._error
        return self._value

    def peek(self):
        return self._value if self._done and self._error is None else None

    def __repr__(self) -> str:
        state = "Filled" if self._done else "Empty"
        return f"<FutureRef {self.kind} {state}>"


@dataclass
class TaskDescriptor:
    method: str
    args: list
    result: FutureRef
    enqueue_time: float = field(default_factory=time.monotonic)
