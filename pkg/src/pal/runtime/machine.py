"""Program execution: interpreter/compiled dispatch, task pools, futures."""
from __future__ import annotations

import collections
import json
import threading
import time
from dataclasses import dataclass, field
from statistics import mean
from typing import Optional

from ..il import MethodDef, Program
from . import interp
from .errors import TYPE_MISMATCH, DeadlockDetected, Halted, PoolShutdown, TaskTrapped, Trap
from .futures import FutureRef, TaskDescriptor
from .platform import PlatformInfo, detect_platform
from .values import deep_copy, zero_value

ENGINES = ("auto", "interp")
_POLL = 0.05  # seconds between deadlock checks while blocked in TOUCH


@dataclass
class RuntimeConfig:
    cores_override: Optional[int] = None
    no_transform: bool = False
    stats_path: Optional[str] = None
    engine: str = "auto"

    def __post_init__(self):
        if self.cores_override is not None and self.cores_override < 1:
            raise ValueError(f"cores override must be >= 1, got {self.cores_override}")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")


@dataclass
class ExecutionStats:
    wall_time: float = 0.0  # seconds, execution only
    tasks_spawned: int = 0
    peak_concurrency: int = 0
    per_method_peak: dict[str, int] = field(default_factory=dict)
    per_method_task_times: dict[str, list[float]] = field(default_factory=dict)
    touch_block_time: float = 0.0
    touch_durations: list[float] = field(default_factory=list)
    compile_time: float = 0.0

    def to_json(self) -> dict:
        per_method = {}
        for name, times in self.per_method_task_times.items():
            per_method[name] = {
                "tasks": len(times),
                "mean_ms": mean(times) * 1000.0 if times else 0.0,
                "max_ms": max(times) * 1000.0 if times else 0.0,
            }
        return {
            "wall_ms": self.wall_time * 1000.0,
            "tasks_spawned": self.tasks_spawned,
            "peak_concurrency": self.peak_concurrency,
            "touch_block_ms": self.touch_block_time * 1000.0,
            "per_method": per_method,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


class WorkerPool:
    """FIFO queue feeding at most ``cap`` worker threads, started on demand."""

    def __init__(self, machine: "Machine", method: MethodDef, cap: int):
        self.machine = machine
        self.method = method
        self.cap = cap
        self.queue: collections.deque = collections.deque()
        self.cv = threading.Condition(machine.lock)
        self.threads: list[threading.Thread] = []
        self.idle = 0
        self.closing = False

    @property
    def started(self) -> int:
        return len(self.threads)

    def can_dispatch(self) -> bool:
        return bool(self.queue) and (self.idle > 0 or self.started < self.cap)

    def submit(self, task: TaskDescriptor) -> None:
        # caller holds machine.lock
        if self.closing:
            raise PoolShutdown(f"pool for {self.method.name} is shut down")
        self.queue.append(task)
        if self.idle:
            self.cv.notify()
        elif self.started < self.cap:
            t = threading.Thread(target=self._work, name=f"pal-{self.method.name}-{self.started}", daemon=True)
            self.threads.append(t)
            t.start()

    def _work(self) -> None:
        machine = self.machine
        machine.local.worker = True
        while True:
            with machine.lock:
                while not self.queue and not self.closing:
                    self.idle += 1
                    self.cv.wait()
                    self.idle -= 1
                if not self.queue:
                    return
                task = self.queue.popleft()
                task.result.started = True
                machine.running += 1
            try:
                machine.run_task(self.method, task)
            finally:
                with machine.lock:
                    machine.running -= 1

    def close(self, abort: bool) -> None:
        with self.machine.lock:
            self.closing = True
            if abort:
                while self.queue:
                    self.queue.popleft().result.set_error(PoolShutdown("runtime aborted"))
            self.cv.notify_all()
        for t in self.threads:
            t.join()


class Machine:
    """One execution of a program.

    The main thread runs the entry method; each @Parallel method that is
    SPAWNed gets its own pool of min(parDegree, cores) workers.
    """

    def __init__(self, program: Program, platform: Optional[PlatformInfo] = None, engine: str = "auto"):
        self.program = program
        self.platform = platform or detect_platform()
        self.globals = {name: zero_value(kind) for name, kind in program.globals}
        self.stats = ExecutionStats()
        self.lock = threading.Lock()
        self.local = threading.local()
        self.pools: dict[str, WorkerPool] = {}
        self.running = 0
        self.waiting: set = set()
        self.aborting = False
        self._active: dict[str, int] = {}
        self._lowered: dict[str, list] = {}
        self.compiled = {}
        if engine == "auto":
            from .jit import compile_program
            t0 = time.perf_counter()
            self.compiled = compile_program(program)
            self.stats.compile_time = time.perf_counter() - t0

    def lowered(self, m: MethodDef) -> list:
        code = self._lowered.get(m.name)
        if code is None:
            code = self._lowered[m.name] = interp.lower(m)
        return code

    # -- execution
    def run(self):
        """Execute the entry method and return its value (None for Void/HALT)."""
        entry = self.program.method(self.program.entry)
        t0 = time.perf_counter()
        ok = False
        try:
            try:
                value = self.call(entry, [], 0, None)
            except Halted:
                value = None
            ok = True
            return value
        finally:
            self.shutdown(abort=not ok)
            self.stats.wall_time = time.perf_counter() - t0

    def shutdown(self, abort: bool = False) -> None:
        if abort:
            self.aborting = True
        for pool in list(self.pools.values()):
            pool.close(abort)

    def _invoke(self, m: MethodDef, args: list, depth: int):
        fn = self.compiled.get(m.name)
        if fn is not None:
            return fn(args)
        return interp.execute(self, m, args, depth)

    def _enter(self, name: str) -> None:
        with self.lock:
            n = self._active.get(name, 0) + 1
            self._active[name] = n
            if n > self.stats.per_method_peak.get(name, 0):
                self.stats.per_method_peak[name] = n
                if n > self.stats.peak_concurrency:
                    self.stats.peak_concurrency = n

    def _exit(self, name: str) -> None:
        with self.lock:
            self._active[name] -= 1

    def _copy_args(self, args: list, site) -> list:
        try:
            return [deep_copy(a) for a in args]
        except TypeError as exc:
            method, index = site or ("<runtime>", None)
            raise Trap(TYPE_MISMATCH, method, index, str(exc)) from None

    def call(self, m: MethodDef, args: list, depth: int, site):
        """Synchronous call. @Parallel methods get copied arguments and their
        result comes back as an already Filled future."""
        if m.annotation is None:
            return self._invoke(m, args, depth)
        args = self._copy_args(args, site)
        self._enter(m.name)
        try:
            value = self._invoke(m, args, depth)
        finally:
            self._exit(m.name)
        return FutureRef.filled(value, m.return_kind)

    def pool_for(self, m: MethodDef) -> WorkerPool:
        pool = self.pools.get(m.name)
        if pool is None:
            cap = max(1, min(m.annotation.par_degree, self.platform.cores))
            pool = self.pools[m.name] = WorkerPool(self, m, cap)
        return pool

    def spawn(self, m: MethodDef, args: list, site=None) -> FutureRef:
        """Queue ``m`` on its pool and return an Empty future immediately."""
        args = self._copy_args(args, site)
        fut = FutureRef(m.return_kind)
        task = TaskDescriptor(m.name, args, fut)
        with self.lock:
            pool = self.pool_for(m)
            self.stats.tasks_spawned += 1
            pool.submit(task)
        return fut

    def run_task(self, m: MethodDef, task: TaskDescriptor) -> None:
        t0 = time.perf_counter()
        self._enter(m.name)
        try:
            value = self._invoke(m, task.args, 1)
        except Trap as exc:
            outcome = (None, TaskTrapped(exc))
        except Exception as exc:  # Halted, PoolShutdown, ...
            outcome = (None, exc)
        else:
            outcome = (value, None)
        finally:
            self._exit(m.name)
        elapsed = time.perf_counter() - t0
        with self.lock:
            self.stats.per_method_task_times.setdefault(m.name, []).append(elapsed)
        value, err = outcome
        if err is None:
            task.result.set_result(value)
        else:
            task.result.set_error(err)

    def touch(self, fut: FutureRef):
        """Value of ``fut``, blocking until its task has filled it."""
        t0 = time.perf_counter()
        if not fut.done():
            self._block_on(fut)
        dt = time.perf_counter() - t0
        with self.lock:
            self.stats.touch_block_time += dt
            self.stats.touch_durations.append(dt)
        return fut.result()

    def _block_on(self, fut: FutureRef) -> None:
        worker = getattr(self.local, "worker", False)
        with self.lock:
            self.waiting.add(fut)
            if worker:
                self.running -= 1
        try:
            while not fut.wait(_POLL):
                if self.aborting:
                    raise PoolShutdown("runtime aborted while waiting on a future")
                if not worker and self._deadlocked(fut):
                    raise DeadlockDetected("every thread of control is blocked on an empty future")
        finally:
            with self.lock:
                self.waiting.discard(fut)
                if worker:
                    self.running += 1

    def _deadlocked(self, fut: FutureRef) -> bool:
        with self.lock:
            if fut.done() or self.running > 0:
                return False
            return not any(pool.can_dispatch() for pool in self.pools.values())


def run(program: Program, config: Optional[RuntimeConfig] = None):
    """Execute ``program`` as given; returns (value, stats)."""
    config = config or RuntimeConfig()
    machine = Machine(program, detect_platform(config.cores_override), config.engine)
    value = machine.run()
    if config.stats_path:
        machine.stats.write_json(config.stats_path)
    return value, machine.stats
