"""Load-time rewriting of @Parallel call sites into task spawns."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Union

from .il import Diagnostic, Instruction, Op, ParallelAnnotation, Program, has_errors
from .runtime.platform import PlatformInfo
from .validate import validate_program
from .verifier import verify_parallel_constraints

# fewer cores than this and spawning only adds overhead
MIN_THREADED_CORES = 2


@dataclass(frozen=True)
class Threaded:
    workers: int

    def __str__(self) -> str:
        return f"Threaded({self.workers})"


@dataclass(frozen=True)
class Inline:
    def __str__(self) -> str:
        return "Inline"


ExecutionMode = Union[Threaded, Inline]


@dataclass
class TransformReport:
    rewritten_sites: list[tuple[str, int]] = field(default_factory=list)
    mode_per_method: dict[str, ExecutionMode] = field(default_factory=dict)
    elapsed: float = 0.0  # milliseconds
    sites_per_method: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rewritten_sites": [[m, i] for m, i in self.rewritten_sites],
            "mode_per_method": {m: str(mode) for m, mode in self.mode_per_method.items()},
            "sites_per_method": dict(self.sites_per_method),
            "elapsed_ms": self.elapsed,
        }

    def table(self) -> str:
        rows = [("method", "mode", "rewritten")]
        for name, mode in self.mode_per_method.items():
            rows.append((name, str(mode), str(self.sites_per_method.get(name, 0))))
        widths = [max(len(r[c]) for r in rows) for c in range(3)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.append(f"rewritten sites: {len(self.rewritten_sites)}  elapsed: {self.elapsed:.3f} ms")
        return "\n".join(lines)


class AlreadyTransformed(Exception):
    pass


class VerificationFailed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics if d.is_error))


def decide_mode(annotation: ParallelAnnotation, platform: PlatformInfo) -> ExecutionMode:
    """Threaded with min(parDegree, cores) workers, or Inline when either is 1."""
    if platform.cores >= MIN_THREADED_CORES and annotation.par_degree >= 2:
        return Threaded(min(annotation.par_degree, platform.cores))
    return Inline()


def transform(program: Program, platform: PlatformInfo) -> tuple[Program, TransformReport]:
    """Rewrite CALLs of Threaded-mode @Parallel methods into SPAWNs.

    Only the CALL -> SPAWN substitution happens; nothing is added, removed
    or reordered, and the result is flagged ``transformed``.
    """
    start = time.perf_counter()
    if program.transformed:
        raise AlreadyTransformed(f"program {program.name!r} is already transformed")
    diags = validate_program(program)
    if not has_errors(diags):
        diags = verify_parallel_constraints(program)
    if has_errors(diags):
        raise VerificationFailed(diags)

    report = TransformReport()
    threaded = set()
    for m in program.methods:
        if m.annotation is not None:
            mode = decide_mode(m.annotation, platform)
            report.mode_per_method[m.name] = mode
            if isinstance(mode, Threaded):
                threaded.add(m.name)

    methods = []
    for m in program.methods:
        body = list(m.body)
        for i, ins in enumerate(body):
            if ins.op is Op.CALL and ins.arg in threaded:
                body[i] = Instruction(Op.SPAWN, ins.arg)
                report.rewritten_sites.append((m.name, i))
                report.sites_per_method[ins.arg] = report.sites_per_method.get(ins.arg, 0) + 1
        methods.append(replace(m, body=tuple(body)) if body != list(m.body) else m)

    out = replace(program, methods=tuple(methods), transformed=True)
    report.elapsed = (time.perf_counter() - start) * 1000.0
    return out, report
