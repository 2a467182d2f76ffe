"""Checks the restrictions placed on ``@Parallel`` methods before rewriting.

Annotated methods run as isolated tasks, so they (and anything they call)
may only touch their own parameters and locals. The checks follow calls
transitively: a helper that reads a global is as bad as reading it directly.
"""
from __future__ import annotations

from .il import Diagnostic, Kind, Op, Program, error, warning

TASK_ARG_TAGS = ("Int", "Float", "Bool")


def _task_arg_ok(kind: Kind) -> bool:
    if kind.tag in TASK_ARG_TAGS:
        return True
    return kind.is_array and kind.elem.tag in TASK_ARG_TAGS


def _reach(program: Program, start: str) -> dict[str, str]:
    """Methods reachable from ``start`` through CALL/SPAWN, mapped to the first
    callee of ``start`` that leads there."""
    via: dict[str, str] = {}
    stack = []
    for ins in program.method(start).body:
        if ins.op in (Op.CALL, Op.SPAWN) and ins.arg in program.by_name and ins.arg not in via:
            via[ins.arg] = ins.arg
            stack.append(ins.arg)
    while stack:
        name = stack.pop()
        for ins in program.method(name).body:
            if ins.op in (Op.CALL, Op.SPAWN) and ins.arg in program.by_name and ins.arg not in via:
                via[ins.arg] = via[name]
                stack.append(ins.arg)
    return via


def verify_parallel_constraints(program: Program) -> list[Diagnostic]:
    """Diagnostics for every violation of the @Parallel method rules.

    Errors: FieldAccessInParallel, MissingFutureReturn, BadParDegree,
    NestedParallelCall, BadParallelArgument. Warning: UnusedFutureReturn.
    An empty result means the program can be transformed.
    """
    diags: list[Diagnostic] = []
    for m in program.methods:
        if m.annotation is None:
            if m.return_kind.is_future:
                diags.append(warning("UnusedFutureReturn", m.name, None,
                                     "method returns a future but is not @Parallel"))
            continue

        if m.annotation.par_degree < 1:
            diags.append(error("BadParDegree", m.name, None,
                               f"parDegree must be at least 1, got {m.annotation.par_degree}"))
        if not m.return_kind.is_future:
            diags.append(error("MissingFutureReturn", m.name, None,
                               f"@Parallel method must return FutureOf(...), not {m.return_kind}"))
        for pname, kind in m.params:
            if not _task_arg_ok(kind):
                diags.append(error("BadParallelArgument", m.name, None,
                                   f"parameter {pname!r} of kind {kind} cannot be passed to a task"))

        reach = _reach(program, m.name)
        field_users = {n for n in reach
                       if any(i.op in (Op.GETSTATIC, Op.PUTSTATIC) for i in program.method(n).body)}
        nested = {n for n in reach if program.method(n).annotation is not None}
        for idx, ins in enumerate(m.body):
            if ins.op in (Op.GETSTATIC, Op.PUTSTATIC):
                diags.append(error("FieldAccessInParallel", m.name, idx,
                                   f"{ins.op.value} {ins.arg} in a @Parallel method"))
            elif ins.op in (Op.CALL, Op.SPAWN) and ins.arg in reach:
                callee = ins.arg
                if callee in nested:
                    diags.append(error("NestedParallelCall", m.name, idx,
                                       f"call to @Parallel method {callee!r} from a @Parallel method"))
                else:
                    hidden = sorted(n for n in nested if reach[n] == callee)
                    if hidden:
                        diags.append(error("NestedParallelCall", m.name, idx,
                                           f"callee {callee!r} reaches @Parallel method {hidden[0]!r}"))
                users = sorted(n for n in field_users if reach[n] == callee)
                if users:
                    diags.append(error("FieldAccessInParallel", m.name, idx,
                                       f"callee {callee!r} reaches a global access in {users[0]!r}"))
    return diags
