"""Structural validation of IL programs."""
from __future__ import annotations

from .il import (
    INT64_MAX,
    INT64_MIN,
    JUMPS,
    OPERAND,
    TERMINATORS,
    Diagnostic,
    Kind,
    Op,
    Program,
    error,
    kind_problems,
)


def validate_program(program: Program) -> list[Diagnostic]:
    """Check every Program/MethodDef invariant.

    Returns an empty list for a well-formed program. Diagnostics come out in
    program order, so the same input always yields the same sequence.
    """
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for m in program.methods:
        if m.name in seen:
            diags.append(error("DuplicateMethod", m.name, None, f"method {m.name!r} defined more than once"))
        seen.add(m.name)

    seen_globals: set[str] = set()
    for name, kind in program.globals:
        if name in seen_globals:
            diags.append(error("DuplicateGlobal", "<program>", None, f"global {name!r} declared more than once"))
        seen_globals.add(name)
        for problem in kind_problems(kind):
            diags.append(error("BadKind", "<program>", None, f"global {name!r}: {problem}"))

    entry = program.by_name.get(program.entry)
    if entry is None:
        diags.append(error("MissingEntry", program.entry, None, f"entry method {program.entry!r} does not exist"))
    elif entry.params:
        diags.append(error("EntryHasParams", entry.name, None, "entry method must take no parameters"))

    for m in program.methods:
        diags.extend(_validate_method(program, m))
    return diags


def _validate_method(program: Program, m) -> list[Diagnostic]:
    diags = []
    names: set[str] = set()
    for name, kind in m.slots:
        if name in names:
            diags.append(error("DuplicateSlot", m.name, None, f"slot {name!r} declared more than once"))
        names.add(name)
        for problem in kind_problems(kind):
            diags.append(error("BadKind", m.name, None, f"slot {name!r}: {problem}"))
    for problem in kind_problems(m.return_kind, allow_void=True):
        diags.append(error("BadKind", m.name, None, f"return kind: {problem}"))

    n_slots = len(m.slots)
    n = len(m.body)

    for i, ins in enumerate(m.body):
        if not isinstance(ins.op, Op):
            diags.append(error("BadOpcode", m.name, i, f"unknown opcode {ins.op!r}"))
            continue
        bad = _operand_problem(ins)
        if bad:
            diags.append(error("BadOperand", m.name, i, bad))
            continue
        op, arg = ins.op, ins.arg
        if op in JUMPS and not 0 <= arg < n:
            diags.append(error("InvalidJumpTarget", m.name, i, f"jump target {arg} outside body of length {n}"))
        elif op in (Op.LOAD, Op.STORE) and not 0 <= arg < n_slots:
            diags.append(error("InvalidSlot", m.name, i, f"slot index {arg} outside {n_slots} declared slots"))
        elif op in (Op.CALL, Op.SPAWN):
            target = program.by_name.get(arg)
            if target is None:
                diags.append(error("UnknownMethod", m.name, i, f"call to undefined method {arg!r}"))
            elif op is Op.SPAWN:
                if not program.transformed:
                    diags.append(error("SpawnInUntransformed", m.name, i, "SPAWN only appears in transformed programs"))
                if target.annotation is None:
                    diags.append(error("SpawnTargetNotAnnotated", m.name, i, f"SPAWN target {arg!r} is not @Parallel"))
        elif op in (Op.GETSTATIC, Op.PUTSTATIC) and arg not in program.global_kinds:
            diags.append(error("UnknownGlobal", m.name, i, f"undeclared global {arg!r}"))
        elif op is Op.NEWARR:
            for problem in kind_problems(arg):
                diags.append(error("BadKind", m.name, i, f"array element kind: {problem}"))

    # reported last: it points at the final instruction
    if n == 0 or m.body[-1].op not in TERMINATORS:
        diags.append(error("MissingTerminator", m.name, n - 1 if n else None,
                           "body must end with RET, HALT or JMP"))
    return diags


def _operand_problem(ins) -> str | None:
    cat = OPERAND.get(ins.op)
    arg = ins.arg
    if cat is None:
        return None if arg is None else f"{ins.op.value} takes no operand"
    if cat in ("int", "slot", "target"):
        if type(arg) is not int:
            return f"{ins.op.value} needs an integer operand"
        if cat == "int" and not INT64_MIN <= arg <= INT64_MAX:
            return f"integer constant {arg} outside 64-bit range"
        return None
    if cat == "float":
        return None if type(arg) is float else "CONST_F needs a float operand"
    if cat == "kind":
        return None if isinstance(arg, Kind) else "NEWARR needs an element kind"
    return None if isinstance(arg, str) and arg else f"{ins.op.value} needs a name operand"
