"""Core data model of the PAL intermediate language.

Programs are immutable trees of frozen dataclasses, so they can be shared
between the interpreter thread and task workers without locking.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class Kind:
    """A value kind. ``elem`` is set only for ``ArrayOf`` and ``FutureOf``."""

    tag: str
    elem: Optional["Kind"] = None

    def __str__(self) -> str:
        if self.elem is None:
            return self.tag
        return f"{self.tag}({self.elem})"

    __repr__ = __str__

    @property
    def is_array(self) -> bool:
        return self.tag == "ArrayOf"

    @property
    def is_future(self) -> bool:
        return self.tag == "FutureOf"

    @property
    def is_scalar(self) -> bool:
        return self.tag in ("Int", "Float", "Bool")


INT = Kind("Int")
FLOAT = Kind("Float")
BOOL = Kind("Bool")
VOID = Kind("Void")

SCALAR_TAGS = ("Int", "Float", "Bool")


def ArrayOf(elem: Kind) -> Kind:
    return Kind("ArrayOf", elem)


def FutureOf(elem: Kind) -> Kind:
    return Kind("FutureOf", elem)


def kind_problems(kind: Kind, allow_void: bool = False) -> list[str]:
    """Structural problems with a kind: nested futures, misplaced Void."""
    problems = []
    if kind.tag == "Void":
        if not allow_void:
            problems.append("Void is only allowed as a return kind")
        return problems
    if kind.tag in SCALAR_TAGS:
        return problems
    if kind.tag not in ("ArrayOf", "FutureOf") or kind.elem is None:
        return [f"malformed kind {kind}"]
    if kind.is_future and kind.elem.is_future:
        problems.append(f"nested future kind {kind}")
    problems.extend(kind_problems(kind.elem))
    return problems


class Op(enum.Enum):
    CONST_I = "CONST_I"
    CONST_F = "CONST_F"
    LOAD = "LOAD"
    STORE = "STORE"
    ADD = "ADD"
    SUB = "SUB"
    MUL = "MUL"
    DIV = "DIV"
    NEG = "NEG"
    CMP_LT = "CMP_LT"
    CMP_EQ = "CMP_EQ"
    JMP = "JMP"
    JZ = "JZ"
    CALL = "CALL"
    SPAWN = "SPAWN"
    TOUCH = "TOUCH"
    NEWARR = "NEWARR"
    ALOAD = "ALOAD"
    ASTORE = "ASTORE"
    ALEN = "ALEN"
    GETSTATIC = "GETSTATIC"
    PUTSTATIC = "PUTSTATIC"
    RET = "RET"
    HALT = "HALT"


# operand category per opcode; None means no operand
OPERAND = {
    Op.CONST_I: "int",
    Op.CONST_F: "float",
    Op.LOAD: "slot",
    Op.STORE: "slot",
    Op.JMP: "target",
    Op.JZ: "target",
    Op.CALL: "method",
    Op.SPAWN: "method",
    Op.NEWARR: "kind",
    Op.GETSTATIC: "global",
    Op.PUTSTATIC: "global",
}

JUMPS = (Op.JMP, Op.JZ)
TERMINATORS = (Op.RET, Op.HALT, Op.JMP)

Operand = Union[int, float, str, Kind, None]


@dataclass(frozen=True)
class Instruction:
    op: Op
    arg: Operand = None

    def __str__(self) -> str:
        return self.op.value if self.arg is None else f"{self.op.value} {self.arg}"


@dataclass(frozen=True)
class ParallelAnnotation:
    # not checked here: the verifier reports par_degree < 1 as BadParDegree
    par_degree: int


@dataclass(frozen=True)
class MethodDef:
    name: str
    params: tuple[tuple[str, Kind], ...]
    locals: tuple[tuple[str, Kind], ...]
    return_kind: Kind
    body: tuple[Instruction, ...]
    annotation: Optional[ParallelAnnotation] = None

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def slots(self) -> tuple[tuple[str, Kind], ...]:
        return self.params + self.locals

    @property
    def is_parallel(self) -> bool:
        return self.annotation is not None

    @property
    def body_return_kind(self) -> Kind:
        """Kind a RET inside the body must produce.

        Annotated methods return a plain value; the call boundary wraps it in
        a future.
        """
        if self.is_parallel and self.return_kind.is_future:
            return self.return_kind.elem
        return self.return_kind


@dataclass(frozen=True)
class Program:
    name: str
    methods: tuple[MethodDef, ...]
    entry: str = "main"
    transformed: bool = False
    globals: tuple[tuple[str, Kind], ...] = field(default=())

    @cached_property
    def by_name(self) -> dict[str, MethodDef]:
        table: dict[str, MethodDef] = {}
        for m in self.methods:
            table.setdefault(m.name, m)
        return table

    def method(self, name: str) -> MethodDef:
        return self.by_name[name]

    @cached_property
    def global_kinds(self) -> dict[str, Kind]:
        table: dict[str, Kind] = {}
        for name, kind in self.globals:
            table.setdefault(name, kind)
        return table

    def call_sites(self, target: str) -> list[tuple[str, int]]:
        return [
            (m.name, i)
            for m in self.methods
            for i, ins in enumerate(m.body)
            if ins.op in (Op.CALL, Op.SPAWN) and ins.arg == target
        ]


class Severity(enum.Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    method: str
    instruction_index: Optional[int]
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def __str__(self) -> str:
        where = self.method
        if self.instruction_index is not None:
            where += f"#{self.instruction_index}"
        return f"{self.severity.value} {self.code} {where}: {self.message}"


def error(code: str, method: str, index: Optional[int], message: str) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, method, index, message)


def warning(code: str, method: str, index: Optional[int], message: str) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, method, index, message)


def has_errors(diagnostics) -> bool:
    return any(d.is_error for d in diagnostics)
