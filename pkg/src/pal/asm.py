"""Textual assembly format (``.pal`` files): parser and emitter.

The format is line oriented::

    program demo;
    entry main;
    global total: Int;

    @Parallel(parDegree=4)
    method work(n: Int) -> FutureOf(Int) {
        local acc: Int;
    top: LOAD n; ...; RET
    }

Instructions are ``;``-terminated (the last one in a body may omit it),
``//`` starts a comment, labels are ``name:`` and jump operands may be a
label or a raw instruction index. A first line reading ``#transformed``
marks transformer output; only trusted parses accept it (and SPAWN).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .il import (
    BOOL,
    FLOAT,
    INT,
    INT64_MAX,
    INT64_MIN,
    JUMPS,
    OPERAND,
    VOID,
    ArrayOf,
    FutureOf,
    Instruction,
    Kind,
    MethodDef,
    Op,
    ParallelAnnotation,
    Program,
)

TRANSFORMED_MARKER = "#transformed"


@dataclass(frozen=True)
class AsmDiagnostic:
    code: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


class AssemblyError(Exception):
    """Raised when source text does not yield a program. Carries every diagnostic found."""

    code = "AssemblyError"

    def __init__(self, diagnostics: list[AsmDiagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class AssemblySyntaxError(AssemblyError):
    code = "SyntaxError"


class ResolutionError(AssemblyError):
    code = "ResolutionError"


class RestrictedOpcode(AssemblyError):
    code = "RestrictedOpcode"


_ERRORS = {cls.code: cls for cls in (AssemblySyntaxError, ResolutionError, RestrictedOpcode)}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<arrow>->)
  | (?P<number>[-+]?(?:\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\d+|inf\b|nan\b))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[(){}:;,=@])
    """,
    re.VERBOSE,
)

_OPCODES = {op.value: op for op in Op}
_BASE_KINDS = {"Int": INT, "Float": FLOAT, "Bool": BOOL, "Void": VOID}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


class _Fail(Exception):
    def __init__(self, diag: AsmDiagnostic):
        self.diag = diag


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise _Fail(AsmDiagnostic("SyntaxError", line, pos - line_start + 1,
                                      f"unexpected character {text[pos]!r}"))
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _decode(source: Union[str, bytes]) -> str:
    if isinstance(source, str):
        return source
    try:
        return bytes(source).decode("utf-8")
    except UnicodeDecodeError as exc:
        head = bytes(source)[: exc.start]
        line = head.count(b"\n") + 1
        col = exc.start - (head.rfind(b"\n") + 1) + 1
        raise AssemblySyntaxError([AsmDiagnostic("SyntaxError", line, col, "source is not valid UTF-8")])


def parse_assembly(source: Union[str, bytes], *, trusted: bool = False, name: str = "main") -> Program:
    """Parse assembly text into an untransformed Program.

    ``trusted`` admits transformer output (a ``#transformed`` header and
    SPAWN instructions). Never returns a partial program: any problem raises
    an :class:`AssemblyError` subclass listing positioned diagnostics.
    """
    text = _decode(source)
    if text.startswith("\ufeff"):
        text = text[1:]
    first, sep, rest = text.partition("\n")
    transformed = first.strip() == TRANSFORMED_MARKER
    if transformed:
        if not trusted:
            raise RestrictedOpcode([AsmDiagnostic(
                "RestrictedOpcode", 1, 1, "transformed programs are only accepted in trusted mode")])
        text = sep + rest  # keep line numbering
    try:
        return _Parser(_tokenize(text), transformed, name).parse()
    except _Fail as exc:
        raise AssemblySyntaxError([exc.diag]) from None
    except RecursionError:
        raise AssemblySyntaxError([AsmDiagnostic("SyntaxError", 1, 1, "kind nesting too deep")]) from None


@dataclass
class _RawMethod:
    name: str
    tok: _Tok
    params: list
    locals: list
    return_kind: Kind
    annotation: Optional[ParallelAnnotation]
    ops: list          # (Op, operand token or parsed operand, op token)
    labels: dict


class _Parser:
    def __init__(self, toks: list[_Tok], transformed: bool, name: str):
        self.toks = toks
        self.i = 0
        self.transformed = transformed
        self.name = name
        self.soft: list[AsmDiagnostic] = []

    # -- token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        raise _Fail(AsmDiagnostic("SyntaxError", tok.line, tok.col, message))

    def soft_error(self, code: str, tok: _Tok, message: str):
        self.soft.append(AsmDiagnostic(code, tok.line, tok.col, message))

    def next(self) -> _Tok:
        tok = self.tok
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "arrow", "ident") and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def ident(self, what: str = "identifier") -> _Tok:
        if self.tok.kind != "ident":
            self.fail(f"expected {what}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def peek_is(self, offset: int, text: str) -> bool:
        j = self.i + offset
        return j < len(self.toks) and self.toks[j].text == text and self.toks[j].kind == "punct"

    # -- grammar
    def parse(self) -> Program:
        name, entry = None, None
        globals_: list[tuple[str, Kind]] = []
        raw: list[_RawMethod] = []
        entry_tok = None
        while self.tok.kind != "eof":
            if self.at("program"):
                kw = self.next()
                if name is not None:
                    self.fail("duplicate program directive", kw)
                name = self.ident("program name").text
                self.expect(";")
            elif self.at("entry"):
                kw = self.next()
                if entry is not None:
                    self.fail("duplicate entry directive", kw)
                entry_tok = self.ident("entry method name")
                entry = entry_tok.text
                self.expect(";")
            elif self.at("global"):
                self.next()
                gname = self.ident("global name").text
                self.expect(":")
                globals_.append((gname, self.kind()))
                self.expect(";")
            elif self.at("@") or self.at("method"):
                raw.append(self.method())
            else:
                self.fail(f"unexpected {self.tok.text!r} at top level")

        entry = entry or "main"
        names = {m.name for m in raw}
        methods = [self.resolve(m, names, {g for g, _ in globals_}) for m in raw]
        if entry not in names:
            where = entry_tok or self.tok
            self.soft_error("ResolutionError", where, f"entry method {entry!r} is not defined")
        if self.soft:
            self.soft.sort(key=lambda d: (d.line, d.col))
            raise _ERRORS[self.soft[0].code](self.soft)
        return Program(name=name or self.name, methods=tuple(methods), entry=entry,
                       transformed=self.transformed, globals=tuple(globals_))

    def kind(self) -> Kind:
        tok = self.ident("kind")
        if tok.text in _BASE_KINDS:
            return _BASE_KINDS[tok.text]
        if tok.text in ("ArrayOf", "FutureOf"):
            self.expect("(")
            inner = self.kind()
            self.expect(")")
            return ArrayOf(inner) if tok.text == "ArrayOf" else FutureOf(inner)
        self.fail(f"unknown kind {tok.text!r}", tok)

    def annotation(self) -> ParallelAnnotation:
        self.expect("@")
        tok = self.ident("annotation name")
        if tok.text != "Parallel":
            self.fail(f"unknown annotation @{tok.text}", tok)
        self.expect("(")
        attr = self.ident("annotation attribute")
        if attr.text != "parDegree":
            self.fail(f"unknown @Parallel attribute {attr.text!r}", attr)
        self.expect("=")
        value = self.int_literal()
        self.expect(")")
        return ParallelAnnotation(value)

    def int_literal(self) -> int:
        tok = self.tok
        if tok.kind != "number" or not re.fullmatch(r"[-+]?\d+", tok.text):
            self.fail(f"expected integer, found {tok.text or 'end of input'!r}")
        self.next()
        if len(tok.text.lstrip("+-")) > 20:
            self.fail(f"integer {tok.text[:24]}... outside 64-bit range", tok)
        value = int(tok.text)
        if not INT64_MIN <= value <= INT64_MAX:
            self.fail(f"integer {tok.text} outside 64-bit range", tok)
        return value

    def method(self) -> _RawMethod:
        annotation = self.annotation() if self.at("@") else None
        self.expect("method")
        name_tok = self.ident("method name")
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pname = self.ident("parameter name")
                self.expect(":")
                params.append((pname.text, self.kind()))
                if not self.at(","):
                    break
                self.next()
        self.expect(")")
        self.expect("->")
        ret = self.kind()
        self.expect("{")
        locals_, ops, labels = [], [], {}
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail(f"unterminated body of method {name_tok.text!r}")
            if self.at(";"):
                self.next()
                continue
            if self.tok.kind == "ident" and self.peek_is(1, ":"):
                label = self.next()
                self.next()
                if label.text in labels:
                    self.fail(f"duplicate label {label.text!r}", label)
                labels[label.text] = len(ops)
                continue
            if self.at("local") and self.toks[self.i + 1].kind == "ident":
                self.next()
                lname = self.ident("local name")
                self.expect(":")
                locals_.append((lname.text, self.kind()))
            else:
                ops.append(self.instruction())
            if not self.at("}"):
                self.expect(";")
        self.expect("}")
        return _RawMethod(name_tok.text, name_tok, params, locals_, ret, annotation, ops, labels)

    def instruction(self):
        tok = self.ident("opcode")
        op = _OPCODES.get(tok.text)
        if op is None:
            self.fail(f"unknown opcode {tok.text!r}", tok)
        if op is Op.SPAWN and not self.transformed:
            self.soft_error("RestrictedOpcode", tok, "SPAWN is emitted by the transformer and not accepted in source text")
        cat = OPERAND.get(op)
        if cat is None:
            return op, None, tok
        if cat == "int":
            return op, self.int_literal(), tok
        if cat == "float":
            num = self.tok
            if num.kind != "number":
                self.fail(f"expected float literal, found {num.text or 'end of input'!r}")
            self.next()
            return op, float(num.text), tok
        if cat == "kind":
            return op, self.kind(), tok
        if cat in ("slot", "target") and self.tok.kind == "number":
            return op, self.int_literal(), tok
        return op, self.ident(f"{cat} name"), tok

    def resolve(self, raw: _RawMethod, methods: set, globals_: set) -> MethodDef:
        slot_index: dict[str, int] = {}
        for idx, (sname, _) in enumerate(raw.params + raw.locals):
            slot_index.setdefault(sname, idx)
        body = []
        for op, arg, tok in raw.ops:
            if isinstance(arg, _Tok):
                name = arg.text
                if op in (Op.LOAD, Op.STORE):
                    if name not in slot_index:
                        self.soft_error("ResolutionError", arg, f"unknown slot {name!r} in method {raw.name!r}")
                    arg = slot_index.get(name, 0)
                elif op in JUMPS:
                    if name not in raw.labels:
                        self.soft_error("ResolutionError", arg, f"unknown label {name!r} in method {raw.name!r}")
                    arg = raw.labels.get(name, 0)
                elif op in (Op.CALL, Op.SPAWN):
                    if name not in methods:
                        self.soft_error("ResolutionError", arg, f"unknown method {name!r}")
                    arg = name
                else:
                    if name not in globals_:
                        self.soft_error("ResolutionError", arg, f"unknown global {name!r}")
                    arg = name
            body.append(Instruction(op, arg))
        return MethodDef(raw.name, tuple(raw.params), tuple(raw.locals), raw.return_kind,
                         tuple(body), raw.annotation)


def _format_float(x: float) -> str:
    return repr(x)


def emit_assembly(program: Program) -> str:
    """Render a program as normalized assembly text.

    For untransformed programs ``parse_assembly(emit_assembly(p)) == p``.
    Transformed programs get the ``#transformed`` header.
    """
    out = []
    if program.transformed:
        out.append(TRANSFORMED_MARKER)
    out.append(f"program {program.name};")
    out.append(f"entry {program.entry};")
    for gname, kind in program.globals:
        out.append(f"global {gname}: {kind};")
    for m in program.methods:
        out.append("")
        out.extend(_emit_method(m))
    return "\n".join(out) + "\n"


def _emit_method(m: MethodDef) -> list[str]:
    lines = []
    if m.annotation is not None:
        lines.append(f"@Parallel(parDegree={m.annotation.par_degree})")
    params = ", ".join(f"{n}: {k}" for n, k in m.params)
    lines.append(f"method {m.name}({params}) -> {m.return_kind} {{")
    for n, k in m.locals:
        lines.append(f"    local {n}: {k};")
    slots = m.slots
    first_index: dict[str, int] = {}
    for idx, (n, _) in enumerate(slots):
        first_index.setdefault(n, idx)
    targets = {ins.arg for ins in m.body
               if ins.op in JUMPS and type(ins.arg) is int and 0 <= ins.arg < len(m.body)}
    for i, ins in enumerate(m.body):
        prefix = f"L{i}:".ljust(4) if i in targets else "    "
        lines.append(f"{prefix}{_emit_instruction(ins, slots, first_index, len(m.body))};")
    lines.append("}")
    return lines


def _emit_instruction(ins: Instruction, slots, first_index, n) -> str:
    op, arg = ins.op, ins.arg
    if arg is None:
        return op.value
    if op is Op.CONST_F:
        return f"CONST_F {_format_float(arg)}"
    if op in (Op.LOAD, Op.STORE) and type(arg) is int and 0 <= arg < len(slots):
        name = slots[arg][0]
        if first_index[name] == arg:
            return f"{op.value} {name}"
    if op in JUMPS and type(arg) is int and 0 <= arg < n:
        return f"{op.value} L{arg}"
    return f"{op.value} {arg}"
