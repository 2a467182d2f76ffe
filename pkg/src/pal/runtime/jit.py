"""Native compilation of statically typed methods.

A method qualifies when every stack slot has a single kind at every
instruction, it only uses scalars and flat scalar arrays, and it calls only
other qualifying methods (no recursion). Such a method is translated to a
Python function over typed locals and compiled with numba in ``nogil`` mode,
so worker threads run tasks truly in parallel. Everything else stays with
the interpreter, which is also the reference the compiled code is tested
against.
"""
from __future__ import annotations

import logging
import threading
from typing import Optional

import numba
import numpy as np

from ..il import BOOL, FLOAT, INT, VOID, ArrayOf, Kind, MethodDef, Op, Program
from .errors import DIVIDE_BY_ZERO, OUT_OF_BOUNDS, Trap

log = logging.getLogger(__name__)

_SCALARS = (INT, FLOAT, BOOL)
_ALLOWED = _SCALARS + tuple(ArrayOf(k) for k in _SCALARS)
_SUFFIX = {INT: "i", FLOAT: "f", BOOL: "b", ArrayOf(INT): "ai", ArrayOf(FLOAT): "af", ArrayOf(BOOL): "ab"}
_NB_TYPE = {INT: "int64", FLOAT: "float64", BOOL: "boolean",
            ArrayOf(INT): "int64[:]", ArrayOf(FLOAT): "float64[:]", ArrayOf(BOOL): "boolean[:]"}
_DTYPE = {INT: "np.int64", FLOAT: "np.float64", BOOL: "np.bool_"}
_ZERO = {INT: "0", FLOAT: "0.0", BOOL: "False",
         ArrayOf(INT): "np.zeros(0, np.int64)", ArrayOf(FLOAT): "np.zeros(0, np.float64)",
         ArrayOf(BOOL): "np.zeros(0, np.bool_)"}


class JitTrap(Exception):
    pass


@numba.njit(nogil=True, cache=False)
def _idiv(a, b):
    if b == -1:
        return -a
    q = a // b
    if a % b != 0 and (a < 0) != (b < 0):
        q += 1
    return q


class Ineligible(Exception):
    pass


def infer_stack_kinds(program: Program, m: MethodDef) -> list[Optional[tuple]]:
    """Stack kinds before each instruction (None where unreachable).

    Raises Ineligible when the method cannot be typed statically within the
    compiled subset.
    """
    for _, k in m.slots:
        if k not in _ALLOWED:
            raise Ineligible(f"slot kind {k}")
    ret = m.body_return_kind
    if ret != VOID and ret not in _ALLOWED:
        raise Ineligible(f"return kind {ret}")
    slot_kinds = [k for _, k in m.slots]
    n = len(m.body)
    states: list[Optional[tuple]] = [None] * n
    states[0] = ()
    work = [0]

    def flow(pc, state):
        if not 0 <= pc < n:
            raise Ineligible("control leaves the body")
        if states[pc] is None:
            states[pc] = state
            work.append(pc)
        elif states[pc] != state:
            raise Ineligible(f"inconsistent stack at {pc}")

    def need(stack, count):
        if len(stack) < count:
            raise Ineligible("stack underflow")

    while work:
        pc = work.pop()
        stack = list(states[pc])
        ins = m.body[pc]
        op, arg = ins.op, ins.arg
        nxt = pc + 1
        if op is Op.CONST_I:
            stack.append(INT)
        elif op is Op.CONST_F:
            stack.append(FLOAT)
        elif op is Op.LOAD:
            stack.append(slot_kinds[arg])
        elif op is Op.STORE:
            need(stack, 1)
            if stack.pop() != slot_kinds[arg]:
                raise Ineligible("STORE kind")
        elif op in (Op.ADD, Op.SUB, Op.MUL, Op.DIV, Op.CMP_LT, Op.CMP_EQ):
            need(stack, 2)
            b, a = stack.pop(), stack.pop()
            numeric = (INT, FLOAT, BOOL) if op is Op.CMP_EQ else (INT, FLOAT)
            if a != b or a not in numeric:
                raise Ineligible(f"{op.value} operands")
            stack.append(BOOL if op in (Op.CMP_LT, Op.CMP_EQ) else a)
        elif op is Op.NEG:
            need(stack, 1)
            if stack[-1] not in (INT, FLOAT):
                raise Ineligible("NEG operand")
        elif op is Op.JMP:
            flow(arg, tuple(stack))
            continue
        elif op is Op.JZ:
            need(stack, 1)
            if stack.pop() not in (INT, BOOL):
                raise Ineligible("JZ operand")
            flow(arg, tuple(stack))
        elif op is Op.CALL:
            callee = program.by_name.get(arg)
            if callee is None or callee.annotation is not None:
                raise Ineligible(f"call to {arg}")
            need(stack, callee.arity)
            for _, pk in reversed(callee.params):
                if stack.pop() != pk:
                    raise Ineligible(f"argument kinds for {arg}")
            if callee.return_kind != VOID:
                stack.append(callee.return_kind)
        elif op is Op.NEWARR:
            need(stack, 1)
            if stack.pop() != INT or arg not in _SCALARS:
                raise Ineligible("NEWARR")
            stack.append(ArrayOf(arg))
        elif op is Op.ALOAD:
            need(stack, 2)
            i, a = stack.pop(), stack.pop()
            if i != INT or a not in _ALLOWED or not a.is_array:
                raise Ineligible("ALOAD operands")
            stack.append(a.elem)
        elif op is Op.ASTORE:
            need(stack, 3)
            v, i, a = stack.pop(), stack.pop(), stack.pop()
            if i != INT or not a.is_array or a.elem != v:
                raise Ineligible("ASTORE operands")
        elif op is Op.ALEN:
            need(stack, 1)
            if not stack.pop().is_array:
                raise Ineligible("ALEN operand")
            stack.append(INT)
        elif op is Op.RET:
            if ret != VOID:
                need(stack, 1)
                if stack[-1] != ret:
                    raise Ineligible("RET kind")
            continue
        else:
            raise Ineligible(f"opcode {op.value}")
        flow(nxt, tuple(stack))
    return states


def eligible_methods(program: Program) -> dict[str, list]:
    """Methods that can be compiled, with their inferred stack states."""
    states = {}
    for m in program.methods:
        if program.by_name.get(m.name) is not m:
            continue
        try:
            states[m.name] = infer_stack_kinds(program, m)
        except Ineligible as exc:
            log.debug("method %s stays interpreted: %s", m.name, exc)
    # recursion is left to the interpreter (it enforces the call depth limit)
    for name in [n for n in states if _on_cycle(program, n)]:
        del states[name]
    changed = True
    while changed:
        changed = False
        for name in list(states):
            if any(c not in states for c in _callees(program.method(name))):
                del states[name]
                changed = True
    return states


def _callees(m: MethodDef) -> list[str]:
    return sorted({ins.arg for ins in m.body if ins.op is Op.CALL})


def _on_cycle(program, start) -> bool:
    seen = set()
    stack = list(_callees(program.method(start)))
    while stack:
        name = stack.pop()
        if name == start:
            return True
        if name in seen or name not in program.by_name:
            continue
        seen.add(name)
        stack.extend(_callees(program.method(name)))
    return False


def generate_source(program: Program, m: MethodDef, states: list) -> str:
    """Python source for ``m`` as a block-dispatch loop over typed variables."""
    n = len(m.body)
    leaders = {0}
    for pc, ins in enumerate(m.body):
        if ins.op in (Op.JMP, Op.JZ):
            leaders.add(ins.arg)
            leaders.add(pc + 1)
        elif ins.op is Op.RET:
            leaders.add(pc + 1)
    leaders = sorted(p for p in leaders if p < n and states[p] is not None)

    params = [f"v{i}" for i in range(len(m.params))]
    lines = [f"def m_{m.name}({', '.join(params)}):"]
    for i, (_, k) in enumerate(m.locals, start=len(m.params)):
        lines.append(f"    v{i} = {_ZERO[k]}")
    var_lines_at = len(lines)
    lines.append("    pc = 0")
    lines.append("    while True:")
    name = repr(m.name)
    used: set = set()

    def s(d, k):
        used.add((d, k))
        return f"s{d}{_SUFFIX[k]}"

    for li, start in enumerate(leaders):
        end = leaders[li + 1] if li + 1 < len(leaders) else n
        lines.append(f"        if pc == {start}:")
        body: list[str] = []
        terminated = False
        for pc in range(start, end):
            st = states[pc]
            if st is None:
                break
            d = len(st)
            ins = m.body[pc]
            op, arg = ins.op, ins.arg
            top = st[-1] if st else None
            if op is Op.CONST_I:
                lit = "(-9223372036854775807 - 1)" if arg == -(1 << 63) else str(arg)
                body.append(f"{s(d, INT)} = {lit}")
            elif op is Op.CONST_F:
                lit = repr(arg)
                if lit in ("inf", "-inf", "nan"):
                    lit = {"inf": "np.inf", "-inf": "-np.inf", "nan": "np.nan"}[lit]
                body.append(f"{s(d, FLOAT)} = {lit}")
            elif op is Op.LOAD:
                k = m.slots[arg][1]
                body.append(f"{s(d, k)} = v{arg}")
            elif op is Op.STORE:
                body.append(f"v{arg} = {s(d - 1, top)}")
            elif op in (Op.ADD, Op.SUB, Op.MUL):
                sym = {Op.ADD: "+", Op.SUB: "-", Op.MUL: "*"}[op]
                a, b = s(d - 2, top), s(d - 1, top)
                body.append(f"{a} = {a} {sym} {b}")
            elif op is Op.DIV:
                a, b = s(d - 2, top), s(d - 1, top)
                if top == INT:
                    body.append(f"if {b} == 0:")
                    body.append(f"    raise JitTrap({DIVIDE_BY_ZERO!r}, {name}, {pc})")
                    body.append(f"{a} = _idiv({a}, {b})")
                else:
                    body.append(f"{a} = {a} / {b}")
            elif op is Op.NEG:
                a = s(d - 1, top)
                body.append(f"{a} = -{a}")
            elif op in (Op.CMP_LT, Op.CMP_EQ):
                sym = "<" if op is Op.CMP_LT else "=="
                body.append(f"{s(d - 2, BOOL)} = {s(d - 2, top)} {sym} {s(d - 1, top)}")
            elif op is Op.JMP:
                body.append(f"pc = {arg}")
                body.append("continue")
                terminated = True
                break
            elif op is Op.JZ:
                cond = s(d - 1, top)
                test = f"not {cond}" if top == BOOL else f"{cond} == 0"
                body.append(f"if {test}:")
                body.append(f"    pc = {arg}")
                body.append(f"else:")
                body.append(f"    pc = {pc + 1}")
                body.append("continue")
                terminated = True
                break
            elif op is Op.CALL:
                callee = program.method(arg)
                from_d = d - callee.arity
                args = ", ".join(s(from_d + j, k) for j, (_, k) in enumerate(callee.params))
                ret = callee.return_kind
                if ret == VOID:
                    body.append(f"m_{arg}({args})")
                else:
                    body.append(f"{s(from_d, ret)} = m_{arg}({args})")
            elif op is Op.NEWARR:
                nv = s(d - 1, INT)
                body.append(f"if {nv} < 0:")
                body.append(f"    raise JitTrap({OUT_OF_BOUNDS!r}, {name}, {pc})")
                body.append(f"{s(d - 1, ArrayOf(arg))} = np.zeros({nv}, {_DTYPE[arg]})")
            elif op is Op.ALOAD:
                ak = st[-2]
                arr, idx = s(d - 2, ak), s(d - 1, INT)
                body.append(f"if {idx} < 0 or {idx} >= {arr}.shape[0]:")
                body.append(f"    raise JitTrap({OUT_OF_BOUNDS!r}, {name}, {pc})")
                body.append(f"{s(d - 2, ak.elem)} = {arr}[{idx}]")
            elif op is Op.ASTORE:
                ak = st[-3]
                arr, idx, val = s(d - 3, ak), s(d - 2, INT), s(d - 1, ak.elem)
                body.append(f"if {idx} < 0 or {idx} >= {arr}.shape[0]:")
                body.append(f"    raise JitTrap({OUT_OF_BOUNDS!r}, {name}, {pc})")
                body.append(f"{arr}[{idx}] = {val}")
            elif op is Op.ALEN:
                body.append(f"{s(d - 1, INT)} = {s(d - 1, top)}.shape[0]")
            elif op is Op.RET:
                if m.body_return_kind == VOID:
                    body.append("return")
                else:
                    body.append(f"return {s(d - 1, top)}")
                terminated = True
                break
        if not terminated:
            body.append(f"pc = {end}")
            body.append("continue")
        lines.extend("            " + b for b in body)
    lines.append("        return" + ("" if m.body_return_kind == VOID else f" {_ZERO[m.body_return_kind]}"))
    decls = [f"    s{d}{_SUFFIX[k]} = {_ZERO[k]}" for d, k in sorted(used, key=lambda t: (t[0], _SUFFIX[t[1]]))]
    lines[var_lines_at:var_lines_at] = decls
    return "\n".join(lines) + "\n"


class CompiledMethod:
    """A compiled body plus the bookkeeping to map its traps back to IL."""

    def __init__(self, name: str, fn, source: str):
        self.name = name
        self.fn = fn
        self.source = source

    def __call__(self, args):
        try:
            return self.fn(*args)
        except JitTrap as exc:
            kind, method, index = exc.args
            raise Trap(kind, method, index) from None


_cache: dict = {}
_cache_lock = threading.Lock()


def _signature(m: MethodDef) -> str:
    return "(" + ", ".join(_NB_TYPE[k] for _, k in m.params) + ("," if len(m.params) == 1 else "") + ")"


def compile_program(program: Program) -> dict[str, CompiledMethod]:
    """Compile every eligible method; results are cached by generated source."""
    states = eligible_methods(program)
    compiled: dict[str, CompiledMethod] = {}
    keys: dict[str, tuple] = {}

    def build(name):
        if name in compiled:
            return
        m = program.method(name)
        for callee in _callees(m):
            build(callee)
        source = generate_source(program, m, states[name])
        key = (source, _signature(m), tuple((c, keys[c]) for c in _callees(m)))
        keys[name] = key
        with _cache_lock:
            hit = _cache.get(key)
            if hit is None:
                namespace = {"np": np, "JitTrap": JitTrap, "_idiv": _idiv}
                for callee in _callees(m):
                    namespace[f"m_{callee}"] = compiled[callee].fn
                exec(compile(source, f"<pal:{name}>", "exec"), namespace)
                fn = numba.njit(_signature(m), nogil=True, error_model="numpy")(namespace[f"m_{name}"])
                hit = CompiledMethod(name, fn, source)
                _cache[key] = hit
        compiled[name] = hit

    for name in states:
        build(name)
    return compiled
