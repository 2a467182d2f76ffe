"""Reference interpreter: executes any valid method, checking kinds at run time."""
from __future__ import annotations

import numpy as np

from ..il import VOID, MethodDef, Op
from .errors import (
    CALL_DEPTH,
    DIVIDE_BY_ZERO,
    OUT_OF_BOUNDS,
    STACK_UNDERFLOW,
    TYPE_MISMATCH,
    Halted,
    Trap,
)
from .futures import FutureRef
from .values import RefArray, fdiv, idiv, kind_of, new_array, wrap, zero_value

MAX_CALL_DEPTH = 200

_H = 1 << 63
_PYTYPE = {"Int": int, "Float": float, "Bool": bool}

(CONST, LOAD, STORE, ADD, SUB, MUL, DIV, NEG, CMP_LT, CMP_EQ, JMP, JZ, CALL, SPAWN,
 TOUCH, NEWARR, ALOAD, ASTORE, ALEN, GETSTATIC, PUTSTATIC, RET, HALT) = range(23)

_CODES = {
    Op.CONST_I: CONST, Op.CONST_F: CONST, Op.LOAD: LOAD, Op.STORE: STORE, Op.ADD: ADD,
    Op.SUB: SUB, Op.MUL: MUL, Op.DIV: DIV, Op.NEG: NEG, Op.CMP_LT: CMP_LT,
    Op.CMP_EQ: CMP_EQ, Op.JMP: JMP, Op.JZ: JZ, Op.CALL: CALL, Op.SPAWN: SPAWN,
    Op.TOUCH: TOUCH, Op.NEWARR: NEWARR, Op.ALOAD: ALOAD, Op.ASTORE: ASTORE,
    Op.ALEN: ALEN, Op.GETSTATIC: GETSTATIC, Op.PUTSTATIC: PUTSTATIC, Op.RET: RET,
    Op.HALT: HALT,
}


def lower(m: MethodDef) -> list[tuple[int, object]]:
    return [(_CODES[ins.op], ins.arg) for ins in m.body]


def _checker(kind):
    """(fast python type or None, full kind) pair used to type-check stores."""
    return _PYTYPE.get(kind.tag), kind


def _fits(v, check) -> bool:
    pytype, kind = check
    if pytype is not None:
        return type(v) is pytype
    return kind_of(v) == kind


def execute(machine, m: MethodDef, args: list, depth: int = 0):
    """Run one activation of ``m`` and return its body value (None for Void)."""
    name = m.name
    if depth > MAX_CALL_DEPTH:
        raise Trap(CALL_DEPTH, name, None, f"call depth above {MAX_CALL_DEPTH}")
    code = machine.lowered(m)
    slots = list(args) + [zero_value(k) for _, k in m.locals]
    checks = [_checker(k) for _, k in m.slots]
    ret_kind = m.body_return_kind
    ret_check = _checker(ret_kind)
    stack: list = []
    push = stack.append
    pop = stack.pop
    pc = 0

    def trap(kind, detail=""):
        return Trap(kind, name, pc, detail)

    try:
        while True:
            op, arg = code[pc]
            if op == LOAD:
                push(slots[arg])
            elif op == CONST:
                push(arg)
            elif op == STORE:
                v = pop()
                if not _fits(v, checks[arg]):
                    raise trap(TYPE_MISMATCH, f"cannot store {kind_of(v)} into {checks[arg][1]} slot")
                slots[arg] = v
            elif op <= DIV:
                b = pop()
                a = pop()
                ta = type(a)
                if ta is not type(b) or (ta is not int and ta is not float):
                    raise trap(TYPE_MISMATCH, f"operands {kind_of(a)} and {kind_of(b)}")
                if op == ADD:
                    r = a + b
                elif op == SUB:
                    r = a - b
                elif op == MUL:
                    r = a * b
                elif ta is int:
                    if b == 0:
                        raise trap(DIVIDE_BY_ZERO)
                    r = idiv(a, b)
                else:
                    r = fdiv(a, b)
                if ta is int and not -_H <= r < _H:
                    r = wrap(r)
                push(r)
            elif op == CMP_LT:
                b = pop()
                a = pop()
                ta = type(a)
                if ta is not type(b) or (ta is not int and ta is not float):
                    raise trap(TYPE_MISMATCH, f"operands {kind_of(a)} and {kind_of(b)}")
                push(a < b)
            elif op == JZ:
                v = pop()
                tv = type(v)
                if tv is not bool and tv is not int:
                    raise trap(TYPE_MISMATCH, f"JZ on {kind_of(v)}")
                if not v:
                    pc = arg
                    continue
            elif op == JMP:
                pc = arg
                continue
            elif op == CMP_EQ:
                b = pop()
                a = pop()
                ta = type(a)
                if ta is not type(b) or ta not in (int, float, bool):
                    raise trap(TYPE_MISMATCH, f"operands {kind_of(a)} and {kind_of(b)}")
                push(a == b)
            elif op == NEG:
                a = pop()
                ta = type(a)
                if ta is int:
                    push(wrap(-a))
                elif ta is float:
                    push(-a)
                else:
                    raise trap(TYPE_MISMATCH, f"NEG on {kind_of(a)}")
            elif op == ALOAD:
                i = pop()
                a = pop()
                if type(i) is not int:
                    raise trap(TYPE_MISMATCH, f"array index of kind {kind_of(i)}")
                ta = type(a)
                if ta is np.ndarray:
                    if not 0 <= i < a.shape[0]:
                        raise trap(OUT_OF_BOUNDS, f"index {i} of length {a.shape[0]}")
                    push(a.item(i))
                elif ta is RefArray:
                    if not 0 <= i < len(a.items):
                        raise trap(OUT_OF_BOUNDS, f"index {i} of length {len(a.items)}")
                    push(a.items[i])
                else:
                    raise trap(TYPE_MISMATCH, f"ALOAD on {kind_of(a)}")
            elif op == ASTORE:
                v = pop()
                i = pop()
                a = pop()
                if type(i) is not int:
                    raise trap(TYPE_MISMATCH, f"array index of kind {kind_of(i)}")
                ka = kind_of(a)
                if ka is None or not ka.is_array:
                    raise trap(TYPE_MISMATCH, f"ASTORE on {ka}")
                if not _fits(v, _checker(ka.elem)):
                    raise trap(TYPE_MISMATCH, f"cannot store {kind_of(v)} into {ka}")
                n = len(a)
                if not 0 <= i < n:
                    raise trap(OUT_OF_BOUNDS, f"index {i} of length {n}")
                if type(a) is RefArray:
                    a.items[i] = v
                else:
                    a[i] = v
            elif op == ALEN:
                a = pop()
                if type(a) is not np.ndarray and type(a) is not RefArray:
                    raise trap(TYPE_MISMATCH, f"ALEN on {kind_of(a)}")
                push(len(a))
            elif op == NEWARR:
                n = pop()
                if type(n) is not int:
                    raise trap(TYPE_MISMATCH, f"array length of kind {kind_of(n)}")
                if n < 0:
                    raise trap(OUT_OF_BOUNDS, f"negative array length {n}")
                push(new_array(arg, n))
            elif op == CALL or op == SPAWN:
                callee = machine.program.method(arg)
                k = len(callee.params)
                if len(stack) < k:
                    raise trap(STACK_UNDERFLOW, f"{arg} needs {k} arguments")
                if k:
                    call_args = stack[-k:]
                    del stack[-k:]
                else:
                    call_args = []
                for v, (pname, pkind) in zip(call_args, callee.params):
                    if not _fits(v, _checker(pkind)):
                        raise trap(TYPE_MISMATCH, f"argument {pname!r} of {arg} expects {pkind}, got {kind_of(v)}")
                if op == SPAWN:
                    push(machine.spawn(callee, call_args, (name, pc)))
                else:
                    r = machine.call(callee, call_args, depth + 1, (name, pc))
                    if callee.return_kind != VOID:
                        push(r)
            elif op == TOUCH:
                f = pop()
                if type(f) is not FutureRef:
                    raise trap(TYPE_MISMATCH, f"TOUCH on {kind_of(f)}")
                push(machine.touch(f))
            elif op == GETSTATIC:
                push(machine.globals[arg])
            elif op == PUTSTATIC:
                v = pop()
                if kind_of(v) != machine.program.global_kinds[arg]:
                    raise trap(TYPE_MISMATCH, f"cannot store {kind_of(v)} into global {arg}")
                machine.globals[arg] = v
            elif op == RET:
                if ret_kind == VOID:
                    return None
                v = pop()
                if not _fits(v, ret_check):
                    raise trap(TYPE_MISMATCH, f"returning {kind_of(v)} from method declared {ret_kind}")
                return v
            elif op == HALT:
                raise Halted()
            pc += 1
    except IndexError:
        raise Trap(STACK_UNDERFLOW, name, pc) from None
