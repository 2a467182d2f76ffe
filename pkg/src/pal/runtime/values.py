"""Runtime value representation.

Int, Float and Bool are plain Python ``int``/``float``/``bool``. Arrays of
scalars are 1-d numpy arrays (so compiled methods can share them); arrays of
arrays or futures are :class:`RefArray`.
"""
from __future__ import annotations

import struct

import numpy as np

from ..il import BOOL, FLOAT, INT, ArrayOf, FutureOf, Kind

_MOD = 1 << 64
_HALF = 1 << 63

DTYPES = {"Int": np.int64, "Float": np.float64, "Bool": np.bool_}
_DTYPE_KIND = {np.dtype(np.int64): INT, np.dtype(np.float64): FLOAT, np.dtype(np.bool_): BOOL}


def wrap(v: int) -> int:
    """Two's-complement wrap of an arbitrary int into int64."""
    if -_HALF <= v < _HALF:
        return v
    return ((v + _HALF) % _MOD) - _HALF


def idiv(a: int, b: int) -> int:
    """Int division truncating toward zero; caller rules out b == 0."""
    q = abs(a) // abs(b)
    if (a < 0) != (b < 0):
        q = -q
    return wrap(q)


def fdiv(a: float, b: float) -> float:
    if b != 0.0:
        return a / b
    with np.errstate(all="ignore"):
        return float(np.float64(a) / np.float64(b))


class RefArray:
    """Array whose elements are arrays or futures. Unset slots hold None."""

    __slots__ = ("elem", "items")

    def __init__(self, elem: Kind, items: list):
        self.elem = elem
        self.items = items

    def __len__(self) -> int:
        return len(self.items)

    def __repr__(self) -> str:
        return f"RefArray({self.elem}, {self.items!r})"


def new_array(elem: Kind, n: int):
    dtype = DTYPES.get(elem.tag)
    if dtype is not None:
        return np.zeros(n, dtype=dtype)
    return RefArray(elem, [None] * n)


def zero_value(kind: Kind):
    if kind.tag == "Int":
        return 0
    if kind.tag == "Float":
        return 0.0
    if kind.tag == "Bool":
        return False
    if kind.is_array:
        return new_array(kind.elem, 0)
    return None


def kind_of(v):
    """Kind of a runtime value, or None for values outside the IL (e.g. unset slots)."""
    t = type(v)
    if t is int:
        return INT
    if t is float:
        return FLOAT
    if t is bool:
        return BOOL
    if t is np.ndarray:
        return ArrayOf(_DTYPE_KIND[v.dtype])
    if t is RefArray:
        return ArrayOf(v.elem)
    kind = getattr(v, "kind", None)
    return kind if isinstance(kind, Kind) else None


def deep_copy(v):
    """Copy for task arguments. Futures must not be passed to tasks."""
    t = type(v)
    if t is np.ndarray:
        return v.copy()
    if t is RefArray:
        return RefArray(v.elem, [None if x is None else deep_copy(x) for x in v.items])
    if t in (int, float, bool):
        return v
    raise TypeError(f"cannot pass {kind_of(v) or type(v).__name__} to a task")


def freeze(v):
    """Hashable, bit-exact canonical form of a value (floats by their bits)."""
    t = type(v)
    if t is float:
        return ("F", struct.pack("<d", v))
    if t is bool:
        return ("B", v)
    if t is int:
        return ("I", v)
    if t is np.ndarray:
        if v.dtype == np.float64:
            return ("AF", v.tobytes())
        return ("A" + str(v.dtype), tuple(v.tolist()))
    if t is RefArray:
        return ("R", str(v.elem), tuple(freeze(x) for x in v.items))
    if v is None:
        return None
    # futures: compare by their (filled) content
    if hasattr(v, "peek"):
        return ("Fut",) + (freeze(v.peek()),)
    raise TypeError(f"cannot freeze {v!r}")


def format_value(v) -> str:
    t = type(v)
    if t is bool:
        return "true" if v else "false"
    if t is float:
        return repr(v)
    if t is int:
        return str(v)
    if t is np.ndarray:
        return "[" + ", ".join(format_value(x) for x in v.tolist()) + "]"
    if t is RefArray:
        return "[" + ", ".join("null" if x is None else format_value(x) for x in v.items) + "]"
    if v is None:
        return ""
    return "<future>"
