"""Mandelbrot workload: IL program generator and a native numpy oracle.

Both sides map pixels the same way and perform the same float64 operations
in the same order, so iteration counts agree bit for bit:

    c.re = re_min + (re_span * x) / (width - 1)
    z.im' = (2 * z.re) * z.im + c.im
    z.re' = (z.re^2 - z.im^2) + c.re

and a pixel escapes at the first iteration where ``4 < |z|^2``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_VIEWPORT = (-2.5, 1.0, -1.0, 1.0)


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class MandelbrotConfig:
    width: int
    height: int
    lines_per_task: int
    par_degree: int
    max_iter: int = 1000
    viewport: tuple[float, float, float, float] = DEFAULT_VIEWPORT

    def __post_init__(self):
        for name in ("width", "height", "lines_per_task", "par_degree", "max_iter"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {value!r}")
        if self.lines_per_task > self.height:
            raise InvalidConfig(f"lines_per_task {self.lines_per_task} exceeds height {self.height}")
        if len(self.viewport) != 4:
            raise InvalidConfig("viewport is (re_min, re_max, im_min, im_max)")

    @property
    def n_tasks(self) -> int:
        return math.ceil(self.height / self.lines_per_task)

    @property
    def resolution(self) -> str:
        return f"{self.width}x{self.height}"

    def mapping(self) -> tuple[float, float, float, float, float, float]:
        """(re_min, re_span, re_den, im_min, im_span, im_den) for the pixel mapping."""
        re_min, re_max, im_min, im_max = (float(v) for v in self.viewport)
        re_den = float(self.width - 1) if self.width > 1 else 1.0
        im_den = float(self.height - 1) if self.height > 1 else 1.0
        return re_min, re_max - re_min, re_den, im_min, im_max - im_min, im_den


def _f(x: float) -> str:
    return repr(float(x))


def gen_mandelbrot_program(config: MandelbrotConfig) -> str:
    """Assembly source for the row-block Mandelbrot renderer."""
    w, h, lines = config.width, config.height, config.lines_per_task
    re_min, re_span, re_den, im_min, im_span, im_den = config.mapping()
    return f"""\
// Mandelbrot {w}x{h}, {lines} lines per task, max_iter {config.max_iter}
program mandelbrot;
entry main;

@Parallel(parDegree={config.par_degree})
method createLines(start_line: Int, line_count: Int) -> FutureOf(ArrayOf(Int)) {{
    local out: ArrayOf(Int);
    local yf: Float;
    local i: Int;
    local row: Int;
    local base: Int;
    local x: Int;
    local xf: Float;
    local cr: Float;
    local ci: Float;
    local zr: Float;
    local zi: Float;
    local zr2: Float;
    local zi2: Float;
    local it: Int;
    LOAD line_count; CONST_I {w}; MUL; NEWARR Int; STORE out;
    // the IL has no int->float conversion: count up to start_line
    CONST_F 0.0; STORE yf; CONST_I 0; STORE i;
yconv:
    LOAD i; LOAD start_line; CMP_LT; JZ rows;
    LOAD yf; CONST_F 1.0; ADD; STORE yf;
    LOAD i; CONST_I 1; ADD; STORE i;
    JMP yconv;
rows:
    CONST_I 0; STORE row;
rowloop:
    LOAD row; LOAD line_count; CMP_LT; JZ done;
    CONST_F {_f(im_min)}; CONST_F {_f(im_span)}; LOAD yf; MUL; CONST_F {_f(im_den)}; DIV; ADD; STORE ci;
    LOAD row; CONST_I {w}; MUL; STORE base;
    CONST_I 0; STORE x; CONST_F 0.0; STORE xf;
colloop:
    LOAD x; CONST_I {w}; CMP_LT; JZ nextrow;
    CONST_F {_f(re_min)}; CONST_F {_f(re_span)}; LOAD xf; MUL; CONST_F {_f(re_den)}; DIV; ADD; STORE cr;
    CONST_F 0.0; STORE zr; CONST_F 0.0; STORE zi; CONST_I 0; STORE it;
iter:
    LOAD it; CONST_I {config.max_iter}; CMP_LT; JZ store;
    LOAD zr; LOAD zr; MUL; STORE zr2;
    LOAD zi; LOAD zi; MUL; STORE zi2;
    CONST_F 4.0; LOAD zr2; LOAD zi2; ADD; CMP_LT; JZ step;
    JMP store;
step:
    CONST_F 2.0; LOAD zr; MUL; LOAD zi; MUL; LOAD ci; ADD; STORE zi;
    LOAD zr2; LOAD zi2; SUB; LOAD cr; ADD; STORE zr;
    LOAD it; CONST_I 1; ADD; STORE it;
    JMP iter;
store:
    LOAD out; LOAD base; LOAD x; ADD; LOAD it; ASTORE;
    LOAD x; CONST_I 1; ADD; STORE x;
    LOAD xf; CONST_F 1.0; ADD; STORE xf;
    JMP colloop;
nextrow:
    LOAD row; CONST_I 1; ADD; STORE row;
    LOAD yf; CONST_F 1.0; ADD; STORE yf;
    JMP rowloop;
done:
    LOAD out; RET
}}

method blit(dst: ArrayOf(Int), src: ArrayOf(Int), offset: Int) -> Void {{
    local i: Int;
    local n: Int;
    LOAD src; ALEN; STORE n; CONST_I 0; STORE i;
loop:
    LOAD i; LOAD n; CMP_LT; JZ done;
    LOAD dst; LOAD offset; LOAD i; ADD; LOAD src; LOAD i; ALOAD; ASTORE;
    LOAD i; CONST_I 1; ADD; STORE i;
    JMP loop;
done:
    RET
}}

method main() -> ArrayOf(Int) {{
    local futures: ArrayOf(FutureOf(ArrayOf(Int)));
    local image: ArrayOf(Int);
    local b: Int;
    local start: Int;
    local count: Int;
    CONST_I {config.n_tasks}; NEWARR FutureOf(ArrayOf(Int)); STORE futures;
    CONST_I 0; STORE b; CONST_I 0; STORE start;
issue:
    LOAD b; CONST_I {config.n_tasks}; CMP_LT; JZ gather;
    CONST_I {lines}; STORE count;
    CONST_I {h}; LOAD start; SUB; CONST_I {lines}; CMP_LT; JZ call;
    CONST_I {h}; LOAD start; SUB; STORE count;
call:
    LOAD futures; LOAD b; LOAD start; LOAD count; CALL createLines; ASTORE;
    LOAD start; CONST_I {lines}; ADD; STORE start;
    LOAD b; CONST_I 1; ADD; STORE b;
    JMP issue;
gather:
    CONST_I {w * h}; NEWARR Int; STORE image;
    CONST_I 0; STORE b; CONST_I 0; STORE start;
collect:
    LOAD b; CONST_I {config.n_tasks}; CMP_LT; JZ done;
    LOAD image; LOAD futures; LOAD b; ALOAD; TOUCH; LOAD start; CONST_I {w}; MUL; CALL blit;
    LOAD start; CONST_I {lines}; ADD; STORE start;
    LOAD b; CONST_I 1; ADD; STORE b;
    JMP collect;
done:
    LOAD image; RET
}}
"""


def escape_time(c_re: float, c_im: float, max_iter: int) -> int:
    """Scalar escape-time count for one point."""
    zr = zi = 0.0
    for it in range(max_iter):
        zr2, zi2 = zr * zr, zi * zi
        if 4.0 < zr2 + zi2:
            return it
        zi = 2.0 * zr * zi + c_im
        zr = zr2 - zi2 + c_re
    return max_iter


def pixel_coords(config: MandelbrotConfig) -> tuple[np.ndarray, np.ndarray]:
    re_min, re_span, re_den, im_min, im_span, im_den = config.mapping()
    re = re_min + (re_span * np.arange(config.width, dtype=np.float64)) / re_den
    im = im_min + (im_span * np.arange(config.height, dtype=np.float64)) / im_den
    return re, im


def mandelbrot_reference(config: MandelbrotConfig) -> np.ndarray:
    """Iteration counts, shape (height, width), computed natively with numpy."""
    return _reference(config.width, config.height, config.max_iter, tuple(config.viewport)).copy()


@functools.lru_cache(maxsize=8)
def _reference(width, height, max_iter, viewport) -> np.ndarray:
    config = MandelbrotConfig(width, height, 1, 1, max_iter, viewport)
    re, im = pixel_coords(config)
    c_re = np.broadcast_to(re, (height, width)).ravel()
    c_im = np.broadcast_to(im[:, None], (height, width)).ravel()
    counts = np.full(c_re.size, max_iter, dtype=np.int64)
    idx = np.arange(c_re.size)
    zr = np.zeros(c_re.size)
    zi = np.zeros(c_re.size)
    for it in range(max_iter):
        zr2 = zr * zr
        zi2 = zi * zi
        escaped = 4.0 < zr2 + zi2
        if escaped.any():
            counts[idx[escaped]] = it
            keep = ~escaped
            idx, zr, zi, zr2, zi2, c_re, c_im = (a[keep] for a in (idx, zr, zi, zr2, zi2, c_re, c_im))
            if idx.size == 0:
                break
        zi = (2.0 * zr) * zi + c_im
        zr = (zr2 - zi2) + c_re
    counts.flags.writeable = False
    return counts.reshape(height, width)


def write_pgm(path, counts: np.ndarray, maxval: int) -> None:
    """Plain (P2) greymap of iteration counts."""
    h, w = counts.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in counts:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")
