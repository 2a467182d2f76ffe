"""Resolution x granularity x parDegree sweep producing efficiency records."""
from __future__ import annotations

import csv
import io
import statistics
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..asm import parse_assembly
from ..loader import load
from ..runtime.machine import Machine
from ..runtime.platform import PlatformInfo, detect_platform
from .mandelbrot import MandelbrotConfig, gen_mandelbrot_program, mandelbrot_reference

SWEEP_RESOLUTIONS = ((600, 400), (1200, 800), (2400, 1600))
SWEEP_LINES = (5, 10, 20, 40)
CSV_HEADER = ["width", "height", "lines_per_task", "par_degree", "cores",
              "t_seq_ms", "t_par_ms", "speedup", "efficiency"]


class ValidationFailed(RuntimeError):
    pass


class InsufficientCores(UserWarning):
    pass


@dataclass
class EfficiencyRecord:
    config: MandelbrotConfig
    cores: int
    t_seq: float  # seconds
    t_par: float
    speedup: float
    efficiency: float
    tasks_spawned: int = 0
    insufficient_cores: bool = False

    def csv_row(self) -> list:
        c = self.config
        return [c.width, c.height, c.lines_per_task, c.par_degree, self.cores,
                f"{self.t_seq * 1000:.3f}", f"{self.t_par * 1000:.3f}",
                f"{self.speedup:.4f}", f"{self.efficiency:.4f}"]


def compute_efficiency(t_seq: float, t_par: float, p: int) -> tuple[float, float]:
    """(speedup, efficiency) with speedup = t_seq / t_par and efficiency = speedup / p."""
    if not t_seq > 0 or not t_par > 0:
        raise ValueError(f"timings must be positive, got t_seq={t_seq}, t_par={t_par}")
    if p < 1:
        raise ValueError(f"processing element count must be >= 1, got {p}")
    speedup = t_seq / t_par
    return speedup, speedup / p


def timed_run(program, platform: PlatformInfo, engine: str = "auto"):
    """Run once; returns (value, stats). Compilation happens before the clock starts."""
    machine = Machine(program, platform, engine)
    value = machine.run()
    return value, machine.stats


def _check(value, expected: np.ndarray, what: str) -> None:
    if not isinstance(value, np.ndarray) or not np.array_equal(value, expected):
        raise ValidationFailed(f"{what}: pixel buffer differs from the native oracle")


def measure(config: MandelbrotConfig, platform: PlatformInfo, repeats: int = 3,
            engine: str = "auto") -> EfficiencyRecord:
    """Median-of-``repeats`` sequential and transformed timings for one cell."""
    expected = mandelbrot_reference(config).ravel()
    program = parse_assembly(gen_mandelbrot_program(config))
    seq = load(program, platform, no_transform=True).program
    par = load(program, platform).program
    t_seq, t_par, tasks = [], [], set()
    for _ in range(repeats):
        value, stats = timed_run(seq, platform, engine)
        _check(value, expected, f"sequential {config}")
        t_seq.append(stats.wall_time)
        value, stats = timed_run(par, platform, engine)
        _check(value, expected, f"transformed {config}")
        t_par.append(stats.wall_time)
        tasks.add(stats.tasks_spawned)
    p = min(config.par_degree, platform.cores)
    ts, tp = statistics.median(t_seq), statistics.median(t_par)
    speedup, efficiency = compute_efficiency(ts, tp, p)
    return EfficiencyRecord(config, platform.cores, ts, tp, speedup, efficiency,
                            tasks_spawned=max(tasks), insufficient_cores=platform.cores < config.par_degree)


def run_sweep(resolutions: Iterable[tuple[int, int]] = SWEEP_RESOLUTIONS,
              lines_per_task_values: Sequence[int] = SWEEP_LINES,
              par_degrees: Sequence[int] = (2,),
              cores: Optional[int] = None,
              *, max_iter: int = 1000, repeats: int = 3, engine: str = "auto",
              progress=None) -> list[EfficiencyRecord]:
    """Every (resolution, lines_per_task, parDegree) cell, in that nesting order.

    Each timed run's output is checked against the oracle first; a mismatch
    aborts the sweep with ValidationFailed.
    """
    platform = detect_platform(cores)
    records = []
    for width, height in resolutions:
        for lines in lines_per_task_values:
            for pd in par_degrees:
                config = MandelbrotConfig(width, height, lines, pd, max_iter)
                if platform.cores < pd:
                    warnings.warn(f"{platform.cores} cores < parDegree {pd}: pool capped at {platform.cores}",
                                  InsufficientCores, stacklevel=2)
                record = measure(config, platform, repeats, engine)
                records.append(record)
                if progress is not None:
                    progress(record)
    return records


def records_to_csv(records: Iterable[EfficiencyRecord], fh=None) -> str:
    out = fh or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(r.csv_row())
    return out.getvalue() if fh is None else ""
