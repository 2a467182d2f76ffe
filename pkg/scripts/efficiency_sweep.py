"""Mandelbrot speedup and efficiency over resolution x lines-per-task x parDegree.

Writes one CSV row per cell. Every timed run is checked against the numpy
oracle first, so the 2400x1600 cells spend extra time building the reference.

    python3 scripts/efficiency_sweep.py --par-degree 2,4 --out results/sweep.csv
"""
import argparse
import sys
from pathlib import Path

from pal.bench import SWEEP_LINES, SWEEP_RESOLUTIONS, records_to_csv, run_sweep


def ints(text):
    return [int(x) for x in text.split(",")]


def sizes(text):
    return [tuple(int(v) for v in item.split("x")) for item in text.split(",")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=sizes, default=list(SWEEP_RESOLUTIONS))
    ap.add_argument("--lines", type=ints, default=list(SWEEP_LINES))
    ap.add_argument("--par-degree", type=ints, default=[2, 4])
    ap.add_argument("--cores", type=int, default=None, help="override detected core count")
    ap.add_argument("--max-iter", type=int, default=1000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", type=Path, default=Path("results/sweep.csv"))
    args = ap.parse_args(argv)

    def progress(r):
        c = r.config
        print(f"{c.width}x{c.height} L={c.lines_per_task} pd={c.par_degree}: "
              f"seq {r.t_seq * 1000:.0f} ms, par {r.t_par * 1000:.0f} ms, "
              f"speedup {r.speedup:.2f}, efficiency {r.efficiency:.2f}", file=sys.stderr)

    records = run_sweep(args.resolutions, args.lines, args.par_degree, args.cores,
                        max_iter=args.max_iter, repeats=args.repeats, progress=progress)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(records_to_csv(records))
    print(f"wrote {len(records)} rows to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
