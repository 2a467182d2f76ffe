"""Cost of the annotation when a method runs inline, plus load-time rewrite cost.

Compares the untransformed program with the transformed one at parDegree=1
(calls stay sequential) and times the transformer alone on the same input.

    python3 scripts/inline_overhead.py --width 600 --height 400 --repeats 5
"""
import argparse
import time

from pal import PlatformInfo, detect_platform, parse_assembly, transform
from pal.bench import MandelbrotConfig, gen_mandelbrot_program, measure


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=600)
    ap.add_argument("--height", type=int, default=400)
    ap.add_argument("--lines", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)

    platform = detect_platform()
    cfg = MandelbrotConfig(args.width, args.height, args.lines, 1)
    r = measure(cfg, platform, repeats=args.repeats)
    print(f"{args.width}x{args.height} parDegree 1 on {platform.cores} cores: "
          f"untransformed {r.t_seq * 1000:.1f} ms, transformed {r.t_par * 1000:.1f} ms, "
          f"ratio {r.t_par / r.t_seq:.3f}")

    program = parse_assembly(gen_mandelbrot_program(MandelbrotConfig(args.width, args.height, args.lines, 4)))
    for cores in (1, 2, 4, 8):
        t0 = time.perf_counter()
        _, report = transform(program, PlatformInfo(cores, "Overridden"))
        ms = (time.perf_counter() - t0) * 1000
        print(f"transform at {cores} cores: {ms:.3f} ms, {len(report.rewritten_sites)} call site(s) rewritten")


if __name__ == "__main__":
    main()
