"""``pal`` command line: run, verify, transform, bench."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .asm import AssemblyError, emit_assembly, parse_assembly
from .il import has_errors
from .loader import check, load
from .runtime.errors import DeadlockDetected, PoolShutdown, Trap
from .runtime.machine import ENGINES, Machine, RuntimeConfig
from .runtime.platform import detect_platform
from .runtime.values import format_value
from .transformer import VerificationFailed, transform
from .validate import validate_program

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _int_list(text: str) -> list[int]:
    return [_positive(part) for part in text.split(",") if part.strip()]


def _resolutions(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        w, sep, h = part.strip().lower().partition("x")
        if not sep:
            raise argparse.ArgumentTypeError(f"resolution must look like WxH, got {part!r}")
        out.append((_positive(w), _positive(h)))
    return out


def resolve_cores(flag: Optional[int]) -> Optional[int]:
    """--cores wins over PAL_CORES; None means detect."""
    if flag is not None:
        return flag
    env = os.environ.get("PAL_CORES")
    if env is None or not env.strip():
        return None
    try:
        return _positive(env.strip())
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"PAL_CORES: {exc}")


def _err(*parts) -> None:
    print(*parts, file=sys.stderr)


def _read_program(path: str, trusted: bool):
    data = Path(path).read_bytes()
    return parse_assembly(data, trusted=trusted, name=Path(path).stem.replace("-", "_") or "main")


def _print_diags(diags) -> None:
    for d in diags:
        _err(d)


def cmd_run(args) -> int:
    config = RuntimeConfig(resolve_cores(args.cores), args.no_transform, args.stats_json, args.engine)
    program = _read_program(args.file, args.trusted)
    platform = detect_platform(config.cores_override)
    try:
        loaded = load(program, platform, no_transform=config.no_transform)
    except VerificationFailed as exc:
        _print_diags(exc.diagnostics)
        return EXIT_FAIL
    _print_diags(loaded.diagnostics)
    machine = Machine(loaded.program, platform, config.engine)
    try:
        value = machine.run()
    except (Trap, DeadlockDetected, PoolShutdown) as exc:
        _err(f"error: {exc}")
        return EXIT_FAIL
    finally:
        if config.stats_path:
            machine.stats.write_json(config.stats_path)
    text = format_value(value)
    if text:
        print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    program = _read_program(args.file, args.trusted)
    diags = validate_program(program) if program.transformed else check(program)
    _print_diags(diags)
    return EXIT_FAIL if has_errors(diags) else EXIT_OK


def cmd_transform(args) -> int:
    program = _read_program(args.file, False)
    platform = detect_platform(resolve_cores(args.cores))
    try:
        out, report = transform(program, platform)
    except VerificationFailed as exc:
        _print_diags(exc.diagnostics)
        return EXIT_FAIL
    Path(args.output).write_text(emit_assembly(out), encoding="utf-8")
    print(f"platform: {platform.cores} cores ({platform.source})")
    print(report.table())
    if args.report_json:
        with open(args.report_json, "w") as fh:
            json.dump(report.to_json(), fh, indent=2)
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ValidationFailed, records_to_csv, run_sweep
    from .bench.mandelbrot import MandelbrotConfig, mandelbrot_reference, write_pgm

    cores = resolve_cores(args.cores)
    par_degrees = args.par_degree or [detect_platform(cores).cores]

    def progress(r):
        c = r.config
        _err(f"{c.resolution} lines={c.lines_per_task} parDegree={c.par_degree} cores={r.cores} "
             f"t_seq={r.t_seq * 1000:.1f}ms t_par={r.t_par * 1000:.1f}ms "
             f"speedup={r.speedup:.3f} efficiency={r.efficiency:.3f}")

    try:
        records = run_sweep(args.resolutions, args.lines, par_degrees, cores,
                            max_iter=args.max_iter, repeats=args.repeats, engine=args.engine,
                            progress=progress)
    except ValidationFailed as exc:
        _err(f"error: {exc}")
        return EXIT_FAIL
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            records_to_csv(records, fh)
    else:
        sys.stdout.write(records_to_csv(records))
    if args.pgm:
        out_dir = Path(args.pgm)
        out_dir.mkdir(parents=True, exist_ok=True)
        for w, h in args.resolutions:
            counts = mandelbrot_reference(MandelbrotConfig(w, h, 1, 1, args.max_iter))
            write_pgm(out_dir / f"mandelbrot_{w}x{h}.pgm", counts, args.max_iter)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pal", description="Annotation-driven parallel IL toolchain.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("run", help="verify, transform and execute a .pal program")
    p.add_argument("file")
    p.add_argument("--cores", type=_positive, help="override detected processor count")
    p.add_argument("--no-transform", action="store_true", help="ignore annotations; run sequentially")
    p.add_argument("--stats-json", metavar="PATH", help="write execution statistics as JSON")
    p.add_argument("--trusted", action="store_true", help="accept #transformed input")
    p.add_argument("--engine", choices=ENGINES, default="auto",
                   help="auto compiles eligible methods; interp interprets everything")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="check @Parallel constraints")
    p.add_argument("file")
    p.add_argument("--trusted", action="store_true", help="accept #transformed input")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="rewrite @Parallel call sites for this platform")
    p.add_argument("file")
    p.add_argument("-o", "--output", required=True, metavar="OUT")
    p.add_argument("--cores", type=_positive, help="override detected processor count")
    p.add_argument("--report-json", metavar="PATH")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("bench", help="benchmarks")
    bench_sub = p.add_subparsers(dest="benchmark", metavar="BENCHMARK")
    bench_sub.required = True
    b = bench_sub.add_parser("mandelbrot", help="resolution x granularity efficiency sweep")
    b.add_argument("--resolutions", type=_resolutions, default=[(600, 400), (1200, 800), (2400, 1600)],
                   help="comma-separated WxH list (default: 600x400,1200x800,2400x1600)")
    b.add_argument("--lines", type=_int_list, default=[5, 10, 20, 40], help="lines per task (default: 5,10,20,40)")
    b.add_argument("--par-degree", type=_int_list, help="parDegree values (default: detected cores)")
    b.add_argument("--cores", type=_positive, help="override detected processor count")
    b.add_argument("--csv", metavar="PATH", help="write CSV here instead of standard output")
    b.add_argument("--pgm", metavar="DIR", help="dump oracle images as plain PGM")
    b.add_argument("--max-iter", type=_positive, default=1000)
    b.add_argument("--repeats", type=_positive, default=3, help="timing repetitions; the median is kept")
    b.add_argument("--engine", choices=ENGINES, default="auto")
    b.set_defaults(func=cmd_bench)
    return parser


def dispatch(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _err(f"pal: error: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(f"pal: error: {exc}")
        return EXIT_USAGE
    except AssemblyError as exc:
        _print_diags(exc.diagnostics)
        return EXIT_FAIL


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
