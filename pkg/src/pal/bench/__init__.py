from .mandelbrot import (
    InvalidConfig,
    MandelbrotConfig,
    escape_time,
    gen_mandelbrot_program,
    mandelbrot_reference,
    write_pgm,
)
from .sweep import (
    CSV_HEADER,
    SWEEP_LINES,
    SWEEP_RESOLUTIONS,
    EfficiencyRecord,
    InsufficientCores,
    ValidationFailed,
    compute_efficiency,
    measure,
    records_to_csv,
    run_sweep,
    timed_run,
)
