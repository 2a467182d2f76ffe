"""Annotation-driven parallelization of a small stack IL.

Methods marked ``@Parallel(parDegree=N)`` are rewritten at load time so that
their call sites spawn tasks returning futures; touching a future blocks only
until the value exists.
"""
from .asm import (
    AssemblyError,
    AssemblySyntaxError,
    ResolutionError,
    RestrictedOpcode,
    emit_assembly,
    parse_assembly,
)
from .il import (
    BOOL,
    FLOAT,
    INT,
    VOID,
    ArrayOf,
    Diagnostic,
    FutureOf,
    Instruction,
    Kind,
    MethodDef,
    Op,
    ParallelAnnotation,
    Program,
    Severity,
)
from .loader import check, load
from .runtime import ExecutionStats, FutureRef, Machine, PlatformInfo, RuntimeConfig, Trap, detect_platform, run
from .transformer import (
    AlreadyTransformed,
    Inline,
    Threaded,
    TransformReport,
    VerificationFailed,
    decide_mode,
    transform,
)
from .validate import validate_program
from .verifier import verify_parallel_constraints

__version__ = "0.1.0"
