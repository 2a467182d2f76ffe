"""Load-time pipeline: validate, verify, transform for the detected platform."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .il import Diagnostic, Program, has_errors
from .runtime.platform import PlatformInfo
from .transformer import TransformReport, VerificationFailed, transform
from .validate import validate_program
from .verifier import verify_parallel_constraints


@dataclass
class Loaded:
    program: Program
    report: Optional[TransformReport]
    diagnostics: list[Diagnostic] = field(default_factory=list)


def check(program: Program) -> list[Diagnostic]:
    """Structural validation, then (if clean) the @Parallel rules."""
    diags = validate_program(program)
    if has_errors(diags):
        return diags
    return verify_parallel_constraints(program)


def load(program: Program, platform: PlatformInfo, no_transform: bool = False) -> Loaded:
    """Verify and (unless ``no_transform``) transform ``program``.

    Already transformed programs are only checked. Raises VerificationFailed
    on any Error diagnostic.
    """
    diags = validate_program(program) if program.transformed else check(program)
    if has_errors(diags):
        raise VerificationFailed(diags)
    if no_transform or program.transformed:
        return Loaded(program, None, diags)
    out, report = transform(program, platform)
    return Loaded(out, report, diags)
