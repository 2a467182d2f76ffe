import struct
from dataclasses import astuple

import pytest
from hypothesis import HealthCheck, settings

from pal import PlatformInfo, load, parse_assembly
from pal.runtime.machine import Machine
from pal.runtime.values import freeze

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def run_source(source, cores=1, no_transform=False, engine="interp", trusted=False):
    """Parse, load and execute. Returns (value, machine)."""
    program = parse_assembly(source, trusted=trusted)
    platform = PlatformInfo(cores, "Overridden")
    loaded = load(program, platform, no_transform=no_transform)
    machine = Machine(loaded.program, platform, engine)
    return machine.run(), machine


def outcome(value, machine):
    """Bit-exact observable result: the return value and every global."""
    return freeze(value), tuple((g, freeze(v)) for g, v in sorted(machine.globals.items()))


def _canon(x):
    if isinstance(x, float):
        return ("f", struct.pack("<d", x))
    if isinstance(x, tuple):
        return tuple(_canon(y) for y in x)
    if isinstance(x, list):
        return tuple(_canon(y) for y in x)
    return x


def structure(program):
    """Structural identity of a program with floats compared by bits (NaN == NaN)."""
    return _canon(astuple(program))


@pytest.fixture
def platform4():
    return PlatformInfo(4, "Overridden")


# one line per acceptance criterion, shown at the end of every run
ACCEPTANCE: dict = {}


def report_criterion(number, status, detail):
    line = f"criterion {number}: {status} - {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
