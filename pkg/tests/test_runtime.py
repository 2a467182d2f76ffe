import json
import math
import os
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pal import PlatformInfo, RuntimeConfig, detect_platform, load, parse_assembly, run
from pal.il import INT64_MAX, INT64_MIN
from pal.runtime.errors import DeadlockDetected, TaskTrapped, Trap
from pal.runtime.futures import FutureRef
from pal.runtime.machine import Machine

from conftest import outcome, run_source
from progen import GenConfig, generate_program, stress_program

CORPUS = Path(__file__).parent / "corpus" / "verifier"


# -- platform

def test_override():
    assert detect_platform(4) == PlatformInfo(4, "Overridden")


@pytest.mark.parametrize("bad", [0, -1])
def test_override_must_be_positive(bad):
    with pytest.raises(ValueError):
        detect_platform(bad)


def test_detection_matches_host():
    p = detect_platform()
    assert p.source == "Detected"
    assert p.cores == len(os.sched_getaffinity(0))
    assert 1 <= p.cores <= (os.cpu_count() or p.cores)


def test_detection_failure_falls_back(monkeypatch, caplog):
    import pal.runtime.platform as platform_mod
    monkeypatch.setattr(platform_mod, "_visible_cpus", lambda: None)
    assert detect_platform() == PlatformInfo(1, "Detected")
    assert "assuming 1 core" in caplog.text


def test_runtime_config_rejects_zero_cores():
    with pytest.raises(ValueError):
        RuntimeConfig(cores_override=0)


# -- execution

def test_trivial_run():
    value, stats = run(parse_assembly("method main() -> Int { CONST_I 0; RET }"))
    assert value == 0 and stats.tasks_spawned == 0


def test_halt_yields_no_value():
    value, _ = run_source("method main() -> Int { CONST_I 1; HALT }")
    assert value is None


ARITH = f"""
method main() -> ArrayOf(Int) {{
    local out: ArrayOf(Int);
    CONST_I 8; NEWARR Int; STORE out;
    LOAD out; CONST_I 0; CONST_I {INT64_MAX}; CONST_I 1; ADD; ASTORE;
    LOAD out; CONST_I 1; CONST_I {INT64_MIN}; CONST_I -1; DIV; ASTORE;
    LOAD out; CONST_I 2; CONST_I -7; CONST_I 2; DIV; ASTORE;
    LOAD out; CONST_I 3; CONST_I 7; CONST_I -2; DIV; ASTORE;
    LOAD out; CONST_I 4; CONST_I {INT64_MIN}; NEG; ASTORE;
    LOAD out; CONST_I 5; CONST_I 4294967296; CONST_I 4294967296; MUL; ASTORE;
    LOAD out; CONST_I 6; CONST_I {INT64_MIN}; CONST_I 1; SUB; ASTORE;
    LOAD out; CONST_I 7; CONST_I -7; CONST_I -2; DIV; ASTORE;
    LOAD out; RET
}}
"""
ARITH_EXPECTED = [INT64_MIN, INT64_MIN, -3, -3, INT64_MIN, 0, INT64_MAX, 3]

FDIV = """
method main() -> ArrayOf(Float) {
    local out: ArrayOf(Float);
    CONST_I 4; NEWARR Float; STORE out;
    LOAD out; CONST_I 0; CONST_F 1.0; CONST_F 0.0; DIV; ASTORE;
    LOAD out; CONST_I 1; CONST_F -1.0; CONST_F 0.0; DIV; ASTORE;
    LOAD out; CONST_I 2; CONST_F 0.0; CONST_F 0.0; DIV; ASTORE;
    LOAD out; CONST_I 3; CONST_F 1.0; CONST_F -0.0; DIV; ASTORE;
    LOAD out; RET
}
"""


@pytest.mark.parametrize("engine", ["interp", "auto"])
def test_int64_semantics(engine):
    value, machine = run_source(ARITH, engine=engine)
    assert value.tolist() == ARITH_EXPECTED
    assert ("main" in machine.compiled) == (engine == "auto")


@pytest.mark.parametrize("engine", ["interp", "auto"])
def test_float_division_is_ieee(engine):
    value, _ = run_source(FDIV, engine=engine)
    a, b, c, d = value.tolist()
    assert a == math.inf and b == -math.inf and math.isnan(c) and d == -math.inf


TRAPS = {
    "DivideByZero": "method f(x: Int) -> Int { CONST_I 1; LOAD x; DIV; RET }\n"
                    "method main() -> Int { CONST_I 0; CALL f; RET }",
    "OutOfBoundsArray": "method f(n: Int) -> Int { LOAD n; NEWARR Int; LOAD n; ALOAD; RET }\n"
                        "method main() -> Int { CONST_I 3; CALL f; RET }",
    "TypeMismatch": "method main() -> Int { CONST_I 1; CONST_F 1.0; ADD; RET }",
    "StackUnderflow": "method main() -> Int { ADD; RET }",
    "CallDepthExceeded": "method f(x: Int) -> Int { LOAD x; CALL f; RET }\n"
                         "method main() -> Int { CONST_I 0; CALL f; RET }",
}


@pytest.mark.parametrize("engine", ["interp", "auto"])
@pytest.mark.parametrize("kind", sorted(TRAPS))
def test_traps(kind, engine):
    with pytest.raises(Trap) as exc:
        run_source(TRAPS[kind], engine=engine)
    assert exc.value.kind == kind
    assert exc.value.method in ("f", "main")
    if kind in ("DivideByZero", "OutOfBoundsArray"):
        assert (exc.value.method, exc.value.index) == ("f", 2 if kind == "DivideByZero" else 3)


TASK_TRAP = """
global marker: Int;
@Parallel(parDegree=2)
method inv(x: Int) -> FutureOf(Int) { CONST_I 100; LOAD x; DIV; RET }
method main() -> Int {
    local good: FutureOf(Int);
    local bad: FutureOf(Int);
    CONST_I 0; CALL inv; STORE bad;
    CONST_I 5; CALL inv; STORE good;
    CONST_I 1; PUTSTATIC marker;
    LOAD good; TOUCH; PUTSTATIC marker;
    LOAD bad; TOUCH; RET
}
"""


def test_task_trap_surfaces_at_touch():
    program = load(parse_assembly(TASK_TRAP), PlatformInfo(2)).program
    machine = Machine(program, PlatformInfo(2), "interp")
    with pytest.raises(TaskTrapped) as exc:
        machine.run()
    # the spawn site did not fail and the sibling task delivered its value
    assert machine.globals["marker"] == 20
    assert exc.value.kind == "DivideByZero" and exc.value.method == "inv"


def test_inline_trap_surfaces_at_call():
    with pytest.raises(Trap) as exc:
        run_source(TASK_TRAP, cores=1)
    assert not isinstance(exc.value, TaskTrapped)
    assert exc.value.kind == "DivideByZero"


@pytest.mark.parametrize("cores, no_transform", [(4, False), (1, False), (4, True)])
def test_arguments_are_copied(cores, no_transform):
    src = (CORPUS / "pos02_array_argument.pal").read_text()
    value, machine = run_source(src, cores=cores, no_transform=no_transform)
    assert value == 5
    assert machine.stats.tasks_spawned == (0 if no_transform or cores == 1 else 1)


def test_repeated_touch_same_value():
    machine = Machine(parse_assembly("method main() -> Int { CONST_I 0; RET }"), PlatformInfo(1))
    payload = np.arange(3)
    f = FutureRef.filled(payload)
    assert machine.touch(f) is payload
    assert machine.touch(f) is payload
    assert len(machine.stats.touch_durations) == 2


DEADLOCK = """#transformed
program stuck;
@Parallel(parDegree=1)
method down(x: Int) -> FutureOf(Int) {
    LOAD x; JZ base;
    LOAD x; CONST_I 1; SUB; SPAWN down; TOUCH; RET;
base:
    CONST_I 0; RET
}
method main() -> Int { CONST_I 1; SPAWN down; TOUCH; RET }
"""


def test_deadlock_is_detected():
    with pytest.raises(DeadlockDetected):
        run_source(DEADLOCK, cores=1, trusted=True)


def test_stats_json(tmp_path):
    src = stress_program(random.Random(3), 2)
    program = load(parse_assembly(src), PlatformInfo(2)).program
    path = tmp_path / "stats.json"
    _, stats = run(program, RuntimeConfig(cores_override=2, stats_path=str(path)))
    data = json.loads(path.read_text())
    assert set(data) == {"wall_ms", "tasks_spawned", "peak_concurrency", "touch_block_ms", "per_method"}
    assert set(data["per_method"]) == {"spin"}
    assert set(data["per_method"]["spin"]) == {"tasks", "mean_ms", "max_ms"}
    assert data["tasks_spawned"] == data["per_method"]["spin"]["tasks"] == stats.tasks_spawned > 0
    assert data["per_method"]["spin"]["max_ms"] >= data["per_method"]["spin"]["mean_ms"] > 0


def test_untransformed_run_spawns_nothing():
    src = stress_program(random.Random(5), 4)
    _, machine = run_source(src, cores=4, no_transform=True)
    assert machine.stats.tasks_spawned == 0 and machine.pools == {}


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.sampled_from([1, 2, 4, 8]), st.integers(1, 8))
def test_cap_invariant(seed, par_degree, cores):
    src = stress_program(random.Random(seed), par_degree)
    _, machine = run_source(src, cores=cores)
    cap = min(par_degree, cores)
    assert machine.stats.per_method_peak.get("spin", 0) <= cap
    assert machine.stats.peak_concurrency <= cap
    for pool in machine.pools.values():
        assert pool.started <= cap


@settings(max_examples=120)
@given(st.integers(0, 10**9), st.sampled_from([(1, 1), (2, 2), (4, 4), (2, 4), (4, 2), (8, 3)]))
def test_transformed_equals_sequential(seed, pd_cores):
    par_degree, cores = pd_cores
    src = generate_program(seed, par_degree=par_degree)
    seq = outcome(*run_source(src, cores=cores, no_transform=True))
    par = outcome(*run_source(src, cores=cores))
    assert par == seq


@settings(max_examples=12)
@given(st.integers(0, 10**9))
def test_compiled_engine_matches_interpreter(seed):
    src = generate_program(seed, GenConfig(n_parallel=(1, 2), n_helpers=(0, 1)))
    a = outcome(*run_source(src, cores=2, engine="interp"))
    b = outcome(*run_source(src, cores=2, engine="auto"))
    assert a == b
