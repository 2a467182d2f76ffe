import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pal import (AlreadyTransformed, Inline, Op, ParallelAnnotation, PlatformInfo, Threaded, VerificationFailed,
                 decide_mode, parse_assembly, transform, validate_program)
from pal.bench import MandelbrotConfig, gen_mandelbrot_program

from progen import generate_program


def P(cores):
    return PlatformInfo(cores, "Overridden")


@pytest.mark.parametrize("par_degree, cores, mode", [
    (4, 2, Threaded(2)),
    (2, 8, Threaded(2)),
    (4, 1, Inline()),
    (1, 8, Inline()),
    (1, 1, Inline()),
    (8, 8, Threaded(8)),
])
def test_decide_mode(par_degree, cores, mode):
    assert decide_mode(ParallelAnnotation(par_degree), P(cores)) == mode


@given(st.integers(1, 64), st.integers(1, 64))
def test_threaded_workers_rule(par_degree, cores):
    mode = decide_mode(ParallelAnnotation(par_degree), P(cores))
    if isinstance(mode, Threaded):
        assert mode.workers == min(par_degree, cores) >= 2
    else:
        assert cores == 1 or par_degree == 1


@given(st.integers(1, 64), st.integers(1, 63))
def test_mode_monotone_in_cores(par_degree, cores):
    before = decide_mode(ParallelAnnotation(par_degree), P(cores))
    after = decide_mode(ParallelAnnotation(par_degree), P(cores + 1))
    assert not (isinstance(before, Threaded) and isinstance(after, Inline))


def test_no_annotations_is_identity():
    p = parse_assembly("method main() -> Int { CONST_I 0; RET }")
    out, report = transform(p, P(8))
    assert out.methods == p.methods
    assert out.transformed
    assert report.rewritten_sites == []
    assert report.mode_per_method == {}


@pytest.fixture(scope="module")
def mandel():
    return parse_assembly(gen_mandelbrot_program(MandelbrotConfig(600, 400, 5, 2)))


def test_mandelbrot_on_four_cores(mandel):
    sites = mandel.call_sites("createLines")
    assert sites
    out, report = transform(mandel, P(4))
    assert report.mode_per_method == {"createLines": Threaded(2)}
    assert sorted(report.rewritten_sites) == sorted(sites)
    for method, idx in sites:
        assert out.method(method).body[idx] == replace(mandel.method(method).body[idx], op=Op.SPAWN)
    assert not any(i.op is Op.CALL and i.arg == "createLines" for m in out.methods for i in m.body)
    assert validate_program(out) == []


def test_mandelbrot_on_one_core(mandel):
    out, report = transform(mandel, P(1))
    assert report.rewritten_sites == []
    assert report.mode_per_method == {"createLines": Inline()}
    assert out == replace(mandel, transformed=True)


def test_transform_twice(mandel):
    out, _ = transform(mandel, P(4))
    with pytest.raises(AlreadyTransformed):
        transform(out, P(4))


def test_verification_failure_carries_diagnostics():
    p = parse_assembly("""
    @Parallel(parDegree=0)
    method w() -> FutureOf(Int) { CONST_I 1; RET }
    method main() -> Int { CALL w; TOUCH; RET }
    """)
    with pytest.raises(VerificationFailed) as exc:
        transform(p, P(4))
    assert [d.code for d in exc.value.diagnostics] == ["BadParDegree"]


def test_report_serializes(mandel):
    _, report = transform(mandel, P(4))
    data = json.loads(json.dumps(report.to_json()))
    assert data["mode_per_method"] == {"createLines": "Threaded(2)"}
    assert data["sites_per_method"] == {"createLines": len(report.rewritten_sites)}
    assert data["elapsed_ms"] >= 0
    assert "createLines" in report.table()


@settings(max_examples=150)
@given(st.integers(0, 10**9), st.integers(1, 8))
def test_structure_preserved(seed, cores):
    p = parse_assembly(generate_program(seed))
    out, report = transform(p, P(cores))
    assert validate_program(out) == []
    assert [m.name for m in out.methods] == [m.name for m in p.methods]
    rewritten = set(report.rewritten_sites)
    for before, after in zip(p.methods, out.methods):
        assert before.params == after.params and before.locals == after.locals
        assert before.return_kind == after.return_kind and before.annotation == after.annotation
        assert len(before.body) == len(after.body)
        for i, (a, b) in enumerate(zip(before.body, after.body)):
            if (before.name, i) in rewritten:
                assert a.op is Op.CALL and b.op is Op.SPAWN and a.arg == b.arg
                assert p.method(a.arg).annotation is not None
                assert isinstance(report.mode_per_method[a.arg], Threaded)
            else:
                assert a == b
        if not any(site[0] == before.name for site in rewritten):
            assert after is before
    # every CALL to a Threaded method was rewritten
    for m in out.methods:
        for ins in m.body:
            if ins.op is Op.CALL and ins.arg in report.mode_per_method:
                assert isinstance(report.mode_per_method[ins.arg], Inline)
