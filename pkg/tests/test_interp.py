import random

import pytest

from dspc.frontend import parse_source
from dspc.graph import build_graph, infer_shapes
from dspc.interp import (InputMismatch, LoopDivisionByZero, NonFinite,
                         compiled_source, counters_report, evaluate_loop_ir,
                         report_table)
from dspc.kernels import tensor
from dspc.lowering import lower_graph
from dspc.rewriter import apply_dsp_patterns


def program_for(source, lengths=None, opt=False):
    g = infer_shapes(build_graph(parse_source(source)), lengths)
    if opt:
        g, _ = apply_dsp_patterns(g)
    return lower_graph(g)


def rand(rng, n):
    return tensor([rng.uniform(-1, 1) for _ in range(n)])


def test_counters_are_deterministic_modulo_wall_time():
    rng = random.Random(1)
    p = program_for("def main(x) { print(dft1dreal(x)); }", {"x": 12})
    x = {"x": rand(rng, 12)}
    _, c1 = evaluate_loop_ir(p, x)
    _, c2 = evaluate_loop_ir(p, x)
    d1, d2 = c1.as_dict(), c2.as_dict()
    d1.pop("wall_time_ns"), d2.pop("wall_time_ns")
    assert d1 == d2
    assert c1.wall_time_ns > 0


def test_as_dict_shape():
    p = program_for("def main(x) { print(x + x); }", {"x": 4})
    _, c = evaluate_loop_ir(p, {"x": tensor([1, 2, 3, 4])})
    d = c.as_dict()
    assert set(d) >= {"loop_iterations", "loads", "stores", "mults", "adds",
                      "trig_calls", "wall_time_ns", "loop_iters_by_tag",
                      "loads_by_buffer"}
    assert d["adds"] == 4 and d["mults"] == 0


def test_missing_input_raises():
    p = program_for("def main(x) { print(x); }", {"x": 4})
    with pytest.raises(InputMismatch):
        evaluate_loop_ir(p, {})


def test_wrong_length_input_raises():
    p = program_for("def main(x) { print(x); }", {"x": 4})
    with pytest.raises(InputMismatch):
        evaluate_loop_ir(p, {"x": tensor([1, 2])})


def test_division_by_zero_reports_element():
    p = program_for("def main(a, b) { print(a / b); }", {"a": 3, "b": 3})
    with pytest.raises(LoopDivisionByZero) as exc:
        evaluate_loop_ir(p, {"a": tensor([1, 1, 1]), "b": tensor([1, 0, 1])})
    assert "element 1" in str(exc.value)


def test_non_finite_weights_detected():
    p = program_for("def main(x, d) { print(lmsFilter(x, d, 100000.0, 8)); }",
                    {"x": 256, "d": 256})
    rng = random.Random(9)
    x = rand(rng, 256)
    with pytest.raises(NonFinite):
        evaluate_loop_ir(p, {"x": x, "d": x})


def test_rle_append_respects_capacity():
    # alternating input hits the worst case exactly: 2N slots
    p = program_for("def main(x) { print(runLenEncoding(x)); }", {"x": 6})
    out, _ = evaluate_loop_ir(p, {"x": tensor([1, 2, 1, 2, 1, 2])})
    t = out[next(iter(out))]
    assert t.logical_length == 12


def test_compiled_source_is_cached_and_readable():
    p = program_for("def main(x) { print(gain(x, 2.0)); }", {"x": 4})
    src1 = compiled_source(p)
    src2 = compiled_source(p)
    assert src1 is src2  # cached on the program object
    assert "def _run" in src1
    evaluate_loop_ir(p, {"x": tensor([1, 2, 3, 4])})  # reuses the cache


def test_counter_hoisting_matches_naive_count():
    # iteration/arith counters must reflect the virtual trip counts even
    # though the compiled code hoists increments out of static loops
    rng = random.Random(3)
    p = program_for("def main(x) { print(conv1d(x, [1, 2, 3])); }", {"x": 10})
    _, c = evaluate_loop_ir(p, {"x": rand(rng, 10)})
    # 12 outputs, 3 taps each
    assert c.loop_iters_by_tag["conv1d_full.outer"] == 12
    assert c.loop_iters_by_tag["conv1d_full.inner"] == 36
    assert c.loads_by_buffer  # per-buffer map populated


def test_counters_report_identical_runs():
    p = program_for("def main(x) { print(square(x)); }", {"x": 8})
    rng = random.Random(5)
    x = {"x": rand(rng, 8)}
    _, c1 = evaluate_loop_ir(p, x)
    _, c2 = evaluate_loop_ir(p, x)
    report = counters_report(c1, c2)
    ratios = dict(report["ratios"])
    ratios.pop("wall_time_ns")
    assert all(v == 1.0 for v in ratios.values())


def test_counters_report_zero_over_zero():
    p = program_for("def main() { print([1]); }")
    _, c1 = evaluate_loop_ir(p, {})
    _, c2 = evaluate_loop_ir(p, {})
    report = counters_report(c1, c2)
    assert report["ratios"]["trig_calls"] == 1.0  # 0/0 reads as unchanged


def test_report_table_renders_rows():
    p = program_for("def main(x) { print(square(x)); }", {"x": 8})
    rng = random.Random(6)
    x = {"x": rand(rng, 8)}
    _, c1 = evaluate_loop_ir(p, x)
    _, c2 = evaluate_loop_ir(p, x)
    table = report_table(counters_report(c1, c2))
    lines = table.splitlines()
    assert lines[0].split() == ["counter", "before", "after", "ratio"]
    assert any(row.startswith("mults") for row in lines)
