"""Lowering soundness: loop-IR execution must match the kernel evaluator,
and trip/operation counts must match loop-bound arithmetic.
"""

import random

import pytest

from dspc.frontend import parse_source
from dspc.graph import build_graph, infer_shapes
from dspc.interp import evaluate_loop_ir
from dspc.kernels import eval_graph, tensor
from dspc.loop_ir import (AffineExpr, BufferDecl, For, LoopProgram, OutOfBounds,
                          Store, ConstF, loop_to_text, validate_program)
from dspc.lowering import lower_graph
from dspc.rewriter import apply_dsp_patterns


def compile_graph(source, lengths=None, opt=False):
    g = infer_shapes(build_graph(parse_source(source)), lengths)
    if opt:
        g, _ = apply_dsp_patterns(g)
    return g


def rand(rng, n):
    return tensor([rng.uniform(-1, 1) for _ in range(n)])


def run_both(source, lengths, inputs, opt=False):
    g = compile_graph(source, lengths, opt=opt)
    outs, counters = evaluate_loop_ir(lower_graph(g), inputs)
    ref = eval_graph(g, inputs)
    return g, outs, ref, counters


def assert_matches_kernels(source, lengths, inputs, opt=False):
    g, outs, ref, _ = run_both(source, lengths, inputs, opt=opt)
    for vid in g.prints:
        got, want = outs[vid], ref[vid]
        assert got.logical_length == want.logical_length
        for a, b in zip(got.values, want.values):
            assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


# every source-level opcode in one small program each
BASE_PROGRAMS = [
    ("delay", "def main(x) { print(delay(x, 3)); }", 10),
    ("delay_zero", "def main(x) { print(delay(x, 0)); }", 6),
    ("fir", "def main(x) { print(firFilterResponse(x, [0.5, 0.25, 0.125])); }", 12),
    ("conv", "def main(x) { print(conv1d(x, [1, 2, 1])); }", 9),
    ("sliding", "def main(x) { print(slidingWindowAvg(x, 4)); }", 11),
    ("dft_real", "def main(x) { print(dft1dreal(x)); }", 8),
    ("dft_imag", "def main(x) { print(dft1dimg(x)); }", 8),
    ("idft", "def main(x) { print(idft1d(dft1dreal(x), dft1dimg(x))); }", 7),
    ("lowpass", "def main() { print(lowPassFIRFilter(9, 1.0)); }", None),
    ("hamming", "def main() { print(hammingWindow(8)); }", None),
    ("lms", "def main(x) { print(lmsFilter(x, delay(x, 1), 0.05, 3)); }", 24),
    ("add_sub", "def main(a, b) { print(a + b); print(a - b); }", 10),
    ("mul_div", "def main(a) { print(a * a); print(a / 4.0); }", 10),
    ("broadcast", "def main(a) { print(a + 1.5); print(2.0 - a); }", 7),
    ("square_gain", "def main(x) { print(gain(square(x), 0.5)); }", 9),
    ("reverse", "def main(x) { print(reverse(x)); }", 5),
    ("sum", "def main(x) { print(sum(x)); }", 13),
    ("threshold", "def main(x) { print(threshold(x, 0.5)); }", 9),
    ("quantize", "def main(x) { print(quantize(x, 8, 0 - 1, 1)); }", 9),
    ("rle", "def main(x) { print(runLenEncoding(threshold(x, 0.8))); }", 20),
    ("updown", "def main(x) { print(upsample(x, 3)); print(downsample(x, 2)); }", 7),
    ("sinvec", "def main() { print(sinVec(16, 2, 16.0)); }", None),
    ("cosvec", "def main() { print(cosVec(12, 1, 12.0)); }", None),
    ("rangevec", "def main() { print(rangeVec(2, 3, 5)); }", None),
    ("const", "def main() { print([4, 5, 6]); }", None),
    ("return_value", "def main(x) { print(x); return sum(x); }", 6),
]


@pytest.mark.parametrize("name,source,n",
                         BASE_PROGRAMS, ids=[p[0] for p in BASE_PROGRAMS])
def test_each_opcode_matches_kernels(name, source, n):
    rng = random.Random(hash(name) & 0xFFFF)
    lengths = {} if n is None else {"x": n, "a": n, "b": n, "d": n}
    inputs = {k: rand(rng, v) for k, v in lengths.items()}
    assert_matches_kernels(source, lengths or None, inputs)


# rewritten opcodes reach the loop backend through apply_dsp_patterns
OPT_PROGRAMS = [
    ("filter_hamm", """
def main() {
  print(lowPassFIRFilter(%d, 1.2) * hammingWindow(%d));
}"""),
    ("res_symm", """
def main(x) {
  var h = lowPassFIRFilter(%d, 1.2) * hammingWindow(%d);
  print(firFilterResponse(x, h));
}"""),
]


@pytest.mark.parametrize("L", [4, 5, 8, 101])
@pytest.mark.parametrize("name,template",
                         OPT_PROGRAMS, ids=[p[0] for p in OPT_PROGRAMS])
def test_symmetric_filter_lowerings(name, template, L):
    rng = random.Random(L)
    source = template % (L, L)
    lengths = None if "main()" in source else {"x": 48}
    inputs = {} if lengths is None else {"x": rand(rng, 48)}
    assert_matches_kernels(source, lengths, inputs, opt=True)


@pytest.mark.parametrize("n", [3, 4, 16, 17])
def test_symmetric_spectral_lowerings(n):
    rng = random.Random(300 + n)
    source = """
def main(x) {
  var auto = conv1d(x, reverse(x));
  print(dft1dreal(auto));
  print(dft1dimg(auto));
}
"""
    assert_matches_kernels(source, {"x": n}, {"x": rand(rng, n)}, opt=True)


def test_fused_dft_lowering():
    rng = random.Random(11)
    source = "def main(x) { print(dft1dreal(x)); print(dft1dimg(x)); }"
    assert_matches_kernels(source, {"x": 15}, {"x": rand(rng, 15)}, opt=True)


def test_lms_gain_lowering():
    rng = random.Random(13)
    source = """
def main(x, d) {
  print(gain(lmsFilter(x, d, 0.02, 4), 2.0));
}
"""
    inputs = {"x": rand(rng, 40), "d": rand(rng, 40)}
    assert_matches_kernels(source, {"x": 40, "d": 40}, inputs, opt=True)


# --------------------------------------------------------------------------
# pinned trip counts


def test_dft_real_length8_counts():
    rng = random.Random(2)
    _, _, _, c = run_both("def main(x) { print(dft1dreal(x)); }",
                          {"x": 8}, {"x": rand(rng, 8)})
    assert c.loop_iters_by_tag["dft1d_real.inner"] == 64
    assert c.trig_calls == 64
    # one angle product plus one multiply-accumulate per inner iteration
    assert c.mults == 128
    assert c.adds == 64


def test_filter_hamm_opt_L5_counts():
    g = compile_graph("def main() { print(lowPassFIRFilter(5, 1.2) * hammingWindow(5)); }",
                      opt=True)
    _, c = evaluate_loop_ir(lower_graph(g), {})
    assert c.loop_iters_by_tag["filter_hamm_opt"] == 3
    assert c.stores == 5   # two mirrored stores per trip, one for the middle
    assert c.trig_calls == 5  # the middle tap needs no sinc evaluation


def test_delay_zero_is_single_copy_loop():
    rng = random.Random(4)
    _, _, _, c = run_both("def main(x) { print(delay(x, 0)); }",
                          {"x": 20}, {"x": rand(rng, 20)})
    assert c.loop_iters_by_tag["delay"] == 20
    assert c.loads == 20 and c.stores == 20
    assert c.mults == 0 and c.adds == 0


def test_const_print_counts_small():
    _, _, _, c = run_both("def main() { print([1, 2, 3]); }", None, {})
    assert c.loop_iterations <= 3
    assert c.mults == 0 and c.trig_calls == 0


# --------------------------------------------------------------------------
# structural checks


def test_loop_text_mentions_buffers_and_tags():
    g = compile_graph("def main(x) { print(dft1dreal(x)); }", {"x": 8})
    text = loop_to_text(lower_graph(g))
    assert "buffer" in text
    assert "for " in text
    assert "dft1d_real" in text


def test_loads_by_buffer_tracks_taps():
    rng = random.Random(5)
    src = "def main(x) { print(firFilterResponse(x, [0.5, 0.5])); }"
    g = compile_graph(src, {"x": 6})
    program = lower_graph(g)
    _, c = evaluate_loop_ir(program, {"x": rand(rng, 6)})
    # h is loaded unconditionally on every inner trip: 6 outputs x 2 taps
    h_buf = program.body and next(
        b.name for b in program.buffers if b.init is not None)
    assert c.loads_by_buffer[h_buf] == 12


def test_validator_rejects_static_out_of_bounds():
    i = AffineExpr.of("i")
    prog = LoopProgram(
        buffers=[BufferDecl("y", 4)],
        body=[For("i", 0, AffineExpr.lit(5), 1,
                  [Store("y", i, ConstF(0.0))], "bad")],
        inputs=[], outputs=[], returns=[])
    with pytest.raises(OutOfBounds):
        validate_program(prog)


def test_validator_accepts_lowered_corpus():
    # every app builds a program that passes its own bounds validation
    from dspc import corpus
    for app in corpus.APPS:
        sizes = dict((k, min(v, 32)) for k, v in app.sizes)
        g = corpus.compile_source(app.source(sizes), app.input_lengths(sizes))
        lower_graph(g)  # validates internally
        g2, _ = apply_dsp_patterns(g)
        lower_graph(g2)
