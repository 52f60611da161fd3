"""Tuple and CPS translations, the embedded step function and rendering."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accverify import lang, saa, translate
from accverify.cli import corpus_dir
from accverify.lang import Finished, PairV, SeqV
from accverify.translate import (
    TranslationError, cps_translate, embed_ev_step, render_source, run_translated, tuple_translate,
)

import oracles

CORPUS = corpus_dir()
GOLDEN = oracles.golden_dir()
BUSY_P = lang.parse_program((CORPUS / "overview1.ml").read_text())
BUSY_A = saa.parse_spec((CORPUS / "overview1.spec").read_text())
ANY_A = saa.parse_spec((CORPUS / "tp-div.spec").read_text())


# ---------------------------------------------------------------- clause shapes

def test_event_clause_shape():
    tp = tuple_translate(lang.parse_program("ev 3"))
    t = tp.term
    assert type(t) is lang.LetPair
    assert type(t.bound) is lang.Pair and t.bound.left.value == 3
    assert type(t.bound.right) is lang.Const and t.bound.right.value == SeqV()
    body = t.body
    assert type(body) is lang.Pair and body.left.value == lang.UNIT
    assert type(body.right) is lang.BinOp and body.right.op == "++"
    assert (body.right.left.name, body.right.right.name) == (t.right, t.left)


def test_lambda_clause_takes_prefix_second():
    tp = tuple_translate(lang.parse_expr("let main = fun x -> x in main"))
    lam = next(n for n in lang.iter_nodes(tp.term) if type(n) is lang.Lam and n.param == "x")
    inner = lam.body
    assert type(inner) is lang.Lam and inner.param.startswith("$")
    assert type(inner.body) is lang.Pair and inner.body.left.name == "x"


def test_busy_tuple_evaluation():
    out = run_translated(tuple_translate(BUSY_P), [7, 2])
    assert out == Finished(PairV(lang.UNIT, SeqV((7, -7))), ())


def test_busy_product_final_state():
    out = run_translated(tuple_translate(BUSY_P, BUSY_A, "product"), [7, 2])
    assert translate.decode_state(BUSY_A, out.value.snd) == saa.SaaState("q2", (7,))


def test_busy_cps_final_assertion():
    tp = cps_translate(BUSY_P, BUSY_A)
    assert type(run_translated(tp, [7, 2])) is Finished
    # the last event differs from -x: q2 is never reached
    bad = lang.parse_program((CORPUS / "overview1-unsafe.ml").read_text())
    r = run_translated(cps_translate(bad, BUSY_A), [7, 2])
    assert type(r) is lang.AssertionFailed


def test_cps_constant_program():
    tp = cps_translate(lang.parse_program("5"), ANY_A)
    assert tp.arity == 0
    out = run_translated(tp)
    assert out.value.fst == 5 and out.trace == ()


def test_cps_rejects_tuple_accumulators():
    a = saa.parse_spec("states: q; acc: 2 init (0, 0); from q otherwise update (acc1, v) goto q;")
    with pytest.raises(TranslationError):
        cps_translate(BUSY_P, a)


def test_product_needs_automaton():
    with pytest.raises(TranslationError):
        tuple_translate(BUSY_P, mode="product")


def test_reserved_names_rejected():
    with pytest.raises(TranslationError):
        tuple_translate(_dollar_program())


def _dollar_program():
    t = lang.parse_program("let main (x:int) = ev x")
    return lang.Let(10_000, "$s1", lang.Const(10_001, 1), t)


def test_no_event_nodes_in_outputs():
    for name, p, a in oracles.corpus_pairs():
        outs = [tuple_translate(p), tuple_translate(p, a, "product")]
        if a.k == 1:
            outs.append(cps_translate(p, a))
        for tp in outs:
            assert not translate.contains_ev(tp.term), (name, tp.mode)


# ---------------------------------------------------------------- step function

def test_ev_step_golden():
    assert lang.render(embed_ev_step(BUSY_A)) + "\n" == (GOLDEN / "overview1_ev_step.ml").read_text()


def test_ev_step_sink_keeps_state():
    out = lang.eval_program(embed_ev_step(BUSY_A), [7, 4, 9])  # unknown index: falls through
    assert translate.decode_state(BUSY_A, PairV(0, out.value.snd)).acc == (4,)


def test_ev_step_matches_concrete_step():
    for _, _, a in oracles.corpus_pairs()[:8]:
        checks, fails = oracles.ev_step_check(a)
        assert checks and not fails, fails[:3]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ev_step_on_random_automata(seed):
    a = oracles.rand_saa(random.Random(seed))
    checks, fails = oracles.ev_step_check(a, grid=range(-3, 4))
    assert not fails, fails[:3]


# ---------------------------------------------------------------- rendering

def test_product_golden():
    tp = tuple_translate(BUSY_P, BUSY_A, "product")
    assert render_source(tp) == (GOLDEN / "overview1_product.ml").read_text()


def test_cps_golden():
    assert render_source(cps_translate(BUSY_P, BUSY_A)) == (GOLDEN / "overview1_cps.ml").read_text()


def test_golden_file_runs():
    t = lang.parse_expr((GOLDEN / "overview1_product.ml").read_text())
    out = lang.eval_program(t, [3, 1])
    assert translate.decode_state(BUSY_A, out.value.snd) == saa.SaaState("q2", (3,))


def test_render_round_trip_and_determinism():
    for mode in ("seq", "product"):
        tp = tuple_translate(BUSY_P, BUSY_A, mode)
        src = render_source(tp)
        assert lang.same_shape(lang.parse_expr(src), tp.term)
        assert src == render_source(tuple_translate(BUSY_P, BUSY_A, mode))


def test_unknown_dialect():
    with pytest.raises(TranslationError):
        render_source(tuple_translate(BUSY_P), dialect="scheme")


# ---------------------------------------------------------------- differential

@pytest.mark.parametrize("name", [n for n, _, _ in oracles.corpus_pairs()])
def test_corpus_translations_preserve_semantics(name):
    (_, p, a), = [x for x in oracles.corpus_pairs() if x[0] == name]
    checks, fails = oracles.translation_check(name, p, a, range(-3, 4), (0, 1))
    assert checks and not fails, fails[:3]


def test_generated_programs_preserve_semantics():
    specs = [a for _, _, a in oracles.corpus_pairs() if a.k == 1]
    progs = oracles.generated_programs(100, seed=0)
    for i, p in enumerate(progs):
        checks, fails = oracles.translation_check(f"gen{i}", p, specs[i % len(specs)],
                                                  range(-2, 3), (0, 1))
        assert not fails, fails[:3]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_straight_line_programs(seed):
    rng = random.Random(seed)
    p = lang.parse_program(oracles.straight_line_program(rng))
    a = oracles.rand_saa(rng)
    checks, fails = oracles.translation_check("random", p, a, range(-2, 3), (seed % 7,))
    assert not fails, fails[:3]


def test_divergence_corresponds():
    p = lang.parse_program("let rec f x = ev x; f (x + 1) in f 0")
    assert type(run_translated(tuple_translate(p), fuel=5_000)) is lang.Diverged


def test_stuck_corresponds():
    p = lang.parse_program("let main (x:int) = ev x; ev (10 / x)")
    out = run_translated(tuple_translate(p), [0])
    assert out == lang.Stuck((), "division by zero")
