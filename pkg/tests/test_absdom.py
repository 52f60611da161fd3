"""Numerical domains: worked examples plus the grid oracles."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accverify import absdom, lang
from accverify.absdom import (
    INF, NU, Lin, ModEq, OctCong, ScopeError, eq, le, lt,
)

import oracles

V = Lin.var


def interval(scope, **box):
    b = absdom.top(scope, "interval")
    for x, (lo, hi) in box.items():
        b = b.test(le(Lin.of(lo), V(x))).test(le(V(x), Lin.of(hi)))
    return b


# ---------------------------------------------------------------- extrema

@pytest.mark.parametrize("tag", oracles.TAGS)
def test_top_and_bot(tag):
    scope = ("x", NU)
    assert absdom.gamma_contains(absdom.top(scope, tag), 7, {"x": -3})
    assert not absdom.gamma_contains(absdom.bot(scope, tag), 7, {"x": -3})
    assert absdom.leq(absdom.bot(scope, tag), absdom.top(scope, tag))


def test_scope_mismatch_rejected():
    with pytest.raises(ScopeError):
        absdom.join(absdom.top(("x",)), absdom.top(("y",)))


# ---------------------------------------------------------------- lattice examples

def test_interval_join_hull():
    a = absdom.const_singleton((NU,), 1, "interval")
    b = absdom.const_singleton((NU,), -1, "interval")
    assert absdom.join(a, b).bounds(NU) == (-1, 1)


def test_octagon_meet_antisymmetry():
    s = ("acc0", NU)
    a = absdom.top(s).test(le(V(NU), V("acc0")))
    b = absdom.top(s).test(le(V("acc0"), V(NU)))
    assert absdom.entails(absdom.meet(a, b), eq(V(NU), V("acc0")))


def test_congruence_join_by_gcd():
    a = absdom.top(("x",), "congruence").test(ModEq(V("x"), 4, 0))
    b = absdom.top(("x",), "congruence").test(ModEq(V("x"), 4, 2))
    j = absdom.join(a, b)
    assert j.get("x") == (2, 0)
    members = {r for r in range(8) if j.gamma_contains(None, {"x": r})}
    assert members == {0, 2, 4, 6}


# ---------------------------------------------------------------- widening

def test_interval_widening():
    a, b = interval((NU,), **{NU: (0, 1)}), interval((NU,), **{NU: (0, 2)})
    assert absdom.widen(a, b).bounds(NU) == (0, INF)


def test_interval_widening_with_threshold():
    a, b = interval((NU,), **{NU: (0, 1)}), interval((NU,), **{NU: (0, 2)})
    assert absdom.widen_thresholds(a, b, [le(V(NU), Lin.of(10))]).bounds(NU) == (0, 10)


@pytest.mark.parametrize("tag", oracles.TAGS)
def test_widening_is_stable(tag):
    b = absdom.top(("x", "y"), tag).test(le(V("x"), V("y"))).test(ModEq(V("x"), 2, 0))
    assert absdom.widen(b, b).equal(b)


def test_octagon_widening_keeps_relations():
    s = ("i", "n")
    a = absdom.top(s).test(eq(V("i"), Lin.of(0))).test(le(V("i"), V("n")))
    b = absdom.top(s).test(le(Lin.of(0), V("i"))).test(le(V("i"), Lin.of(1))).test(le(V("i"), V("n")))
    w = absdom.widen(a, b)
    assert w.entails(le(V("i"), V("n"))) and w.bounds("i") == (0, INF)


# ---------------------------------------------------------------- transfer functions

def test_interval_test_against_constant():
    b = interval(("acc0", NU), acc0=(3, 3), **{NU: (0, 10)})
    r = absdom.test(le(V(NU), V("acc0")), b)
    assert r.bounds(NU) == (0, 3)
    assert [v for v in range(11) if r.gamma_contains(v, {"acc0": 3})] == [0, 1, 2, 3]


def test_octagon_assignment_substitutes():
    s = ("pos", "acc0", NU)
    b = absdom.top(s).test(eq(V(NU), V("pos")))
    r = absdom.assign("acc0", V(NU), b)
    assert r.entails(eq(V("acc0"), V(NU))) and r.entails(eq(V("acc0"), V("pos")))
    for p in range(-3, 4):
        assert r.gamma_contains(p, {"pos": p, "acc0": p})
        assert not r.gamma_contains(p, {"pos": p, "acc0": p + 1})


def test_congruence_test_mod():
    r = absdom.test(ModEq(V("x"), 2, 0), absdom.top(("x",), "congruence"))
    assert r.get("x") == (2, 0)


def test_nonlinear_assignment_havocs():
    e = absdom.compile_expr(lang.parse_expr("x * y"), lambda n: n)
    assert e is absdom.HAVOC
    b = interval(("x", "y"), x=(1, 1), y=(2, 2))
    assert absdom.assign("x", e, b).bounds("x") == (-INF, INF)


def test_strict_comparison_is_integral():
    b = absdom.top(("x",), "interval").test(lt(V("x"), Lin.of(3)))
    assert b.bounds("x") == (-INF, 2)


# ---------------------------------------------------------------- projection and scope

def test_project_value():
    assert absdom.project(NU, absdom.const_singleton(("x", NU), 3)).bounds(NU) == (-INF, INF)


def test_project_keeps_other_bounds():
    b = absdom.top(("x", NU)).test(eq(V(NU), V("x"))).test(le(Lin.of(0), V("x"))).test(le(V("x"), Lin.of(5)))
    r = absdom.project(NU, b)
    assert r.bounds("x") == (0, 5) and r.bounds(NU) == (-INF, INF)


def test_project_bottom():
    assert absdom.project(NU, absdom.bot(("x", NU))).is_bot()


def test_rename_value_relation():
    b = absdom.top(("x", NU)).test(eq(V(NU), V("x")))
    r = absdom.rename(b, "x", "y")
    assert r.scope == ("y", NU) and r.entails(eq(V(NU), V("y")))


def test_rename_collision_rejected():
    with pytest.raises(ScopeError):
        absdom.rename(absdom.top(("x", "y")), "x", "y")


def test_drop_var_keeps_consequences():
    b = absdom.top(("x", "y")).test(eq(V("x"), V("y"))).test(le(Lin.of(0), V("y"))).test(le(V("y"), Lin.of(1)))
    r = absdom.drop_var(b, "y")
    assert r.scope == ("x",) and r.bounds("x") == (0, 1)


def test_add_var_is_unconstrained():
    r = absdom.add_var(absdom.top(("x",)), "z")
    assert "z" in r.scope and r.is_top()


def test_const_singleton():
    assert absdom.const_singleton((NU,), 5, "interval").bounds(NU) == (5, 5)


def test_strengthen_eq():
    for tag in ("interval", "octagon"):
        src = absdom.top(("x", NU), tag).test(le(Lin.of(0), V("x"))).test(le(V("x"), Lin.of(3)))
        r = absdom.strengthen_eq(src, NU, "x")
        assert r.bounds(NU) == (0, 3)
        if tag == "octagon":
            assert r.entails(eq(V(NU), V("x")))
    assert absdom.strengthen_eq(absdom.bot(("x", NU)), NU, "x").is_bot()


# ---------------------------------------------------------------- membership

def test_membership_examples():
    s = ("acc0", NU)
    same = absdom.top(s).test(eq(V(NU), V("acc0")))
    above = absdom.top(s).test(lt(V("acc0"), V(NU)))
    assert absdom.gamma_contains(same, 4, {"acc0": 4})
    assert not absdom.gamma_contains(above, 4, {"acc0": 4})
    even = absdom.top(("x", NU), "congruence").test(ModEq(V("x"), 2, 0))
    assert not absdom.gamma_contains(even, 11, {"x": 3})


def test_membership_needs_full_environment():
    with pytest.raises(ScopeError):
        absdom.top(("x", NU)).gamma_contains(1, {})


def test_render_relational_constraints():
    b = absdom.top(("pos", "acc0")).test(eq(V("pos"), V("acc0"))).test(le(Lin.of(1), V("acc0")))
    assert str(b) == "{pos >= 1, acc0 >= 1, pos = acc0}"
    assert str(absdom.bot(("x",))) == "⊥"


# ---------------------------------------------------------------- product

def test_product_reduction_tightens_bounds():
    p = absdom.top(("x",), "octcong").test(le(Lin.of(1), V("x"))).test(le(V("x"), Lin.of(4)))
    p = p.test(ModEq(V("x"), 3, 0))
    assert p.bounds("x") == (3, 3)


def test_product_empty_when_residue_misses_range():
    p = absdom.top(("x",), "octcong").test(eq(V("x"), Lin.of(5))).test(ModEq(V("x"), 2, 0))
    assert p.is_bot()


def test_reduction_is_idempotent():
    rng = random.Random(4)
    for _ in range(100):
        o = oracles.rand_elem(rng, "octagon", ("x", "y"))
        c = oracles.rand_elem(rng, "congruence", ("x", "y"))
        once = OctCong(("x", "y"), o, c)
        twice = OctCong(("x", "y"), once.oct, once.cong)
        assert twice.equal(once) and twice.oct.m == once.oct.m


# ---------------------------------------------------------------- grid oracles

def _assert_clean(result):
    checks, fails = result
    assert checks > 0
    assert fails == [], "\n".join(fails[:5])


def test_transfer_functions_sound_on_grid():
    _assert_clean(oracles.absdom_transfer_suite(seed=1))


def test_octagon_closure_exact_and_idempotent():
    _assert_clean(oracles.octagon_closure_suite(seed=1))


def test_lattice_laws_on_sampled_triples():
    checks, fails = oracles.lattice_suite(seed=1, triples=300)
    assert checks >= 4 * 300 and not fails, fails[:3]


def test_widening_chains_stabilize():
    _assert_clean(oracles.widening_suite(seed=1))


def test_product_membership_and_reduction():
    _assert_clean(oracles.product_suite(seed=1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(oracles.TAGS))
def test_join_contains_both_on_grid(seed, tag):
    rng = random.Random(seed)
    scope = ("x", "y")
    a, b = oracles.rand_elem(rng, tag, scope), oracles.rand_elem(rng, tag, scope)
    j = a.join(b)
    for pt in oracles.points(scope):
        if oracles.member(a, pt) or oracles.member(b, pt):
            assert oracles.member(j, pt)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(oracles.TAGS))
def test_entailment_agrees_with_grid(seed, tag):
    rng = random.Random(seed)
    scope = ("x", "y")
    b = oracles.rand_elem(rng, tag, scope)
    c = oracles.rand_atom(rng, scope)
    if b.entails(c):
        for pt in oracles.points(scope):
            if oracles.member(b, pt):
                assert absdom.linexpr.eval_cond(c, pt)
