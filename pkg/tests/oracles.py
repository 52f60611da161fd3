"""Sampling oracles shared by the module tests and the acceptance script.

Every checker returns ``(checks, failures)`` where ``failures`` is a list of
human-readable descriptions (empty when everything holds).
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from accverify import absdom, effectdom, lang, saa, translate
from accverify.absdom import (
    HAVOC, NU, Cmp, Lin, Mod, ModEq, Octagon, OctCong, conj, disj, eq,
)
from accverify.absdom.linexpr import eval_cond, trunc_mod
from accverify.cli import corpus_dir

GRID = range(-3, 4)
TAGS = ("interval", "congruence", "octagon", "octcong")
NAMES = ("x", "y", "z")


# ---------------------------------------------------------------- random terms

def rand_lin(rng: random.Random, scope, span=2, const=4) -> Lin:
    k = rng.randint(1, min(2, len(scope)))
    xs = rng.sample(list(scope), k)
    d = {x: rng.choice([a for a in range(-span, span + 1) if a]) for x in xs}
    return Lin.from_dict(d, rng.randint(-const, const))


def rand_atom(rng: random.Random, scope):
    lin = rand_lin(rng, scope)
    r = rng.random()
    if r < 0.5:
        return Cmp(lin, "<=")
    if r < 0.7:
        return Cmp(lin, "=")
    if r < 0.8:
        return Cmp(lin, "<>")
    m = rng.choice([2, 3, 4])
    res = rng.randint(0, m - 1)
    if rng.random() < 0.3:
        res = -res
    return ModEq(Lin.from_dict({rng.choice(list(scope)): 1}), m, res)


def rand_cond(rng: random.Random, scope):
    r = rng.random()
    if r < 0.6:
        return rand_atom(rng, scope)
    if r < 0.85:
        return conj(rand_atom(rng, scope), rand_atom(rng, scope))
    return disj(rand_atom(rng, scope), rand_atom(rng, scope))


def rand_elem(rng: random.Random, tag: str, scope):
    """A random element reachable from top by tests and joins."""
    b = absdom.top(scope, tag)
    if rng.random() < 0.05:
        return absdom.bot(scope, tag)
    for _ in range(rng.randint(0, 3)):
        b = b.test(rand_atom(rng, scope))
    if rng.random() < 0.3:
        c = absdom.top(scope, tag)
        for _ in range(rng.randint(1, 3)):
            c = c.test(rand_atom(rng, scope))
        b = b.join(c)
    return b


def rand_expr(rng: random.Random, scope):
    r = rng.random()
    if r < 0.7:
        return rand_lin(rng, scope)
    if r < 0.85:
        return Mod(Lin.from_dict({rng.choice(list(scope)): 1}, rng.randint(-2, 2)),
                   rng.choice([2, 3]))
    return HAVOC


def eval_expr(e, env) -> int | None:
    if type(e) is Lin:
        return e.eval(env)
    if type(e) is Mod:
        return trunc_mod(e.expr.eval(env), e.c)
    return None


def points(scope, grid=GRID):
    for vals in itertools.product(grid, repeat=len(scope)):
        yield dict(zip(scope, vals))


def member(b, pt) -> bool:
    return b.gamma_contains(None, pt)


# ---------------------------------------------------------------- absdom

def absdom_transfer_suite(seed: int = 0, per_scope: int = 12):
    """Exhaustive grid soundness of assign/test/project/rename/strengthen_eq."""
    rng = random.Random(seed)
    checks, fails = 0, []
    for tag in TAGS:
        for n in (1, 2, 3):
            scope = NAMES[:n]
            for _ in range(per_scope):
                b = rand_elem(rng, tag, scope)
                inside = [pt for pt in points(scope) if member(b, pt)]
                x = rng.choice(scope)
                e = rand_expr(rng, scope)
                c = rand_cond(rng, scope)
                y = rng.choice(scope)
                ops = {
                    "assign": b.assign(x, e),
                    "test": b.test(c),
                    "project": b.project(x),
                    "rename": b.rename(x, "w"),
                    "strengthen_eq": absdom.strengthen_eq(b, x, y),
                }
                for pt in inside:
                    # assign: the updated point (any value for havoc)
                    v = eval_expr(e, pt)
                    outs = [v] if v is not None else list(GRID)
                    for v in outs:
                        checks += 1
                        if not member(ops["assign"], {**pt, x: v}):
                            fails.append(f"{tag} assign {x}:={e} lost {pt} from {b}")
                    if eval_cond(c, pt):
                        checks += 1
                        if not member(ops["test"], pt):
                            fails.append(f"{tag} test {c} lost {pt} from {b}")
                    for v in GRID:
                        checks += 1
                        if not member(ops["project"], {**pt, x: v}):
                            fails.append(f"{tag} project {x} lost {pt}")
                    renamed = {("w" if k == x else k): val for k, val in pt.items()}
                    checks += 1
                    if not member(ops["rename"], renamed):
                        fails.append(f"{tag} rename {x}->w lost {pt}")
                    if pt[x] == pt[y]:
                        checks += 1
                        if not member(ops["strengthen_eq"], pt):
                            fails.append(f"{tag} strengthen_eq {x}={y} lost {pt}")
    return checks, fails


def octagon_closure_suite(seed: int = 0, count: int = 200):
    """Closing an arbitrary coherent matrix keeps its integer points and is idempotent."""
    rng = random.Random(seed)
    checks, fails = 0, []
    inf = absdom.INF
    for _ in range(count):
        n = rng.randint(1, 3)
        scope = NAMES[:n]
        n2 = 2 * n
        m = [[0 if i == j else inf for j in range(n2)] for i in range(n2)]
        for _ in range(rng.randint(1, 2 * n2)):
            i, j = rng.randrange(n2), rng.randrange(n2)
            if i == j:
                continue
            c = rng.randint(-4, 6)
            m[i][j] = min(m[i][j], c)
            m[j ^ 1][i ^ 1] = min(m[j ^ 1][i ^ 1], c)
        raw = [row[:] for row in m]
        closed = Octagon.from_matrix(scope, m)

        def raw_member(pt):
            vals = []
            for x in scope:
                vals.extend((pt[x], -pt[x]))
            return all(vals[i] - vals[j] <= raw[i][j] for i in range(n2) for j in range(n2))

        for pt in points(scope):
            checks += 1
            if raw_member(pt) != member(closed, pt):
                fails.append(f"closure changed membership of {pt}: {raw}")
        checks += 1
        if not closed.is_bot():
            again = Octagon.from_matrix(scope, closed.m)
            if again.m != closed.m:
                fails.append(f"closure not idempotent on {raw}")
    return checks, fails


def lattice_suite(seed: int = 0, triples: int = 300):
    """Order and bound laws on sampled triples, per domain."""
    rng = random.Random(seed)
    checks, fails = 0, []
    for tag in TAGS:
        for _ in range(triples):
            scope = NAMES[:rng.randint(1, 3)]
            a, b, c = (rand_elem(rng, tag, scope) for _ in range(3))
            j, m = a.join(b), a.meet(b)
            laws = {
                "reflexive": a.leq(a),
                "transitive": not (a.leq(b) and b.leq(c)) or a.leq(c),
                "join upper": a.leq(j) and b.leq(j),
                "join least": not (a.leq(c) and b.leq(c)) or j.leq(c),
                "meet lower": m.leq(a) and m.leq(b),
                "meet greatest": not (c.leq(a) and c.leq(b)) or c.leq(m),
                "join commutes": j.equal(b.join(a)),
                "bot least": absdom.bot(scope, tag).leq(a),
                "top greatest": a.leq(absdom.top(scope, tag)),
                "widen upper": j.leq(a.widen(b)),
                "widen stable": a.widen(a).equal(a),
            }
            for name, ok in laws.items():
                checks += 1
                if not ok:
                    fails.append(f"{tag} {name}: a={a!r} b={b!r} c={c!r}")
            # meet is exact on the grid for the relational domains' intersection
            for pt in points(scope):
                checks += 1
                if member(a, pt) and member(b, pt) and not member(m, pt):
                    fails.append(f"{tag} meet lost {pt}")
    return checks, fails


def widening_bound(n: int, thresholds: int) -> int:
    return 2 * n * (thresholds + 2)


def widening_suite(seed: int = 0, chains: int = 60):
    """Chains b' = widen(b, join(b, step(b))) stabilize within the documented bound."""
    rng = random.Random(seed)
    checks, fails = 0, []
    for tag in TAGS:
        for _ in range(chains):
            scope = NAMES[:rng.randint(1, 3)]
            th = [rand_atom(rng, scope) for _ in range(rng.randint(0, 3))]
            th = [t for t in th if type(t) is Cmp]
            steps = [(rng.choice(scope), rand_lin(rng, scope, span=1, const=3))
                     for _ in range(rng.randint(1, 3))]
            guard = rand_atom(rng, scope) if rng.random() < 0.5 else None

            def step(b):
                for x, e in steps:
                    b = b.assign(x, e)
                return b.test(guard) if guard is not None else b

            b = absdom.top(scope, tag)
            for x in scope:
                b = b.test(eq(Lin.var(x), Lin.of(rng.randint(-2, 2))))
            limit = widening_bound(len(scope), len(th))
            for i in range(limit + 1):
                nxt = b.widen(b.join(step(b)), th)
                if nxt.leq(b):
                    break
                b = nxt
            else:
                fails.append(f"{tag} chain not stable after {limit} steps: {steps}")
            checks += 1
    return checks, fails


def product_suite(seed: int = 0, count: int = 200):
    """Product membership is the conjunction of the components; reduction keeps members."""
    rng = random.Random(seed)
    checks, fails = 0, []
    for _ in range(count):
        scope = NAMES[:rng.randint(1, 3)]
        o = rand_elem(rng, "octagon", scope)
        c = rand_elem(rng, "congruence", scope)
        raw = OctCong(scope, o, c, reduce=False)
        red = OctCong(scope, o, c)
        for pt in points(scope):
            both = member(o, pt) and member(c, pt)
            checks += 2
            if member(raw, pt) != both:
                fails.append(f"product membership differs at {pt}")
            if member(red, pt) != both:
                fails.append(f"reduction changed membership at {pt}: {o} / {c}")
    return checks, fails


def absdom_oracle(seed: int = 0):
    total, fails = 0, []
    for suite in (absdom_transfer_suite, octagon_closure_suite, lattice_suite,
                  widening_suite, product_suite):
        n, f = suite(seed)
        total += n
        fails += f
    return total, fails


# ---------------------------------------------------------------- effectdom

def rand_saa(rng: random.Random, coeff: int = 3) -> saa.Saa:
    """A random total SAA with one accumulator and at most four states."""
    n = rng.randint(1, 4)
    states = [f"q{i}" for i in range(n)]
    err = states[-1] if n > 1 and rng.random() < 0.5 else None

    def term():
        a, b, c = (rng.randint(-coeff, coeff) for _ in range(3))
        return f"{a} * v + {b} * acc0 + {c}"

    def guard():
        op = rng.choice(["<=", "<", "=", "<>", ">="])
        g = f"{term()} {op} 0"
        if rng.random() < 0.2:
            g = f"(acc0 + v) mod 2 = {rng.randint(0, 1)}"
        if rng.random() < 0.2:
            g = f"{g} && {rng.choice(['v', 'acc0'])} > {rng.randint(-coeff, coeff)}"
        return g

    lines = [f"states: {' '.join(states)};", f"acc: 1 init ({rng.randint(-coeff, coeff)});",
             "initial: q0;", f"errors: {err or ''};"]
    for q in states:
        if q == err:
            continue
        for _ in range(rng.randint(0, 2)):
            lines.append(f"from {q} when {guard()} update ({term()}) goto {rng.choice(states)};")
        lines.append(f"from {q} otherwise update ({term()}) goto {rng.choice(states)};")
    return saa.parse_spec("\n".join(lines))


def rand_effect(rng: random.Random, a: saa.Saa, tag: str) -> effectdom.Effect:
    scope = ("x", "acc0")
    m = {}
    for q in a.states:
        m[q] = absdom.bot(scope, tag) if rng.random() < 0.3 else rand_elem(rng, tag, scope)
    return effectdom.Effect(a, scope, tag, m)


def extend_soundness(samples: int = 10_000, seed: int = 0, tags=("octagon", "octcong", "interval"),
                     per_instance: int = 12):
    """Concrete steps from members of ε and β land in extend(ε, β).

    Each instance is a fresh (SAA, ε, β) triple; at most ``per_instance``
    concrete points are drawn from it so that many automata are covered.
    """
    rng = random.Random(seed)
    checks, fails = 0, []
    grid = range(-4, 5)
    while checks < samples:
        a = rand_saa(rng)
        tag = rng.choice(tags)
        eps = rand_effect(rng, a, tag)
        beta = rand_elem(rng, tag, ("x", NU))
        out = effectdom.extend(eps, beta)
        cands = []
        for q in a.states:
            src = eps[q]
            if src.is_bot():
                continue
            for x, acc in itertools.product(grid, grid):
                if src.gamma_contains(None, {"x": x, "acc0": acc}):
                    cands.extend((q, x, acc, c) for c in grid
                                 if beta.gamma_contains(c, {"x": x}))
        for q, x, acc, c in rng.sample(cands, min(per_instance, len(cands))):
            s = saa.step_concrete(a, saa.SaaState(q, (acc,)), c)
            checks += 1
            if not out[s.q].gamma_contains(None, {"x": x, "acc0": s.acc[0]}):
                fails.append(f"{tag}: {q},{acc} --{c}--> {s} lost (x={x})\n"
                             f"{a.source}\neps={eps}\nbeta={beta}\nout={out}")
    return checks, fails


# ---------------------------------------------------------------- translation

def corpus_pairs():
    """(name, program, automaton) for every corpus program."""
    d = corpus_dir()
    out = []
    for f in sorted(d.glob("*.ml")):
        name = f.stem
        spec = d / f"{name}.spec"
        if not spec.exists():
            spec = d / f"{name.removesuffix('-unsafe')}.spec"
        out.append((name, lang.parse_program(f.read_text()), saa.parse_spec(spec.read_text())))
    return out


def straight_line_program(rng: random.Random) -> str:
    """A random program without functions or branches (beyond main's parameters)."""
    ps = ["a", "b"][:rng.randint(1, 2)]
    vars_ = list(ps)

    def atom():
        return rng.choice(vars_ + [str(rng.randint(0, 5))])

    def expr():
        r = rng.random()
        if r < 0.3:
            return atom()
        if r < 0.4:
            return "nondet ()"
        op = rng.choice(["+", "-", "*", "+", "-"])
        e = f"{atom()} {op} {atom()}"
        if rng.random() < 0.15:
            e = f"({e}) / {rng.choice([2, 3, -2])}"
        if rng.random() < 0.1:
            e = f"({e}) mod 2"
        return e

    lines = []
    for i in range(rng.randint(1, 6)):
        if rng.random() < 0.5:
            lines.append(f"  ev ({expr()});")
        else:
            v = f"t{i}"
            lines.append(f"  let {v} = {expr()} in")
            vars_.append(v)
    lines.append(f"  {expr()}")
    params = " ".join(f"({p}:int)" for p in ps)
    return f"let main {params} =\n" + "\n".join(lines) + "\n"


def generated_programs(count: int = 100, seed: int = 0):
    rng = random.Random(seed)
    return [lang.parse_program(straight_line_program(rng)) for _ in range(count)]


def _history(value):
    # (v, (q, (acc, history))) with history = [q1, acc1, q2, acc2, ...]
    q = value.snd.fst
    acc, hist = value.snd.snd.fst, value.snd.snd.snd
    items = hist.items
    return q, acc, [(items[i], items[i + 1]) for i in range(0, len(items), 2)]


def translation_check(name, program, a, grid, seeds, fuel=1_000_000):
    """Differential comparison of one program against its translations."""
    checks, fails = 0, []
    tps = [translate.tuple_translate(program),
           translate.tuple_translate(program, a, "product")]
    cps = a.k == 1
    if cps:
        tps += [translate.cps_translate(program, a), translate.cps_translate(program, a, True)]
    for tp in tps:
        checks += 1
        if translate.contains_ev(tp.term):
            fails.append(f"{name}: {tp.mode} output contains ev")
        if not lang.same_shape(lang.parse_expr(translate.render_source(tp)), tp.term):
            fails.append(f"{name}: {tp.mode} render does not round-trip")
    for ins in itertools.product(grid, repeat=lang.main_arity(program)):
        for seed in seeds:
            d = lang.eval_program(program, ins, fuel=fuel, nondet_seed=seed)
            outs = [translate.run_translated(t, ins, fuel=20 * fuel, nondet_seed=seed)
                    for t in tps]
            checks += 1
            if type(d) is not lang.Finished:
                if type(outs[0]) is not type(d) or (type(d) is lang.Stuck
                                                    and outs[0].reason != d.reason):
                    fails.append(f"{name}{ins}/{seed}: status {d} vs {outs[0]}")
                continue
            if outs[0] != lang.Finished(lang.PairV(d.value, lang.SeqV(d.trace)), ()):
                fails.append(f"{name}{ins}/{seed}: seq {outs[0]} vs {d}")
            r = saa.run(a, d.trace)
            prod = outs[1]
            if (type(prod) is not lang.Finished or prod.value.fst != d.value
                    or translate.decode_state(a, prod.value.snd) != r.final):
                fails.append(f"{name}{ins}/{seed}: product {prod} vs {r.final}")
            if not cps:
                continue
            ok = not r.reached_error and r.always_assert_violated is None and r.final_assert_holds
            if ok != (type(outs[2]) is lang.Finished):
                fails.append(f"{name}{ins}/{seed}: cps verdict {outs[2]} vs {r}")
            obs = outs[3]
            if type(obs) is not lang.Finished:
                fails.append(f"{name}{ins}/{seed}: cps observe {obs}")
                continue
            q, acc, hist = _history(obs.value)
            got = [(a.states[hq], (ha,)) for hq, ha in hist]
            want = [(s.q, s.acc) for s in r.states[1:]]
            if got != want or obs.value.fst != d.value or (a.states[q], (acc,)) != (r.final.q, r.final.acc):
                fails.append(f"{name}{ins}/{seed}: cps prefixes {got} vs {want}")
    return checks, fails


def ev_step_check(a: saa.Saa, grid=range(-4, 5)):
    """The embedded step function agrees with the concrete automaton step."""
    step = translate.embed_ev_step(a)
    checks, fails = 0, []
    for q in a.states:
        for acc in itertools.product(grid, repeat=a.k):
            for v in grid:
                out = lang.eval_program(step, [a.index(q), *acc, v], fuel=100_000)
                want = saa.step_concrete(a, saa.SaaState(q, acc), v)
                checks += 1
                if type(out) is not lang.Finished or translate.decode_state(a, out.value) != want:
                    fails.append(f"ev_step {q},{acc} on {v}: {out} vs {want}")
    return checks, fails


def translation_preservation(grid=range(-3, 4), seeds=(0, 1), generated: int = 100):
    checks, fails = 0, []
    pairs = corpus_pairs()
    for name, p, a in pairs:
        n, f = translation_check(name, p, a, grid, seeds)
        checks, fails = checks + n, fails + f
    specs = [a for _, _, a in pairs if a.k == 1]
    for i, p in enumerate(generated_programs(generated)):
        n, f = translation_check(f"gen{i}", p, specs[i % len(specs)], range(-2, 3), seeds)
        checks, fails = checks + n, fails + f
    seen = set()
    for name, _, a in pairs:
        if a.source in seen:
            continue
        seen.add(a.source)
        n, f = ev_step_check(a)
        checks, fails = checks + n, fails + f
    return checks, fails


def golden_dir() -> Path:
    return Path(__file__).parent / "golden"
