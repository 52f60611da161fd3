"""Source-to-source translations that remove ``ev``.

Three target shapes are produced, all executable by :func:`lang.eval_program`:

``seq``
    the tuple encoding: every expression becomes a function of the event
    sequence so far and returns ``(value, sequence)``.  ``ev e`` appends to
    the sequence with the ``++`` primitive.
``product``
    the same encoding, but the sequence is replaced by the automaton
    configuration ``(q, accs)`` and ``ev`` takes one step of an inlined
    ``ev_step`` function.
``cps``
    continuation-passing style for single-accumulator automata.  Every
    continuation receives ``q``, ``acc`` and the value (in that order);
    ``ev`` calls an embedded step function and the final continuation
    asserts the final property.

Generated binders start with ``$``, which source programs never use, so no
capture is possible, and ``parse_expr(render_source(p))`` has the same
shape as ``p.term``.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lang
from .lang import (
    App, Assert, BinOp, Const, Ev, If, Lam, Let, LetPair, LetRec, NodeIds,
    Nondet, Pair, PairV, Proj, SeqV, Term, UnOp, Var,
)
from .saa import Saa, SaaState, acc_names, state_pred_var

__all__ = [
    "TranslatedProgram", "TranslationError", "tuple_translate", "cps_translate",
    "embed_ev_step", "render_source", "run_translated", "decode_state",
    "contains_ev", "MODES",
]

MODES = ("seq", "product", "cps")


class TranslationError(ValueError):
    pass


@dataclass(frozen=True)
class TranslatedProgram:
    """A closed, ``ev``-free term taking ``arity`` integer inputs.

    Result values: ``seq`` gives ``(v, events)``; ``product`` gives
    ``(v, state)``; ``cps`` gives ``(v, (q, acc))``, where in observe mode
    ``acc`` is ``(acc, history)`` and the history lists ``q, acc`` after
    every event.
    """

    term: Term
    mode: str
    arity: int
    saa: Saa | None = None
    observe: bool = False

    def source(self) -> str:
        return render_source(self)


class _B:
    """Term builder with a private NodeId supply and fresh-name counter."""

    def __init__(self):
        self.ids = NodeIds()
        self.n = 0

    def fresh(self, base: str) -> str:
        self.n += 1
        return f"${base}{self.n}"

    def c(self, v) -> Term:
        return Const(self.ids(), v)

    def v(self, x: str) -> Var:
        return Var(self.ids(), x)

    def lam(self, params, body: Term) -> Term:
        for x in reversed(list(params)):
            body = Lam(self.ids(), x, body)
        return body

    def app(self, f: Term, *args: Term) -> Term:
        for a in args:
            f = App(self.ids(), f, a)
        return f

    def let(self, x: str, e: Term, body: Term) -> Term:
        return Let(self.ids(), x, e, body)

    def letpair(self, x: str, y: str, e: Term, body: Term) -> Term:
        return LetPair(self.ids(), x, y, e, body)

    def pair(self, a: Term, b: Term) -> Term:
        return Pair(self.ids(), a, b)

    def bin(self, op: str, a: Term, b: Term) -> Term:
        return BinOp(self.ids(), op, a, b)

    def if_(self, c: Term, t: Term, e: Term) -> Term:
        return If(self.ids(), c, t, e)

    def copy(self, t: Term) -> Term:
        """Re-number a term."""
        cls = type(t)
        if cls is Const:
            return self.c(t.value)
        if cls is Var:
            return self.v(t.name)
        if cls is Nondet:
            return Nondet(self.ids())
        if cls is Lam:
            return Lam(self.ids(), t.param, self.copy(t.body))
        if cls is App:
            return App(self.ids(), self.copy(t.fn), self.copy(t.arg))
        if cls is Ev:
            return Ev(self.ids(), self.copy(t.arg))
        if cls is Assert:
            return Assert(self.ids(), self.copy(t.arg))
        if cls is UnOp:
            return UnOp(self.ids(), t.op, self.copy(t.arg))
        if cls is Proj:
            return Proj(self.ids(), t.index, self.copy(t.arg))
        if cls is If:
            return If(self.ids(), self.copy(t.cond), self.copy(t.then), self.copy(t.else_))
        if cls is BinOp:
            return BinOp(self.ids(), t.op, self.copy(t.left), self.copy(t.right))
        if cls is Pair:
            return Pair(self.ids(), self.copy(t.left), self.copy(t.right))
        if cls is Let:
            return Let(self.ids(), t.name, self.copy(t.bound), self.copy(t.body))
        if cls is LetRec:
            return LetRec(self.ids(), t.name, self.copy(t.fn), self.copy(t.body))
        if cls is LetPair:
            return LetPair(self.ids(), t.left, t.right, self.copy(t.bound), self.copy(t.body))
        raise TypeError(t)


_PURE = (Const, Var, Nondet, BinOp, UnOp, If, Assert, Pair, Proj)


def _pure(t: Term) -> bool:
    """No events, calls or closures anywhere inside."""
    return all(type(n) in _PURE for n in lang.iter_nodes(t))


def contains_ev(t: Term) -> bool:
    return any(type(n) is Ev for n in lang.iter_nodes(t))


def _check_names(program: Term):
    for n in lang.iter_nodes(program):
        names = ()
        if type(n) is Var:
            names = (n.name,)
        elif type(n) in (Lam,):
            names = (n.param,)
        elif type(n) in (Let, LetRec):
            names = (n.name,)
        elif type(n) is LetPair:
            names = (n.left, n.right)
        for x in names:
            if x.startswith("$"):
                raise TranslationError(f"identifier {x!r} uses the reserved '$' prefix")


# ---------------------------------------------------------------- ev_step

def _state_tuple(b: _B, q: Term, accs: list[Term]) -> Term:
    """``(q, accs)`` with the accumulators right-nested."""
    r = accs[-1]
    for x in reversed(accs[:-1]):
        r = b.pair(x, r)
    return b.pair(q, r)


def _unpack_state(b: _B, s: Term, qv: str, avs: list[str], body: Term) -> Term:
    r = b.fresh("r")
    if len(avs) == 1:
        return b.letpair(qv, avs[0], s, body)
    inner = body
    for i in range(len(avs) - 2, -1, -1):
        src = r if i == 0 else f"{r}_{i}"
        rest = avs[-1] if i == len(avs) - 2 else f"{r}_{i + 1}"
        inner = b.letpair(avs[i], rest, b.v(src), inner)
    return b.letpair(qv, r, s, inner)


def _step_term(b: _B, a: Saa) -> Term:
    accs = list(acc_names(a.k))
    keep = _state_tuple(b, b.v("q"), [b.v(x) for x in accs])
    body = keep
    for i in range(len(a.states) - 1, -1, -1):
        ts = a.outgoing(a.states[i])
        if not ts:
            continue
        chain = _state_tuple(b, b.v("q"), [b.v(x) for x in accs])
        for t in reversed(ts):
            res = _state_tuple(b, b.c(a.index(t.dst)), [b.copy(u) for u in t.update])
            chain = res if t.otherwise else b.if_(b.copy(t.guard), res, chain)
        body = b.if_(b.bin("=", b.v("q"), b.c(i)), chain, body)
    return b.lam(["q", *accs, "v"], body)


def embed_ev_step(a: Saa) -> Term:
    """``fun q acc0 .. v -> (q', accs')``: first matching transition wins,
    states are numbered by declaration order, and a state without
    transitions keeps its configuration."""
    return _step_term(_B(), a)


def decode_state(a: Saa, value) -> SaaState:
    """Read a configuration tuple produced by the product or CPS forms."""
    if type(value) is not PairV:
        raise TranslationError(f"not a configuration: {value!r}")
    q, r = value.fst, value.snd
    accs = []
    for _ in range(a.k - 1):
        accs.append(r.fst)
        r = r.snd
    accs.append(r)
    return SaaState(a.states[q], tuple(accs))


def _assertion(b: _B, a: Saa, pred: Term | None, qv: str) -> Term | None:
    if pred is None:
        return None
    t = b.copy(pred)
    for s in a.states:
        t = lang.subst(t, state_pred_var(s), b.bin("=", b.v(qv), b.c(a.index(s))))
    return t


def _not_error(b: _B, a: Saa, qv: str) -> Term | None:
    cond = None
    for s in a.states:
        if s in a.errors:
            c = b.bin("<>", b.v(qv), b.c(a.index(s)))
            cond = c if cond is None else b.bin("&&", cond, c)
    return cond


def _all(b: _B, *cs) -> Term | None:
    out = None
    for c in cs:
        if c is not None:
            out = c if out is None else b.bin("&&", out, c)
    return out


# ---------------------------------------------------------------- tuple

class _Tuple:
    def __init__(self, b: _B, ev_fn: str | None):
        self.b = b
        self.ev_fn = ev_fn  # None: append to the sequence

    def tr(self, e: Term, pi: Term) -> Term:
        b = self.b
        cls = type(e)
        if _pure(e):
            return b.pair(b.copy(e), pi)
        if cls is Lam:
            y = b.fresh("s")
            return b.pair(b.lam([e.param, y], self.tr(e.body, b.v(y))), pi)
        if cls is App:
            f, p1, x, p2 = b.fresh("f"), b.fresh("s"), b.fresh("x"), b.fresh("s")
            call = b.app(b.v(f), b.v(x), b.v(p2))
            return b.letpair(f, p1, self.tr(e.fn, pi),
                             b.letpair(x, p2, self.tr(e.arg, b.v(p1)), call))
        if cls is Ev:
            x, y = b.fresh("x"), b.fresh("s")
            if self.ev_fn is None:
                nxt = b.bin("++", b.v(y), b.v(x))
            else:
                nxt = b.app(b.v(self.ev_fn), b.v(y), b.v(x))
            return b.letpair(x, y, self.tr(e.arg, pi), b.pair(b.c(lang.UNIT), nxt))
        if cls is If:
            c, p = b.fresh("c"), b.fresh("s")
            return b.letpair(c, p, self.tr(e.cond, pi),
                             b.if_(b.v(c), self.tr(e.then, b.v(p)), self.tr(e.else_, b.v(p))))
        if cls is LetRec:
            y = b.fresh("s")
            fn = Lam(b.ids(), e.fn.param, b.lam([y], self.tr(e.fn.body, b.v(y))))
            return LetRec(b.ids(), e.name, fn, self.tr(e.body, pi))
        if cls is LetPair:
            p, q = b.fresh("x"), b.fresh("s")
            return b.letpair(p, q, self.tr(e.bound, pi),
                             b.letpair(e.left, e.right, b.v(p), self.tr(e.body, b.v(q))))
        if cls in (BinOp, Pair):
            x, p1, y, p2 = b.fresh("x"), b.fresh("s"), b.fresh("x"), b.fresh("s")
            if cls is BinOp:
                res = b.bin(e.op, b.v(x), b.v(y))
            else:
                res = b.pair(b.v(x), b.v(y))
            return b.letpair(x, p1, self.tr(e.left, pi),
                             b.letpair(y, p2, self.tr(e.right, b.v(p1)), b.pair(res, b.v(p2))))
        if cls in (UnOp, Proj, Assert):
            x, p = b.fresh("x"), b.fresh("s")
            if cls is UnOp:
                res = UnOp(b.ids(), e.op, b.v(x))
            elif cls is Proj:
                res = Proj(b.ids(), e.index, b.v(x))
            else:
                res = Assert(b.ids(), b.v(x))
            return b.letpair(x, p, self.tr(e.arg, pi), b.pair(res, b.v(p)))
        raise TranslationError(f"cannot translate {cls.__name__}")


def _apply_inputs_tuple(b: _B, body: Term, n: int) -> Term:
    """``fun i1 .. in -> let (m, s) = body in m i1 s ...`` threading the state."""
    ins = [b.fresh("i") for _ in range(n)]
    if n == 0:
        return body
    m, s = b.fresh("f"), b.fresh("s")
    tail: Term = b.app(b.v(m), b.v(ins[0]), b.v(s))
    for i in range(1, n):
        f2, s2 = b.fresh("f"), b.fresh("s")
        tail = b.letpair(f2, s2, tail, b.app(b.v(f2), b.v(ins[i]), b.v(s2)))
    return b.lam(ins, b.letpair(m, s, body, tail))


def tuple_translate(program: Term, a: Saa | None = None, mode: str = "seq") -> TranslatedProgram:
    """Tuple-encode ``program``.

    ``seq`` starts from the empty sequence ``[]``; ``product`` (which needs
    ``a``) starts from the automaton's initial configuration.
    """
    if mode not in ("seq", "product"):
        raise TranslationError(f"unknown tuple mode {mode!r}")
    if mode == "product" and a is None:
        raise TranslationError("product mode needs an automaton")
    _check_names(program)
    arity = lang.main_arity(program)
    b = _B()
    e = lang.desugar(program)
    if mode == "seq":
        body = _Tuple(b, None).tr(e, b.c(SeqV()))
        return TranslatedProgram(_apply_inputs_tuple(b, body, arity), "seq", arity)
    step, evf = "$step", "$ev"
    accs = list(acc_names(a.k))
    s, v = b.fresh("s"), b.fresh("v")
    qv, avs = b.fresh("q"), [b.fresh("a") for _ in accs]
    # the guard may ignore v, so force it to be an integer first
    call = b.let("_", b.bin("+", b.v(v), b.c(0)),
                 b.app(b.v(step), b.v(qv), *[b.v(x) for x in avs], b.v(v)))
    ev_def = b.lam([s, v], _unpack_state(b, b.v(s), qv, avs, call))
    init = _state_tuple(b, b.c(a.index(a.q0)), [b.c(x) for x in a.a0])
    body = _apply_inputs_tuple(b, _Tuple(b, evf).tr(e, init), arity)
    term = b.let(step, _step_term(b, a), b.let(evf, ev_def, body))
    return TranslatedProgram(term, "product", arity, a)


# ---------------------------------------------------------------- CPS

class _Cps:
    """One-pass CPS: a continuation is either a term or a meta-level
    function ``(q, acc, value) -> Term`` that is reified only when it has
    to be passed at run time."""

    def __init__(self, b: _B):
        self.b = b

    def reify(self, k) -> Term:
        if not callable(k):
            return k
        b = self.b
        q, acc, x = b.fresh("q"), b.fresh("a"), b.fresh("x")
        return b.lam([q, acc, x], k(q, acc, b.v(x)))

    def ret(self, k, q: str, acc: str, v: Term) -> Term:
        b = self.b
        if not callable(k):
            return b.app(k, b.v(q), b.v(acc), v)
        if type(v) in (Var, Const):
            return k(q, acc, v)
        # keep evaluation order: the value is computed before anything after it
        x = b.fresh("x")
        return b.let(x, v, k(q, acc, b.v(x)))

    def tr(self, e: Term, k, q: str, acc: str) -> Term:
        b = self.b
        cls = type(e)
        if _pure(e):
            return self.ret(k, q, acc, b.copy(e))
        if cls is Lam:
            kv, q2, a2 = b.fresh("k"), b.fresh("q"), b.fresh("a")
            fn = b.lam([e.param, kv, q2, a2], self.tr(e.body, b.v(kv), q2, a2))
            return self.ret(k, q, acc, fn)
        if cls is App:
            def after_fn(q1, a1, f):
                def after_arg(q2, a2, x):
                    return b.app(f, x, self.reify(k), b.v(q2), b.v(a2))
                return self.tr(e.arg, after_arg, q1, a1)
            return self.tr(e.fn, after_fn, q, acc)
        if cls is Ev:
            return self.tr(e.arg, lambda q1, a1, x: b.app(
                b.v("$ev"), self.reify(k), b.v(q1), b.v(a1), x), q, acc)
        if cls is If:
            if type(k) is not Var:
                kv = b.fresh("k")
                return b.let(kv, self.reify(k), self.tr(e, b.v(kv), q, acc))
            return self.tr(e.cond, lambda q1, a1, c: b.if_(
                c, self.tr(e.then, k, q1, a1), self.tr(e.else_, k, q1, a1)), q, acc)
        if cls is LetRec:
            kv, q2, a2 = b.fresh("k"), b.fresh("q"), b.fresh("a")
            fn = Lam(b.ids(), e.fn.param,
                     b.lam([kv, q2, a2], self.tr(e.fn.body, b.v(kv), q2, a2)))
            return LetRec(b.ids(), e.name, fn, self.tr(e.body, k, q, acc))
        if cls is LetPair:
            return self.tr(e.bound, lambda q1, a1, p: b.letpair(
                e.left, e.right, p, self.tr(e.body, k, q1, a1)), q, acc)
        if cls in (BinOp, Pair):
            def after_l(q1, a1, x):
                def after_r(q2, a2, y):
                    res = b.bin(e.op, x, y) if cls is BinOp else b.pair(x, y)
                    return self.ret(k, q2, a2, res)
                return self.tr(e.right, after_r, q1, a1)
            return self.tr(e.left, after_l, q, acc)
        if cls in (UnOp, Proj, Assert):
            def after(q1, a1, x):
                if cls is UnOp:
                    res = UnOp(b.ids(), e.op, x)
                elif cls is Proj:
                    res = Proj(b.ids(), e.index, x)
                else:
                    res = Assert(b.ids(), x)
                return self.ret(k, q1, a1, res)
            return self.tr(e.arg, after, q, acc)
        raise TranslationError(f"cannot translate {cls.__name__}")


def cps_translate(program: Term, a: Saa, observe: bool = False) -> TranslatedProgram:
    """CPS with the automaton configuration threaded through continuations.

    Assertions check that no error state is entered and that
    ``assert_always`` holds after every event; the final continuation also
    checks ``assert_final``.  With ``observe`` the assertions are dropped
    and every configuration reached is logged instead.
    """
    if a.k != 1:
        raise TranslationError("CPS export supports a single accumulator only")
    _check_names(program)
    arity = lang.main_arity(program)
    b = _B()
    e = lang.desugar(program)
    c = _Cps(b)

    # let $ev = fun k q acc v -> let (q', acc') = $step q acc v in ... k q' acc' ()
    k, q, acc, v = b.fresh("k"), b.fresh("q"), b.fresh("a"), b.fresh("v")
    q2, a2 = b.fresh("q"), b.fresh("a")
    if observe:
        av, hist = b.fresh("a"), b.fresh("h")
        log = b.bin("++", b.bin("++", b.v(hist), b.v(q2)), b.v(a2))
        cont = b.app(b.v(k), b.v(q2), b.pair(b.v(a2), log), b.c(lang.UNIT))
        stepped = b.letpair(q2, a2, b.app(b.v("$step"), b.v(q), b.v(av), b.v(v)), cont)
        ev_body = b.letpair(av, hist, b.v(acc), stepped)
    else:
        cont = b.app(b.v(k), b.v(q2), b.v(a2), b.c(lang.UNIT))
        chk = _all(b, _not_error(b, a, q2), _assertion(b, a, a.assert_always, q2))
        if chk is not None:
            cont = b.let("_", Assert(b.ids(), lang.subst(chk, "acc0", b.v(a2))), cont)
        ev_body = b.letpair(q2, a2, b.app(b.v("$step"), b.v(q), b.v(acc), b.v(v)), cont)
    ev_body = b.let("_", b.bin("+", b.v(v), b.c(0)), ev_body)
    ev_def = b.lam([k, q, acc, v], ev_body)

    # terminal continuation: fun q acc x -> assert (...); (x, (q, acc))
    def final(qf, af, x):
        out = b.pair(x, b.pair(b.v(qf), b.v(af)))
        if observe:
            return out
        chk = _all(b, _not_error(b, a, qf), _assertion(b, a, a.assert_final, qf))
        if chk is None:
            return out
        return b.let("_", Assert(b.ids(), lang.subst(chk, "acc0", b.v(af))), out)

    ins = [b.fresh("i") for _ in range(arity)]
    kont = final
    for i in reversed(ins):
        def apply_next(q1, a1, f, i=i, nxt=kont):
            return b.app(f, b.v(i), c.reify(nxt), b.v(q1), b.v(a1))
        kont = apply_next
    q0, a0 = b.fresh("q"), b.fresh("a")
    init_acc = b.c(a.a0[0])
    if observe:
        init_acc = b.pair(init_acc, b.c(SeqV()))
    run = b.let(q0, b.c(a.index(a.q0)), b.let(a0, init_acc, c.tr(e, kont, q0, a0)))
    term = b.let("$step", _step_term(b, a), b.let("$ev", ev_def, b.lam(ins, run)))
    return TranslatedProgram(term, "cps", arity, a, observe)


# ---------------------------------------------------------------- running

def render_source(p: TranslatedProgram, dialect: str = "ocaml") -> str:
    if dialect != "ocaml":
        raise TranslationError(f"unknown dialect {dialect!r}")
    return lang.render(p.term) + "\n"


def run_translated(p: TranslatedProgram, inputs=(), fuel: int = 10_000_000,
                   nondet_seed: int = 0, nondet_range=(-32, 32)):
    return lang.eval_program(p.term, inputs, fuel=fuel, nondet_seed=nondet_seed,
                             nondet_range=nondet_range)
