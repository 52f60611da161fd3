"""Automaton-indexed effects: a map from control states to base abstractions.

An :class:`Effect` over an SAA pairs every control state ``q`` with an
element of a numerical domain describing the accumulators reached in ``q``
together with the program variables in scope.  The one-event step
:func:`extend` fuses an effect with the abstraction of an emitted value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import absdom
from .absdom import (
    HAVOC, NU, UNKNOWN, BaseAbstract, Cond, NotSimple, ScopeError, compile_cond,
    compile_expr, conj, negate,
)
from .lang import Const, Term, subst
from .saa import Saa, acc_names, state_pred_var

__all__ = [
    "Effect", "SafetyReport", "initial_effect", "bottom_effect", "extend",
    "leq", "join", "widen", "widen_thresholds", "strengthen", "project_var",
    "rename_var", "check_safety", "assertion_cond", "render_table", "IN_VAR",
]

IN_VAR = "$in"


def _prime(x: str) -> str:
    return f"${x}'"


@dataclass(frozen=True, eq=False)
class Effect:
    saa: Saa
    scope: tuple[str, ...]
    tag: str
    map: Mapping[str, BaseAbstract]

    def __post_init__(self):
        if NU in self.scope:
            raise ScopeError("effects do not carry ν")
        for q in self.saa.states:
            b = self.map.get(q)
            if b is None:
                raise ScopeError(f"effect misses state {q}")
            if b.scope != self.scope or b.tag != self.tag:
                raise ScopeError(f"state {q}: scope/domain mismatch")

    def __getitem__(self, q: str) -> BaseAbstract:
        return self.map[q]

    def is_bot(self) -> bool:
        return all(b.is_bot() for b in self.map.values())

    def items(self):
        return [(q, self.map[q]) for q in self.saa.states]

    def pointwise(self, f) -> "Effect":
        return Effect(self.saa, self.scope, self.tag, {q: f(b) for q, b in self.map.items()})

    def reshape(self, scope: Sequence[str]) -> "Effect":
        scope = tuple(scope)
        if scope == self.scope:
            return self
        return Effect(self.saa, scope, self.tag, {q: b.reshape(scope) for q, b in self.map.items()})

    def joined(self) -> BaseAbstract:
        """The join over all control states."""
        out = absdom.bot(self.scope, self.tag)
        for _, b in self.items():
            out = out.join(b)
        return out

    def equal(self, o: "Effect") -> bool:
        return leq(self, o) and leq(o, self)

    def __str__(self) -> str:
        return render_table(self)


@dataclass
class SafetyReport:
    safe: bool
    offending: list = field(default_factory=list)           # (location, q, β)
    assertion_failures: list = field(default_factory=list)  # (kind, location, q, β)


def _scope_with_accs(a: Saa, scope: Iterable[str]) -> tuple[str, ...]:
    scope = tuple(x for x in scope if x != NU)
    accs = acc_names(a.k)
    return tuple(x for x in scope if x not in accs) + accs


def bottom_effect(a: Saa, scope: Sequence[str], tag: str = "octagon") -> Effect:
    scope = tuple(scope)
    b = absdom.bot(scope, tag)
    return Effect(a, scope, tag, {q: b for q in a.states})


def initial_effect(a: Saa, scope: Sequence[str] = (), tag: str = "octagon") -> Effect:
    """``q0`` pins the accumulators to their initial values; other states are ⊥."""
    scope = _scope_with_accs(a, scope)
    b0 = absdom.top(scope, tag)
    for x, v in zip(acc_names(a.k), a.a0):
        b0 = b0.test(absdom.eq(absdom.Lin.var(x), absdom.Lin.of(v)))
    bot = absdom.bot(scope, tag)
    return Effect(a, scope, tag, {q: (b0 if q == a.q0 else bot) for q in a.states})


# ---------------------------------------------------------------- extension

def _name_of(a: Saa):
    accs = set(acc_names(a.k))

    def name_of(x: str):
        if x == "v":
            return IN_VAR
        return x if x in accs else None
    return name_of


def _compiled(a: Saa):
    """Per source state: (effective guard, updates, dst) in declaration order."""
    cache = a.__dict__.get("_compiled")
    if cache is not None:
        return cache
    name_of = _name_of(a)
    cache = {}
    for q in a.states:
        rows = []
        earlier: list[Cond] = []
        for t in a.outgoing(q):
            if t.otherwise:
                g = absdom.TRUE
            else:
                try:
                    g = compile_cond(t.guard, name_of)
                except NotSimple:
                    g = UNKNOWN
            eff = conj(g, *(negate(e) for e in earlier))
            earlier.append(g)
            ups = []
            for u in t.update:
                try:
                    ups.append(compile_expr(u, name_of))
                except NotSimple:
                    ups.append(HAVOC)
            rows.append((eff, tuple(ups), t.dst))
        cache[q] = rows
    object.__setattr__(a, "_compiled", cache)
    return cache


def extend(eff: Effect, event: BaseAbstract) -> Effect:
    """The effect after the automaton consumes one event abstracted by ``event``.

    ``event`` ranges over program variables plus ``ν`` (the emitted value);
    its program variables must belong to the effect's scope.
    """
    a = eff.saa
    if event.tag != eff.tag:
        raise ScopeError(f"domain mismatch: {event.tag} vs {eff.tag}")
    accs = acc_names(a.k)
    extra = [x for x in event.scope if x != NU and x not in eff.scope]
    if extra or any(x in accs for x in event.scope):
        raise ScopeError(f"event scope {event.scope} does not fit effect scope {eff.scope}")
    primes = tuple(_prime(x) for x in accs)
    fused = eff.scope + (IN_VAR,) + primes
    if NU in event.scope:
        ev = event.rename(NU, IN_VAR).reshape(fused)
    else:
        ev = event.reshape(fused)
    out = {q: absdom.bot(eff.scope, eff.tag) for q in a.states}
    if ev.is_bot():
        return Effect(a, eff.scope, eff.tag, out)
    table = _compiled(a)
    for q in a.states:
        src = eff.map[q]
        if src.is_bot():
            continue
        rows = table[q]
        if not rows:  # sink
            out[q] = out[q].join(src)
            continue
        base = src.reshape(fused).meet(ev)
        if base.is_bot():
            continue
        for g, ups, dst in rows:
            b = base.test(g)
            if b.is_bot():
                continue
            for p, u in zip(primes, ups):
                b = b.assign(p, u)
            b = _swap_primes(b.project_many(accs + (IN_VAR,)), accs, primes)
            out[dst] = out[dst].join(b.reshape(eff.scope))
    return Effect(a, eff.scope, eff.tag, out)


def _swap_primes(b: BaseAbstract, accs, primes) -> BaseAbstract:
    # accumulators were projected; move the primed values into their slots
    keep = [x for x in b.scope if x not in accs]
    b = b.reshape(keep)
    return b.rename_many(dict(zip(primes, accs)))


# ---------------------------------------------------------------- lattice

def _check(e1: Effect, e2: Effect):
    if e1.saa is not e2.saa and e1.saa != e2.saa:
        raise ScopeError("effects over different automata")
    if e1.scope != e2.scope or e1.tag != e2.tag:
        raise ScopeError(f"effect mismatch: {e1.scope}/{e1.tag} vs {e2.scope}/{e2.tag}")


def leq(e1: Effect, e2: Effect) -> bool:
    _check(e1, e2)
    return all(e1.map[q].leq(e2.map[q]) for q in e1.saa.states)


def join(e1: Effect, e2: Effect) -> Effect:
    _check(e1, e2)
    return Effect(e1.saa, e1.scope, e1.tag, {q: e1.map[q].join(e2.map[q]) for q in e1.saa.states})


def meet(e1: Effect, e2: Effect) -> Effect:
    _check(e1, e2)
    return Effect(e1.saa, e1.scope, e1.tag, {q: e1.map[q].meet(e2.map[q]) for q in e1.saa.states})


def widen(e1: Effect, e2: Effect) -> Effect:
    return widen_thresholds(e1, e2, ())


def widen_thresholds(e1: Effect, e2: Effect, thresholds: Iterable[Cond]) -> Effect:
    _check(e1, e2)
    th = list(thresholds)
    return Effect(e1.saa, e1.scope, e1.tag,
                  {q: e1.map[q].widen(e2.map[q], th) for q in e1.saa.states})


def strengthen(eff: Effect, env: BaseAbstract) -> Effect:
    """Meet every state with the constraints ``env`` places on shared variables."""
    if env.tag != eff.tag:
        raise ScopeError("domain mismatch")
    e = env.reshape(eff.scope)
    return eff.pointwise(lambda b: b.meet(e))


def project_var(eff: Effect, x: str) -> Effect:
    if x not in eff.scope:
        return eff
    return eff.pointwise(lambda b: b.project(x))


def rename_var(eff: Effect, x: str, y: str) -> Effect:
    if x == y or x not in eff.scope:
        return eff
    if y in eff.scope:
        raise ScopeError(f"name collision: {y}")
    scope = tuple(y if z == x else z for z in eff.scope)
    return Effect(eff.saa, scope, eff.tag, {q: b.rename(x, y) for q, b in eff.map.items()})


# ---------------------------------------------------------------- checking

def assertion_cond(a: Saa, pred: Term, q: str) -> Cond:
    """The assertion ``pred`` specialised to control state ``q``.

    Returns UNKNOWN when the assertion leaves the linear fragment.
    """
    t = pred
    for s in a.states:
        t = subst(t, state_pred_var(s), Const(-1, s == q))
    accs = set(acc_names(a.k))
    try:
        return compile_cond(t, lambda x: x if x in accs else None)
    except NotSimple:
        return UNKNOWN


def _entails(b: BaseAbstract, c: Cond) -> bool:
    if b.is_bot():
        return True
    if c is UNKNOWN:
        return False
    return b.entails(c)


def check_safety(effects: Mapping[object, Effect], a: Saa, exit_loc: object = "exit") -> SafetyReport:
    """Error states must be ⊥ everywhere; ``assert_always`` must hold after
    every event and ``assert_final`` at ``exit_loc``."""
    rep = SafetyReport(True)
    for loc in sorted(effects, key=repr):
        eff = effects[loc]
        for q, b in eff.items():
            if b.is_bot():
                continue
            if q in a.errors:
                rep.offending.append((loc, q, b))
            if a.assert_always is not None and loc != exit_loc:
                if not _entails(b, assertion_cond(a, a.assert_always, q)):
                    rep.assertion_failures.append(("always", loc, q, b))
            if a.assert_final is not None and loc == exit_loc:
                if not _entails(b, assertion_cond(a, a.assert_final, q)):
                    rep.assertion_failures.append(("final", loc, q, b))
    rep.safe = not rep.offending and not rep.assertion_failures
    return rep


def render_table(eff: Effect) -> str:
    width = max(len(q) for q in eff.saa.states)
    return "\n".join(f"{q.ljust(width)} ↦ {b}" for q, b in eff.items())
