"""Symbolic accumulator automata: parsing, validation and concrete runs.

Spec text format::

    states: q0 q1 qerr;
    acc: 1 init (0);
    initial: q0;
    errors: qerr;
    from q0 when v > 0 update (v) goto q1;
    from q0 otherwise goto qerr;
    assert_final: in(q1) && acc0 >= 1;

Transitions are tried in declaration order; the first one whose guard holds
fires.  ``otherwise`` holds whenever the earlier guards of the same state
failed, so a state with an ``otherwise`` transition is total.  An omitted
``update`` keeps the accumulators.  ``acc`` abbreviates ``acc0``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import lang
from .lang import BinOp, Const, Term, UnOp, Var

__all__ = [
    "Saa", "Transition", "SaaState", "SaaRunOutcome", "SpecError",
    "parse_spec", "validate", "lint", "step_concrete", "run", "eval_pure",
    "acc_names", "state_pred_var",
]


class SpecError(ValueError):
    def __init__(self, msg: str, violations: Sequence[str] = ()):
        super().__init__(msg)
        self.violations = list(violations)


def acc_names(k: int) -> tuple[str, ...]:
    return tuple(f"acc{i}" for i in range(k))


def state_pred_var(q: str) -> str:
    """Variable standing for the predicate ``in(q)`` inside assertions."""
    return f"$in_{q}"


@dataclass(frozen=True)
class Transition:
    src: str
    guard: Term | None  # None = otherwise
    update: tuple[Term, ...]
    dst: str
    text: str = ""

    @property
    def otherwise(self) -> bool:
        return self.guard is None


@dataclass(frozen=True)
class Saa:
    states: tuple[str, ...]
    k: int
    q0: str
    a0: tuple[int, ...]
    errors: frozenset
    transitions: tuple[Transition, ...]
    assert_always: Term | None = None
    assert_final: Term | None = None
    source: str = field(default="", compare=False)

    def outgoing(self, q: str) -> tuple[Transition, ...]:
        cache = self.__dict__.get("_out")
        if cache is None:
            cache = {s: tuple(t for t in self.transitions if t.src == s) for s in self.states}
            object.__setattr__(self, "_out", cache)
        return cache.get(q, ())

    def index(self, q: str) -> int:
        return self.states.index(q)

    @property
    def acc_vars(self) -> tuple[str, ...]:
        return acc_names(self.k)


@dataclass(frozen=True)
class SaaState:
    q: str
    acc: tuple[int, ...]


@dataclass(frozen=True)
class SaaRunOutcome:
    final: SaaState
    reached_error: bool
    first_error: int | None  # number of events consumed when first in an error state
    always_assert_violated: int | None
    final_assert_holds: bool
    states: tuple[SaaState, ...] = ()


# ---------------------------------------------------------------- expressions

class _EvalErr(Exception):
    pass


def eval_pure(t: Term, env: dict) -> int | bool:
    """Evaluate a guard/update/assertion term over integers and booleans."""
    cls = type(t)
    if cls is Const:
        if type(t.value) not in (int, bool):
            raise _EvalErr("bad constant")
        return t.value
    if cls is Var:
        try:
            return env[t.name]
        except KeyError:
            raise _EvalErr(f"unbound variable {t.name}") from None
    if cls is UnOp:
        a = eval_pure(t.arg, env)
        if t.op == "not":
            if type(a) is not bool:
                raise _EvalErr("not on non-boolean")
            return not a
        if type(a) is not int:
            raise _EvalErr("negation of non-integer")
        return -a
    if cls is BinOp:
        if t.op == "&&":
            a = eval_pure(t.left, env)
            return a and eval_pure(t.right, env)
        if t.op == "||":
            a = eval_pure(t.left, env)
            return a or eval_pure(t.right, env)
        a, b = eval_pure(t.left, env), eval_pure(t.right, env)
        try:
            return lang._binop(t.op, a, b)
        except lang._StuckErr as e:
            raise _EvalErr(str(e)) from None
    if cls is lang.If:
        c = eval_pure(t.cond, env)
        return eval_pure(t.then if c else t.else_, env)
    raise _EvalErr(f"unsupported construct {cls.__name__}")


def _vars_of(t: Term) -> set[str]:
    return set(lang.free_vars(t))


def _has_div(t: Term) -> bool:
    return any(type(n) is BinOp and n.op in ("/", "mod") for n in lang.iter_nodes(t))


def _bad_divisors(t: Term) -> bool:
    for n in lang.iter_nodes(t):
        if type(n) is BinOp and n.op in ("/", "mod"):
            r = n.right
            if not (type(r) is Const and type(r.value) is int and r.value != 0):
                return True
    return False


def _allowed_node(n: Term) -> bool:
    return type(n) in (Const, Var, BinOp, UnOp, lang.If)


# ---------------------------------------------------------------- parsing

_STMT_RE = re.compile(r"^\s*([a-z_]+)\s*:(.*)$", re.S)
_FROM_RE = re.compile(
    r"^\s*from\s+(?P<src>[A-Za-z_]\w*)\s+"
    r"(?:(?P<otherwise>otherwise)|when\s+(?P<guard>.*?))\s*"
    r"(?:update\s*\((?P<update>.*)\))?\s*goto\s+(?P<dst>[A-Za-z_]\w*)\s*$",
    re.S,
)
_IN_RE = re.compile(r"\bin\s*\(\s*([A-Za-z_]\w*)\s*\)")


def _strip_comments(text: str) -> str:
    out, i, depth = [], 0, 0
    while i < len(text):
        if text.startswith("(*", i):
            depth += 1
            i += 2
        elif depth and text.startswith("*)", i):
            depth -= 1
            i += 2
        elif depth:
            i += 1
        elif text[i] == "#":
            j = text.find("\n", i)
            i = len(text) if j < 0 else j
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def _split_top(s: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _expr(text: str, ctx: str) -> Term:
    text = text.strip()
    text = re.sub(r"\bacc\b(?!\d)", "acc0", text)
    text = _IN_RE.sub(lambda m: state_pred_var(m.group(1)), text)
    try:
        t = lang.parse_expr(text)
    except lang.ParseError as e:
        raise SpecError(f"{ctx}: {e}") from None
    for n in lang.iter_nodes(t):
        if not _allowed_node(n):
            raise SpecError(f"{ctx}: unsupported construct in {text!r}")
    return t


def parse_spec(text: str) -> Saa:
    """Parse and validate an automaton specification."""
    body = _strip_comments(text)
    stmts = [s for s in (x.strip() for x in _split_top(body, ";")) if s]
    states: list[str] | None = None
    k, a0 = 1, None
    q0: str | None = None
    errors: list[str] = []
    trans: list[Transition] = []
    always = final = None
    for s in stmts:
        if s.startswith("from") and re.match(r"from\s", s):
            m = _FROM_RE.match(s)
            if not m:
                raise SpecError(f"malformed transition: {s!r}")
            guard = None if m.group("otherwise") else _expr(m.group("guard"), f"guard of {s!r}")
            upd_txt = m.group("update")
            upd = ()
            if upd_txt is not None:
                upd = tuple(_expr(u, f"update of {s!r}") for u in _split_top(upd_txt, ","))
            trans.append(Transition(m.group("src"), guard, upd, m.group("dst"), " ".join(s.split())))
            continue
        m = _STMT_RE.match(s)
        if not m:
            raise SpecError(f"malformed statement: {s!r}")
        key, val = m.group(1), m.group(2).strip()
        if key == "states":
            states = val.split()
        elif key == "acc":
            mm = re.match(r"^(\d+)\s*(?:init\s*\((.*)\))?$", val, re.S)
            if not mm:
                raise SpecError(f"malformed acc declaration: {val!r}")
            k = int(mm.group(1))
            if mm.group(2) is not None:
                try:
                    a0 = tuple(int(x) for x in mm.group(2).split(","))
                except ValueError:
                    raise SpecError(f"malformed initial accumulator: {val!r}") from None
        elif key == "initial":
            q0 = val
        elif key == "errors":
            errors = val.split()
        elif key == "assert_always":
            always = _expr(val, "assert_always")
        elif key == "assert_final":
            final = _expr(val, "assert_final")
        else:
            raise SpecError(f"unknown statement {key!r}")
    if states is None:
        raise SpecError("missing 'states:' declaration")
    if q0 is None:
        q0 = states[0] if states else ""
    if a0 is None:
        a0 = (0,) * k
    if k < 1:
        raise SpecError("accumulator arity must be at least 1")
    if len(a0) != k:
        raise SpecError(f"initial accumulator has {len(a0)} components, expected {k}")
    # normalise omitted updates to the identity
    ident = tuple(Var(-1, a) for a in acc_names(k))
    trans = [t if t.update else Transition(t.src, t.guard, ident, t.dst, t.text) for t in trans]
    saa = Saa(tuple(states), k, q0, tuple(a0), frozenset(errors), tuple(trans), always, final, text)
    bad = validate(saa)
    if bad:
        raise SpecError("invalid automaton: " + "; ".join(bad), bad)
    return saa


# ---------------------------------------------------------------- validation

def validate(a: Saa) -> list[str]:
    """Return the list of violations (empty when the automaton is well formed)."""
    out: list[str] = []
    qs = set(a.states)
    if len(qs) != len(a.states):
        out.append("duplicate state names")
    if a.q0 not in qs:
        out.append(f"initial state {a.q0!r} not declared")
    for e in sorted(a.errors):
        if e not in qs:
            out.append(f"error state {e!r} not declared")
    accs = set(acc_names(a.k))
    gvars = accs | {"v"}
    for i, t in enumerate(a.transitions):
        where = f"transition {i} ({t.src} -> {t.dst})"
        if t.src not in qs:
            out.append(f"{where}: unknown source state {t.src!r}")
        if t.dst not in qs:
            out.append(f"{where}: unknown target state {t.dst!r}")
        if t.src in a.errors and t.dst != t.src:
            out.append(f"{where}: error state not a sink ({t.src})")
        if t.guard is not None:
            extra = _vars_of(t.guard) - gvars
            if extra:
                out.append(f"{where}: unbound variable in guard: {', '.join(sorted(extra))}")
            if _bad_divisors(t.guard):
                out.append(f"{where}: guard divides by a non-constant or zero")
        if len(t.update) != a.k:
            out.append(f"{where}: update has {len(t.update)} components, expected {a.k}")
        for u in t.update:
            extra = _vars_of(u) - gvars
            if extra:
                out.append(f"{where}: unbound variable in update: {', '.join(sorted(extra))}")
            if _has_div(u):
                out.append(f"{where}: division in update")
    for q in a.states:
        if q in a.errors:
            continue
        if not any(t.otherwise for t in a.outgoing(q)):
            out.append(f"non-total state {q}: no 'otherwise' transition")
    pvars = accs | {state_pred_var(q) for q in a.states}
    for name, t in (("assert_always", a.assert_always), ("assert_final", a.assert_final)):
        if t is None:
            continue
        extra = _vars_of(t) - pvars
        if extra:
            pretty = sorted(x.replace("$in_", "in ") for x in extra)
            out.append(f"{name}: unbound variable {', '.join(pretty)}")
        if _bad_divisors(t):
            out.append(f"{name}: divides by a non-constant or zero")
    return out


def lint(a: Saa, bound: int = 6) -> list[str]:
    """Warnings: guards of one state that overlap on a small sample grid, and
    transitions made unreachable by an earlier ``otherwise``."""
    warn: list[str] = []
    names = ("v",) + acc_names(a.k)
    k_axes = min(a.k, 2)
    grid = list(itertools.product(range(-bound, bound + 1), repeat=1 + k_axes))
    for q in a.states:
        ts = a.outgoing(q)
        for i, t in enumerate(ts):
            if t.otherwise and i + 1 < len(ts):
                warn.append(f"state {q}: transitions after 'otherwise' are unreachable")
        guarded = [t for t in ts if not t.otherwise]
        for t1, t2 in itertools.combinations(guarded, 2):
            for pt in grid:
                env = dict(zip(names, pt + (0,) * (a.k - k_axes)))
                try:
                    if eval_pure(t1.guard, env) and eval_pure(t2.guard, env):
                        warn.append(f"state {q}: overlapping guards in {t1.text!r} and {t2.text!r}")
                        break
                except _EvalErr:
                    break
    return warn


# ---------------------------------------------------------------- running

def _env(a: Saa, acc: Sequence[int], v: int | None = None) -> dict:
    env = dict(zip(acc_names(a.k), acc))
    if v is not None:
        env["v"] = v
    return env


def step_concrete(a: Saa, s: SaaState, c: int) -> SaaState:
    """One automaton step on input ``c`` (first matching transition fires)."""
    ts = a.outgoing(s.q)
    if not ts and s.q in a.errors:
        return s
    env = _env(a, s.acc, c)
    for t in ts:
        try:
            fire = t.otherwise or eval_pure(t.guard, env)
            if fire:
                return SaaState(t.dst, tuple(eval_pure(u, env) for u in t.update))
        except _EvalErr as e:
            raise RuntimeError(f"guard/update evaluation failed in {t.text!r}: {e}") from None
    raise RuntimeError(f"no transition fired from {s.q} on input {c}")


def holds(a: Saa, pred: Term | None, s: SaaState) -> bool:
    if pred is None:
        return True
    env = _env(a, s.acc)
    for q in a.states:
        env[state_pred_var(q)] = (q == s.q)
    return bool(eval_pure(pred, env))


def run(a: Saa, trace: Iterable[int]) -> SaaRunOutcome:
    s = SaaState(a.q0, a.a0)
    seen = [s]
    first_err = 0 if s.q in a.errors else None
    first_always = None
    for i, c in enumerate(trace, start=1):
        s = step_concrete(a, s, c)
        seen.append(s)
        if first_err is None and s.q in a.errors:
            first_err = i
        if first_always is None and not holds(a, a.assert_always, s):
            first_always = i
    return SaaRunOutcome(s, first_err is not None, first_err, first_always,
                         holds(a, a.assert_final, s), tuple(seen))
