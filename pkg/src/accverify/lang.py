"""Source language: terms, parser, printer and a fuel-bounded interpreter.

The language is a small call-by-value lambda calculus with integer events
(``ev e``), conditionals, (recursive) let bindings, integer/boolean
primitives, assertions and a seeded ``nondet()``.  Pairs, projections and
event sequences (``[]`` and ``s ++ v``) exist only so that the output of the
translators in :mod:`accverify.translate` can be parsed and executed.

Every node carries a ``nid`` that is unique within one parsed program.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterator, Sequence

__all__ = [
    "Term", "Const", "Var", "Lam", "App", "Ev", "If", "Let", "LetRec", "BinOp",
    "UnOp", "Assert", "Nondet", "Pair", "Proj", "LetPair",
    "UNIT", "Unit", "Closure", "PairV", "SeqV", "Value",
    "Finished", "Diverged", "Stuck", "AssertionFailed", "EvalOutcome",
    "ParseError", "NodeIds", "parse_program", "parse_expr", "eval_program",
    "free_vars", "subst", "desugar", "render", "main_arity", "same_shape",
    "iter_nodes", "max_nid", "rename_apart", "lambda_chain", "app_spine",
    "ARITH_OPS", "CMP_OPS", "BOOL_OPS",
]

ARITH_OPS = ("+", "-", "*", "/", "mod")
CMP_OPS = ("<=", "<", ">=", ">", "=", "<>")
BOOL_OPS = ("&&", "||")


# ---------------------------------------------------------------- values

class Unit:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "()"

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()


@dataclass(eq=False)
class Closure:
    param: str
    body: "Term"
    env: dict
    lam_nid: int = -1

    def __repr__(self) -> str:
        return f"<fun {self.param}>"


@dataclass(frozen=True)
class PairV:
    fst: object
    snd: object

    def __repr__(self) -> str:
        return f"({self.fst!r}, {self.snd!r})"


@dataclass(frozen=True)
class SeqV:
    items: tuple = ()

    def __repr__(self) -> str:
        return "[" + "; ".join(map(str, self.items)) + "]"


Value = object  # int | bool | Unit | Closure | PairV | SeqV


# ---------------------------------------------------------------- terms

@dataclass(frozen=True)
class Term:
    nid: int


@dataclass(frozen=True)
class Const(Term):
    value: object


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Lam(Term):
    param: str
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Ev(Term):
    arg: Term


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    else_: Term


@dataclass(frozen=True)
class Let(Term):
    name: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class LetRec(Term):
    name: str
    fn: Lam
    body: Term


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class UnOp(Term):
    op: str  # "not" | "neg"
    arg: Term


@dataclass(frozen=True)
class Assert(Term):
    arg: Term


@dataclass(frozen=True)
class Nondet(Term):
    pass


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Proj(Term):
    index: int  # 0 = fst, 1 = snd
    arg: Term


@dataclass(frozen=True)
class LetPair(Term):
    left: str
    right: str
    bound: Term
    body: Term


def children(t: Term) -> tuple:
    cls = type(t)
    if cls in (Const, Var, Nondet):
        return ()
    if cls is Lam:
        return (t.body,)
    if cls is App:
        return (t.fn, t.arg)
    if cls in (Ev, Assert, UnOp, Proj):
        return (t.arg,)
    if cls is If:
        return (t.cond, t.then, t.else_)
    if cls is Let:
        return (t.bound, t.body)
    if cls is LetRec:
        return (t.fn, t.body)
    if cls in (BinOp, Pair):
        return (t.left, t.right)
    if cls is LetPair:
        return (t.bound, t.body)
    raise TypeError(f"not a term: {t!r}")


def iter_nodes(t: Term) -> Iterator[Term]:
    """Pre-order traversal."""
    stack = [t]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def max_nid(t: Term) -> int:
    return max(n.nid for n in iter_nodes(t))


class NodeIds:
    """Fresh NodeId supply."""

    def __init__(self, start: int = 0):
        self.next = start

    def __call__(self) -> int:
        n = self.next
        self.next += 1
        return n


# ---------------------------------------------------------------- lexer

class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg, self.line, self.col = msg, line, col


KEYWORDS = {
    "let", "rec", "in", "fun", "if", "then", "else", "ev", "assert", "nondet",
    "true", "false", "not", "mod", "fst", "snd", "begin", "end",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_'$]*)
  | (?P<sym>;;|->|==|!=|<>|<=|>=|&&|\|\||\+\+|[()\[\],;:=<>+\-*/])
""", re.VERBOSE)


@dataclass(frozen=True)
class Tok:
    kind: str  # int | ident | kw | sym | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(s: str):
        nonlocal line, col
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)

    while i < n:
        if text.startswith("(*", i):
            depth, j = 0, i
            while j < n:
                if text.startswith("(*", j):
                    depth += 1
                    j += 2
                elif text.startswith("*)", j):
                    depth -= 1
                    j += 2
                    if depth == 0:
                        break
                else:
                    j += 1
            if depth:
                raise ParseError("unterminated comment", line, col)
            advance(text[i:j])
            i = j
            continue
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        s = m.group()
        kind = m.lastgroup
        if kind != "ws":
            if kind == "ident":
                if s in KEYWORDS:
                    kind = "kw"
                elif s == "_":
                    kind = "sym"
            toks.append(Tok(kind, s, line, col))
        advance(s)
        i = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------- parser

_CMP = {"<=": "<=", "<": "<", ">=": ">=", ">": ">", "=": "=", "==": "=",
        "<>": "<>", "!=": "<>"}


class _Parser:
    def __init__(self, text: str, ids: NodeIds | None = None):
        self.toks = tokenize(text)
        self.pos = 0
        self.fresh = ids or NodeIds()

    # helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("kw", "sym")

    def eat(self, text: str) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        t = self.tok
        self.pos += 1
        return t

    def error(self, msg: str):
        t = self.tok
        found = t.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", t.line, t.col)

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error("expected identifier")
        self.pos += 1
        return t.text

    # binders and parameters
    def binder(self) -> str:
        if self.at("_"):
            self.pos += 1
            return "_"
        return self.ident()

    def params(self) -> list[str]:
        out: list[str] = []
        while True:
            t = self.tok
            if t.kind == "ident" or self.at("_"):
                out.append(self.binder())
            elif self.at("(") and self.peek().text == ")":
                self.pos += 2
                out.append("_")
            elif self.at("(") and (self.peek().kind == "ident" or self.peek().text == "_"):
                # (x : int) or (x y : int)
                save = self.pos
                self.pos += 1
                names = []
                while self.tok.kind == "ident" or self.at("_"):
                    names.append(self.binder())
                if self.at(":"):
                    self.pos += 1
                    self.type_annot()
                    self.eat(")")
                    out.extend(names)
                elif self.at(")") and len(names) == 1:
                    self.pos += 1
                    out.extend(names)
                else:
                    self.pos = save
                    break
            else:
                break
        return out

    def type_annot(self):
        # int | bool | unit, possibly with '*' and '->'; only skipped
        depth = 0
        while True:
            t = self.tok
            if t.kind == "eof":
                self.error("unterminated type annotation")
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                if depth == 0:
                    return
                depth -= 1
            elif t.text in ("=",) and depth == 0:
                return
            self.pos += 1

    def lams(self, names: list[str], body: Term) -> Term:
        for x in reversed(names):
            body = Lam(self.fresh(), x, body)
        return body

    # expressions
    def expr(self) -> Term:
        if self.at("let"):
            return self.let_expr()
        if self.at("fun"):
            nid = self.fresh()
            self.pos += 1
            ps = self.params()
            if not ps:
                self.error("expected parameter")
            self.eat("->")
            body = self.expr()
            # outermost lambda keeps the nid allocated first
            for x in reversed(ps[1:]):
                body = Lam(self.fresh(), x, body)
            return Lam(nid, ps[0], body)
        return self.seq_expr()

    def let_expr(self) -> Term:
        nid = self.fresh()
        self.eat("let")
        if self.at("rec"):
            self.pos += 1
            name = self.ident()
            ps = self.params()
            if not ps:
                self.error("let rec needs a function")
            self.eat("=")
            rhs = self.expr()
            self.eat("in")
            body = self.expr()
            fn = self.lams(ps, rhs)
            return LetRec(nid, name, fn, body)
        if self.at("(") and self.peek().kind in ("ident",) and self.peek(2).text == ",":
            self.pos += 1
            a = self.binder()
            self.eat(",")
            b = self.binder()
            self.eat(")")
            self.eat("=")
            rhs = self.expr()
            self.eat("in")
            body = self.expr()
            return LetPair(nid, a, b, rhs, body)
        if self.at("(") and self.peek().text == ")":
            self.pos += 2
            name = "_"
            ps: list[str] = []
        else:
            name = self.binder()
            ps = self.params()
        if self.at(":"):
            self.pos += 1
            self.type_annot()
        self.eat("=")
        rhs = self.expr()
        self.eat("in")
        body = self.expr()
        return Let(nid, name, self.lams(ps, rhs), body)

    def seq_expr(self) -> Term:
        first = self.if_expr()
        if self.at(";"):
            nid = self.fresh()
            self.pos += 1
            rest = self.expr()
            return Let(nid, "_", first, rest)
        return first

    def branch(self) -> Term:
        if self.at("let") or self.at("fun"):
            return self.expr()
        return self.if_expr()

    def if_expr(self) -> Term:
        if self.at("if"):
            nid = self.fresh()
            self.pos += 1
            c = self.expr()
            self.eat("then")
            t = self.branch()
            if self.at("else"):
                self.pos += 1
                e = self.branch()
            else:
                e = Const(self.fresh(), UNIT)
            return If(nid, c, t, e)
        return self.or_expr()

    def or_expr(self) -> Term:
        left = self.and_expr()
        if self.at("||"):
            nid = self.fresh()
            self.pos += 1
            return BinOp(nid, "||", left, self.or_expr())
        return left

    def and_expr(self) -> Term:
        left = self.cmp_expr()
        if self.at("&&"):
            nid = self.fresh()
            self.pos += 1
            return BinOp(nid, "&&", left, self.and_expr())
        return left

    def cmp_expr(self) -> Term:
        left = self.app_seq_expr()
        t = self.tok
        if t.kind == "sym" and t.text in _CMP:
            nid = self.fresh()
            self.pos += 1
            right = self.app_seq_expr()
            return BinOp(nid, _CMP[t.text], left, right)
        return left

    def app_seq_expr(self) -> Term:
        left = self.add_expr()
        while self.at("++"):
            nid = self.fresh()
            self.pos += 1
            left = BinOp(nid, "++", left, self.add_expr())
        return left

    def add_expr(self) -> Term:
        left = self.mul_expr()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            nid = self.fresh()
            self.pos += 1
            left = BinOp(nid, op, left, self.mul_expr())
        return left

    def mul_expr(self) -> Term:
        left = self.unary()
        while self.at("*") or self.at("/") or self.at("mod"):
            op = self.tok.text
            nid = self.fresh()
            self.pos += 1
            left = BinOp(nid, op, left, self.unary())
        return left

    def unary(self) -> Term:
        if self.at("-"):
            nid = self.fresh()
            self.pos += 1
            arg = self.unary()
            if type(arg) is Const and type(arg.value) is int:
                return Const(nid, -arg.value)
            return UnOp(nid, "neg", arg)
        return self.app_expr()

    def app_expr(self) -> Term:
        t = self.tok
        if t.kind == "kw" and t.text in ("ev", "assert", "not", "fst", "snd"):
            nid = self.fresh()
            self.pos += 1
            arg = self.atom()
            if t.text == "ev":
                head: Term = Ev(nid, arg)
            elif t.text == "assert":
                head = Assert(nid, arg)
            elif t.text == "not":
                head = UnOp(nid, "not", arg)
            else:
                head = Proj(nid, 0 if t.text == "fst" else 1, arg)
        else:
            head = self.atom()
        while self.starts_atom():
            nid = self.fresh()
            head = App(nid, head, self.atom())
        return head

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("int", "ident"):
            return True
        if t.kind == "kw":
            return t.text in ("true", "false", "nondet", "begin")
        return t.text in ("(", "[")

    def atom(self) -> Term:
        t = self.tok
        if t.kind == "int":
            self.pos += 1
            return Const(self.fresh(), int(t.text))
        if t.kind == "ident":
            self.pos += 1
            return Var(self.fresh(), t.text)
        if t.kind == "kw":
            if t.text in ("true", "false"):
                self.pos += 1
                return Const(self.fresh(), t.text == "true")
            if t.text == "nondet":
                nid = self.fresh()
                self.pos += 1
                self.eat("(")
                self.eat(")")
                return Nondet(nid)
            if t.text == "begin":
                self.pos += 1
                e = self.expr()
                self.eat("end")
                return e
        if self.at("["):
            nid = self.fresh()
            self.pos += 1
            self.eat("]")
            return Const(nid, SeqV(()))
        if self.at("("):
            self.pos += 1
            if self.at(")"):
                self.pos += 1
                return Const(self.fresh(), UNIT)
            e = self.expr()
            if self.at(","):
                nid = self.fresh()
                self.pos += 1
                r = self.expr()
                self.eat(")")
                return Pair(nid, e, r)
            if self.at(":"):
                self.pos += 1
                self.type_annot()
            self.eat(")")
            return e
        self.error("expected expression")

    # programs
    def program(self) -> Term:
        binds: list[tuple[int, bool, str, Term]] = []
        seen: set[str] = set()
        final: Term | None = None
        while self.tok.kind != "eof":
            while self.at(";;"):
                self.pos += 1
            if self.tok.kind == "eof":
                break
            if not self.at("let"):
                final = self.expr()
                while self.at(";;"):
                    self.pos += 1
                if self.tok.kind != "eof":
                    self.error("expected end of program")
                break
            save = self.pos
            nid = self.fresh()
            self.eat("let")
            is_rec = self.at("rec")
            if is_rec:
                self.pos += 1
            name_tok = self.tok
            if self.at("(") and self.peek().text == ")":
                self.pos += 2
                name, ps = "_", []
            else:
                name = self.binder()
                ps = self.params()
            if self.at(":"):
                self.pos += 1
                self.type_annot()
            self.eat("=")
            rhs = self.expr()
            if self.at("in"):
                # an expression-level let: restart as an expression
                self.pos = save
                final = self.expr()
                while self.at(";;"):
                    self.pos += 1
                if self.tok.kind != "eof":
                    self.error("expected end of program")
                break
            if name != "_" and name in seen:
                raise ParseError(f"duplicate top-level name {name!r}",
                                 name_tok.line, name_tok.col)
            seen.add(name)
            if is_rec and not ps:
                raise ParseError("let rec needs a function", name_tok.line, name_tok.col)
            binds.append((nid, is_rec, name, self.lams(ps, rhs)))
        if final is None:
            if not binds:
                self.error("empty program")
            last = [b for b in binds if b[2] != "_"]
            if not last:
                self.error("program has no entry point")
            final = Var(self.fresh(), last[-1][2])
        for nid, is_rec, name, rhs in reversed(binds):
            if is_rec:
                final = LetRec(nid, name, rhs, final)
            else:
                final = Let(nid, name, rhs, final)
        return final


def parse_program(text: str) -> Term:
    """Parse a program: top-level ``let`` bindings whose last one is the entry
    point, or a single expression."""
    return _Parser(text).program()


def parse_expr(text: str, ids: NodeIds | None = None) -> Term:
    p = _Parser(text, ids)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("expected end of expression")
    return e


# ---------------------------------------------------------------- syntax utils

def lambda_chain(t: Term) -> tuple[list[str], Term, list[Lam]]:
    """Split ``fun x1 -> ... fun xn -> body`` into params, body and lambdas."""
    ps, lams = [], []
    while type(t) is Lam:
        ps.append(t.param)
        lams.append(t)
        t = t.body
    return ps, t, lams


def app_spine(t: Term) -> tuple[Term, list[Term], list[App]]:
    args, apps = [], []
    while type(t) is App:
        args.append(t.arg)
        apps.append(t)
        t = t.fn
    args.reverse()
    apps.reverse()
    return t, args, apps


def main_arity(program: Term) -> int:
    """Number of leading parameters of the entry point (0 for expressions)."""
    t = program
    binds: dict[str, Term] = {}
    while type(t) in (Let, LetRec):
        binds[t.name] = t.bound if type(t) is Let else t.fn
        t = t.body
    if type(t) is Var and t.name in binds:
        return len(lambda_chain(binds[t.name])[0])
    return len(lambda_chain(t)[0])


def free_vars(t: Term) -> frozenset:
    cls = type(t)
    if cls is Var:
        return frozenset((t.name,))
    if cls in (Const, Nondet):
        return frozenset()
    if cls is Lam:
        return free_vars(t.body) - {t.param}
    if cls is Let:
        return free_vars(t.bound) | (free_vars(t.body) - {t.name})
    if cls is LetRec:
        return (free_vars(t.fn) | free_vars(t.body)) - {t.name}
    if cls is LetPair:
        return free_vars(t.bound) | (free_vars(t.body) - {t.left, t.right})
    out: frozenset = frozenset()
    for c in children(t):
        out |= free_vars(c)
    return out


def _lam_fv(lam: Lam) -> frozenset:
    fv = lam.__dict__.get("_fv")
    if fv is None:
        fv = free_vars(lam)
        object.__setattr__(lam, "_fv", fv)
    return fv


def subst(e: Term, x: str, v: Term) -> Term:
    """Substitute the closed term ``v`` for free occurrences of ``x``."""
    cls = type(e)
    if cls is Var:
        return v if e.name == x else e
    if cls in (Const, Nondet):
        return e
    if cls is Lam:
        return e if e.param == x else Lam(e.nid, e.param, subst(e.body, x, v))
    if cls is Let:
        body = e.body if e.name == x else subst(e.body, x, v)
        return Let(e.nid, e.name, subst(e.bound, x, v), body)
    if cls is LetRec:
        if e.name == x:
            return e
        return LetRec(e.nid, e.name, subst(e.fn, x, v), subst(e.body, x, v))
    if cls is LetPair:
        body = e.body if x in (e.left, e.right) else subst(e.body, x, v)
        return LetPair(e.nid, e.left, e.right, subst(e.bound, x, v), body)
    if cls is App:
        return App(e.nid, subst(e.fn, x, v), subst(e.arg, x, v))
    if cls is Ev:
        return Ev(e.nid, subst(e.arg, x, v))
    if cls is Assert:
        return Assert(e.nid, subst(e.arg, x, v))
    if cls is UnOp:
        return UnOp(e.nid, e.op, subst(e.arg, x, v))
    if cls is Proj:
        return Proj(e.nid, e.index, subst(e.arg, x, v))
    if cls is If:
        return If(e.nid, subst(e.cond, x, v), subst(e.then, x, v), subst(e.else_, x, v))
    if cls is BinOp:
        return BinOp(e.nid, e.op, subst(e.left, x, v), subst(e.right, x, v))
    if cls is Pair:
        return Pair(e.nid, subst(e.left, x, v), subst(e.right, x, v))
    raise TypeError(e)


def desugar(t: Term, ids: NodeIds | None = None) -> Term:
    """Rewrite ``let`` into application and ``&&``/``||`` into ``if``.

    ``let rec`` stays primitive (a fixpoint combinator would change the step
    count by more than a constant factor).
    """
    ids = ids or NodeIds(max_nid(t) + 1)

    def go(e: Term) -> Term:
        cls = type(e)
        if cls is Let:
            return App(e.nid, Lam(ids(), e.name, go(e.body)), go(e.bound))
        if cls is BinOp and e.op in BOOL_OPS:
            l, r = go(e.left), go(e.right)
            if e.op == "&&":
                return If(e.nid, l, r, Const(ids(), False))
            return If(e.nid, l, Const(ids(), True), r)
        if cls in (Const, Var, Nondet):
            return e
        if cls is Lam:
            return Lam(e.nid, e.param, go(e.body))
        if cls is LetRec:
            return LetRec(e.nid, e.name, go(e.fn), go(e.body))
        if cls is LetPair:
            return LetPair(e.nid, e.left, e.right, go(e.bound), go(e.body))
        if cls is App:
            return App(e.nid, go(e.fn), go(e.arg))
        if cls is Ev:
            return Ev(e.nid, go(e.arg))
        if cls is Assert:
            return Assert(e.nid, go(e.arg))
        if cls is UnOp:
            return UnOp(e.nid, e.op, go(e.arg))
        if cls is Proj:
            return Proj(e.nid, e.index, go(e.arg))
        if cls is If:
            return If(e.nid, go(e.cond), go(e.then), go(e.else_))
        if cls is BinOp:
            return BinOp(e.nid, e.op, go(e.left), go(e.right))
        if cls is Pair:
            return Pair(e.nid, go(e.left), go(e.right))
        raise TypeError(e)

    return go(t)


def same_shape(a: Term, b: Term) -> bool:
    """Structural equality ignoring NodeIds."""
    if type(a) is not type(b):
        return False
    cls = type(a)
    if cls is Const:
        return type(a.value) is type(b.value) and a.value == b.value
    if cls is Var:
        return a.name == b.name
    if cls is Lam and a.param != b.param:
        return False
    if cls in (Let, LetRec) and a.name != b.name:
        return False
    if cls is LetPair and (a.left, a.right) != (b.left, b.right):
        return False
    if cls in (BinOp, UnOp) and a.op != b.op:
        return False
    if cls is Proj and a.index != b.index:
        return False
    ca, cb = children(a), children(b)
    return len(ca) == len(cb) and all(same_shape(x, y) for x, y in zip(ca, cb))


def rename_apart(t: Term) -> Term:
    """Alpha-rename so that every binder name is distinct.

    The first binder of a name (in pre-order) keeps it; later ones become
    ``name#k``.  ``_`` binders become ``_#k``.
    """
    counts: dict[str, int] = {}

    def fresh(x: str) -> str:
        k = counts.get(x, 0)
        counts[x] = k + 1
        if x == "_":
            return f"_#{k}"
        return x if k == 0 else f"{x}#{k}"

    def go(e: Term, env: dict) -> Term:
        cls = type(e)
        if cls is Var:
            return Var(e.nid, env.get(e.name, e.name))
        if cls in (Const, Nondet):
            return e
        if cls is Lam:
            y = fresh(e.param)
            return Lam(e.nid, y, go(e.body, {**env, e.param: y}))
        if cls is Let:
            b = go(e.bound, env)
            y = fresh(e.name)
            return Let(e.nid, y, b, go(e.body, {**env, e.name: y}))
        if cls is LetRec:
            y = fresh(e.name)
            env2 = {**env, e.name: y}
            return LetRec(e.nid, y, go(e.fn, env2), go(e.body, env2))
        if cls is LetPair:
            b = go(e.bound, env)
            y1, y2 = fresh(e.left), fresh(e.right)
            return LetPair(e.nid, y1, y2, b, go(e.body, {**env, e.left: y1, e.right: y2}))
        if cls is App:
            return App(e.nid, go(e.fn, env), go(e.arg, env))
        if cls is Ev:
            return Ev(e.nid, go(e.arg, env))
        if cls is Assert:
            return Assert(e.nid, go(e.arg, env))
        if cls is UnOp:
            return UnOp(e.nid, e.op, go(e.arg, env))
        if cls is Proj:
            return Proj(e.nid, e.index, go(e.arg, env))
        if cls is If:
            return If(e.nid, go(e.cond, env), go(e.then, env), go(e.else_, env))
        if cls is BinOp:
            return BinOp(e.nid, e.op, go(e.left, env), go(e.right, env))
        if cls is Pair:
            return Pair(e.nid, go(e.left, env), go(e.right, env))
        raise TypeError(e)

    return go(t, {})


# ---------------------------------------------------------------- printer

def _render_value(v) -> str:
    if v is UNIT:
        return "()"
    if type(v) is bool:
        return "true" if v else "false"
    if type(v) is int:
        return str(v) if v >= 0 else f"({v})"
    if type(v) is SeqV and not v.items:
        return "[]"
    raise ValueError(f"cannot render constant {v!r}")


def render(t: Term, indent: int = 0) -> str:
    """OCaml-like source text; ``parse_expr(render(t))`` has the shape of ``t``."""
    pad = "  " * indent
    cls = type(t)
    if cls is Const:
        return _render_value(t.value)
    if cls is Var:
        return t.name
    if cls is Nondet:
        return "nondet ()"
    if cls is Lam:
        ps, body, _ = lambda_chain(t)
        return f"(fun {' '.join(ps)} ->\n{pad}  {render(body, indent + 1)})"
    if cls is App:
        head, args, _ = app_spine(t)
        return "(" + " ".join(_atom(x, indent) for x in [head, *args]) + ")"
    if cls is Ev:
        return f"(ev {_atom(t.arg, indent)})"
    if cls is Assert:
        return f"(assert {_atom(t.arg, indent)})"
    if cls is UnOp:
        if t.op == "not":
            return f"(not {_atom(t.arg, indent)})"
        return f"(- {_atom(t.arg, indent)})"
    if cls is Proj:
        return f"({'fst' if t.index == 0 else 'snd'} {_atom(t.arg, indent)})"
    if cls is BinOp:
        return f"({_atom(t.left, indent)} {t.op} {_atom(t.right, indent)})"
    if cls is Pair:
        return f"({render(t.left, indent)}, {render(t.right, indent)})"
    if cls is If:
        return (f"(if {render(t.cond, indent + 1)}\n{pad} then {render(t.then, indent + 1)}"
                f"\n{pad} else {render(t.else_, indent + 1)})")
    if cls is Let:
        return (f"(let {t.name} = {render(t.bound, indent + 1)} in\n"
                f"{pad} {render(t.body, indent)})")
    if cls is LetRec:
        ps, body, _ = lambda_chain(t.fn)
        return (f"(let rec {t.name} {' '.join(ps)} =\n{pad}   {render(body, indent + 2)} in\n"
                f"{pad} {render(t.body, indent)})")
    if cls is LetPair:
        return (f"(let ({t.left}, {t.right}) = {render(t.bound, indent + 1)} in\n"
                f"{pad} {render(t.body, indent)})")
    raise TypeError(t)


def _atom(t: Term, indent: int) -> str:
    return render(t, indent)


# ---------------------------------------------------------------- interpreter

@dataclass(frozen=True)
class Finished:
    value: object
    trace: tuple


@dataclass(frozen=True)
class Diverged:
    trace: tuple


@dataclass(frozen=True)
class Stuck:
    trace: tuple
    reason: str


@dataclass(frozen=True)
class AssertionFailed:
    nid: int
    trace: tuple


EvalOutcome = Finished | Diverged | Stuck | AssertionFailed


class _StuckErr(Exception):
    pass


def _kind(v) -> str:
    t = type(v)
    if t is int:
        return "int"
    if t is bool:
        return "bool"
    if v is UNIT:
        return "unit"
    if t is Closure:
        return "fun"
    if t is PairV:
        return "pair"
    if t is SeqV:
        return "seq"
    return "?"


def _binop(op: str, a, b):
    if op in ARITH_OPS:
        if type(a) is not int or type(b) is not int:
            raise _StuckErr(f"non-integer operand to {op}")
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if b == 0:
            raise _StuckErr("division by zero")
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        return q if op == "/" else a - b * q
    if op in ("=", "<>"):
        ka, kb = _kind(a), _kind(b)
        if ka != kb or ka not in ("int", "bool", "unit"):
            raise _StuckErr(f"cannot compare {ka} with {kb}")
        return (a == b) if op == "=" else (a != b)
    if op in CMP_OPS:
        if type(a) is not int or type(b) is not int:
            raise _StuckErr(f"non-integer operand to {op}")
        if op == "<=":
            return a <= b
        if op == "<":
            return a < b
        if op == ">=":
            return a >= b
        return a > b
    if op == "++":
        if type(a) is not SeqV or type(b) is not int:
            raise _StuckErr("bad operands to ++")
        return SeqV(a.items + (b,))
    raise _StuckErr(f"unknown operator {op}")


def eval_program(program: Term, inputs: Sequence[int] = (), fuel: int = 1_000_000,
                 nondet_seed: int = 0, nondet_range: tuple[int, int] = (-32, 32)
                 ) -> EvalOutcome:
    """Run ``program`` and apply its value to ``inputs``.

    A CEK-style machine: every machine transition consumes one unit of fuel.
    Evaluation is call-by-value, left to right.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    rng = random.Random(nondet_seed)
    lo, hi = nondet_range
    trace: list[int] = []
    # frames are tuples; the first element names the frame kind
    stack: list[tuple] = [("apply_to", v) for v in reversed(list(inputs))]
    term: Term | None = program
    env: dict = {}
    value = None
    used = 0
    try:
        while True:
            if used >= fuel:
                return Diverged(tuple(trace))
            used += 1
            if term is not None:
                t = term
                cls = type(t)
                if cls is Const:
                    value, term = t.value, None
                elif cls is Var:
                    try:
                        value = env[t.name]
                    except KeyError:
                        raise _StuckErr(f"unbound variable {t.name}") from None
                    term = None
                elif cls is Lam:
                    fv = _lam_fv(t)
                    value = Closure(t.param, t.body, {x: env[x] for x in fv if x in env}, t.nid)
                    term = None
                elif cls is App:
                    stack.append(("arg", t.arg, env))
                    term = t.fn
                elif cls is Let:
                    stack.append(("let", t.name, t.body, env))
                    term = t.bound
                elif cls is LetRec:
                    fn = t.fn
                    fv = _lam_fv(fn)
                    cenv = {x: env[x] for x in fv if x in env and x != t.name}
                    clo = Closure(fn.param, fn.body, cenv, fn.nid)
                    cenv[t.name] = clo
                    env = {**env, t.name: clo}
                    term = t.body
                elif cls is If:
                    stack.append(("if", t.then, t.else_, env))
                    term = t.cond
                elif cls is BinOp:
                    if t.op == "&&" or t.op == "||":
                        stack.append(("sc", t.op, t.right, env))
                    else:
                        stack.append(("binl", t.op, t.right, env))
                    term = t.left
                elif cls is Ev:
                    stack.append(("ev",))
                    term = t.arg
                elif cls is UnOp:
                    stack.append(("un", t.op))
                    term = t.arg
                elif cls is Assert:
                    stack.append(("assert", t.nid))
                    term = t.arg
                elif cls is Nondet:
                    value, term = rng.randint(lo, hi), None
                elif cls is Pair:
                    stack.append(("pairl", t.right, env))
                    term = t.left
                elif cls is Proj:
                    stack.append(("proj", t.index))
                    term = t.arg
                elif cls is LetPair:
                    stack.append(("letpair", t.left, t.right, t.body, env))
                    term = t.bound
                else:
                    raise _StuckErr(f"unknown term {cls.__name__}")
                continue
            if not stack:
                return Finished(value, tuple(trace))
            fr = stack.pop()
            k = fr[0]
            if k == "arg":
                stack.append(("call", value))
                term, env = fr[1], fr[2]
            elif k == "call" or k == "apply_to":
                if k == "call":
                    f, a = fr[1], value
                else:
                    f, a = value, fr[1]
                if type(f) is not Closure:
                    raise _StuckErr(f"application of non-function ({_kind(f)})")
                env = f.env.copy()
                env[f.param] = a
                term = f.body
            elif k == "let":
                env = {**fr[3], fr[1]: value}
                term = fr[2]
            elif k == "if":
                if type(value) is not bool:
                    raise _StuckErr("non-boolean condition")
                term, env = (fr[1] if value else fr[2]), fr[3]
            elif k == "binl":
                stack.append(("binr", fr[1], value))
                term, env = fr[2], fr[3]
            elif k == "binr":
                value = _binop(fr[1], fr[2], value)
            elif k == "sc":
                if type(value) is not bool:
                    raise _StuckErr(f"non-boolean operand to {fr[1]}")
                if (fr[1] == "&&") == value:
                    stack.append(("bool",))
                    term, env = fr[2], fr[3]
            elif k == "bool":
                if type(value) is not bool:
                    raise _StuckErr("non-boolean operand")
            elif k == "ev":
                if type(value) is not int:
                    raise _StuckErr("non-integer event")
                trace.append(value)
                value = UNIT
            elif k == "un":
                if fr[1] == "not":
                    if type(value) is not bool:
                        raise _StuckErr("non-boolean operand to not")
                    value = not value
                else:
                    if type(value) is not int:
                        raise _StuckErr("non-integer operand to negation")
                    value = -value
            elif k == "assert":
                if type(value) is not bool:
                    raise _StuckErr("non-boolean assertion")
                if not value:
                    return AssertionFailed(fr[1], tuple(trace))
                value = UNIT
            elif k == "pairl":
                stack.append(("pairr", value))
                term, env = fr[1], fr[2]
            elif k == "pairr":
                value = PairV(fr[1], value)
            elif k == "proj":
                if type(value) is not PairV:
                    raise _StuckErr("projection of non-pair")
                value = value.fst if fr[1] == 0 else value.snd
            elif k == "letpair":
                if type(value) is not PairV:
                    raise _StuckErr("pair pattern on non-pair")
                env = {**fr[4], fr[1]: value.fst, fr[2]: value.snd}
                term = fr[3]
    except _StuckErr as e:
        return Stuck(tuple(trace), str(e))


eval = eval_program  # noqa: A001  (the operation's conventional name)
