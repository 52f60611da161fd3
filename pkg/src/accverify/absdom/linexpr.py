"""Expression IR interpreted by the numerical domains.

``Lin`` is an integer affine form.  Value expressions are ``Lin``, ``Mod``
(truncated remainder by a constant) or ``HAVOC``.  Conditions are built from
``Cmp`` atoms (``lin <= 0``, ``lin = 0``, ``lin <> 0``), ``ModEq`` atoms
(``lin mod c = r``) and the connectives ``And``/``Or``; ``UNKNOWN`` is a
condition about which nothing is known (testing it is the identity).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from .. import lang
from ..lang import BinOp, Const, Term, UnOp, Var

NU = "ν"


@dataclass(frozen=True)
class Lin:
    coeffs: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def var(x: str, a: int = 1) -> "Lin":
        return Lin(((x, a),), 0) if a else Lin((), 0)

    @staticmethod
    def of(c: int) -> "Lin":
        return Lin((), c)

    @staticmethod
    def from_dict(d: Mapping[str, int], c: int = 0) -> "Lin":
        return Lin(tuple(sorted((x, a) for x, a in d.items() if a)), c)

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def __add__(self, o: "Lin") -> "Lin":
        d = self.as_dict()
        for x, a in o.coeffs:
            d[x] = d.get(x, 0) + a
        return Lin.from_dict(d, self.const + o.const)

    def __neg__(self) -> "Lin":
        return self.scale(-1)

    def __sub__(self, o: "Lin") -> "Lin":
        return self + (-o)

    def scale(self, k: int) -> "Lin":
        if k == 0:
            return Lin()
        return Lin(tuple((x, a * k) for x, a in self.coeffs), self.const * k)

    def shift(self, c: int) -> "Lin":
        return Lin(self.coeffs, self.const + c)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(x for x, _ in self.coeffs)

    def is_const(self) -> bool:
        return not self.coeffs

    def eval(self, env: Mapping[str, int]) -> int:
        return self.const + sum(a * env[x] for x, a in self.coeffs)

    def rename(self, m: Mapping[str, str]) -> "Lin":
        return Lin.from_dict({m.get(x, x): a for x, a in self.coeffs}, self.const)

    def __str__(self) -> str:
        parts = []
        for x, a in self.coeffs:
            if a == 1:
                parts.append(f"+ {x}")
            elif a == -1:
                parts.append(f"- {x}")
            elif a < 0:
                parts.append(f"- {-a}*{x}")
            else:
                parts.append(f"+ {a}*{x}")
        if self.const or not parts:
            parts.append(f"- {-self.const}" if self.const < 0 else f"+ {self.const}")
        s = " ".join(parts)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]


@dataclass(frozen=True)
class Mod:
    expr: Lin
    c: int


class _Havoc:
    def __repr__(self) -> str:
        return "HAVOC"


HAVOC = _Havoc()
Expr = Lin | Mod | _Havoc


def trunc_mod(a: int, c: int) -> int:
    r = abs(a) % abs(c)
    return -r if a < 0 else r


# ---------------------------------------------------------------- conditions

@dataclass(frozen=True)
class Cmp:
    lin: Lin
    op: str  # "<=" | "=" | "<>"  (compared with 0)

    def __str__(self) -> str:
        return f"{self.lin} {self.op} 0"


@dataclass(frozen=True)
class ModEq:
    lin: Lin
    c: int
    r: int

    def __str__(self) -> str:
        return f"({self.lin}) mod {self.c} = {self.r}"


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class BoolConst:
    value: bool


class _Unknown:
    def __repr__(self) -> str:
        return "UNKNOWN"


TRUE, FALSE, UNKNOWN = BoolConst(True), BoolConst(False), _Unknown()
Cond = Cmp | ModEq | And | Or | BoolConst | _Unknown


def le(a: Lin, b: Lin) -> Cmp:
    return Cmp(a - b, "<=")


def lt(a: Lin, b: Lin) -> Cmp:
    return Cmp((a - b).shift(1), "<=")


def eq(a: Lin, b: Lin) -> Cmp:
    return Cmp(a - b, "=")


def ne(a: Lin, b: Lin) -> Cmp:
    return Cmp(a - b, "<>")


def conj(*cs) -> Cond:
    items = []
    for c in cs:
        if c == TRUE:
            continue
        if c == FALSE:
            return FALSE
        items.extend(c.items if type(c) is And else (c,))
    if not items:
        return TRUE
    return items[0] if len(items) == 1 else And(tuple(items))


def disj(*cs) -> Cond:
    items = []
    for c in cs:
        if c == FALSE:
            continue
        if c == TRUE:
            return TRUE
        if c is UNKNOWN:
            return UNKNOWN
        items.extend(c.items if type(c) is Or else (c,))
    if not items:
        return FALSE
    return items[0] if len(items) == 1 else Or(tuple(items))


MOD_SPLIT_LIMIT = 16


def negate(c: Cond) -> Cond:
    t = type(c)
    if t is BoolConst:
        return BoolConst(not c.value)
    if c is UNKNOWN:
        return UNKNOWN
    if t is And:
        return disj(*(negate(x) for x in c.items))
    if t is Or:
        return conj(*(negate(x) for x in c.items))
    if t is Cmp:
        if c.op == "<=":
            return Cmp((-c.lin).shift(1), "<=")
        if c.op == "=":
            return Cmp(c.lin, "<>")
        return Cmp(c.lin, "=")
    if t is ModEq:
        m = abs(c.c)
        if m > MOD_SPLIT_LIMIT:
            return UNKNOWN
        return disj(*(ModEq(c.lin, c.c, r) for r in range(-(m - 1), m) if r != c.r))
    raise TypeError(c)


def cond_vars(c: Cond) -> set[str]:
    t = type(c)
    if t in (Cmp, ModEq):
        return set(c.lin.vars)
    if t in (And, Or):
        out: set[str] = set()
        for x in c.items:
            out |= cond_vars(x)
        return out
    return set()


def rename_cond(c: Cond, m: Mapping[str, str]) -> Cond:
    t = type(c)
    if t is Cmp:
        return Cmp(c.lin.rename(m), c.op)
    if t is ModEq:
        return ModEq(c.lin.rename(m), c.c, c.r)
    if t is And:
        return And(tuple(rename_cond(x, m) for x in c.items))
    if t is Or:
        return Or(tuple(rename_cond(x, m) for x in c.items))
    return c


def eval_cond(c: Cond, env: Mapping[str, int]) -> bool:
    t = type(c)
    if t is BoolConst:
        return c.value
    if t is Cmp:
        v = c.lin.eval(env)
        return v <= 0 if c.op == "<=" else (v == 0 if c.op == "=" else v != 0)
    if t is ModEq:
        return trunc_mod(c.lin.eval(env), c.c) == c.r
    if t is And:
        return all(eval_cond(x, env) for x in c.items)
    if t is Or:
        return any(eval_cond(x, env) for x in c.items)
    raise ValueError("cannot evaluate UNKNOWN")


# ---------------------------------------------------------------- compilation

NameOf = Callable[[str], "str | None"]


class NotSimple(Exception):
    """The term is outside the fragment the domains interpret directly."""


def compile_expr(t: Term, name_of: NameOf) -> Expr:
    """Compile an integer-valued term.  Raises NotSimple for terms with
    effects, calls, or non-integer variables."""
    cls = type(t)
    if cls is Const:
        if type(t.value) is not int:
            raise NotSimple
        return Lin.of(t.value)
    if cls is Var:
        n = name_of(t.name)
        if n is None:
            raise NotSimple
        return Lin.var(n)
    if cls is UnOp and t.op == "neg":
        e = compile_expr(t.arg, name_of)
        return -e if type(e) is Lin else HAVOC
    if cls is BinOp and t.op in lang.ARITH_OPS:
        a = compile_expr(t.left, name_of)
        b = compile_expr(t.right, name_of)
        if t.op in ("+", "-"):
            if type(a) is Lin and type(b) is Lin:
                return a + b if t.op == "+" else a - b
            return HAVOC
        if t.op == "*":
            if type(a) is Lin and type(b) is Lin:
                if a.is_const():
                    return b.scale(a.const)
                if b.is_const():
                    return a.scale(b.const)
            return HAVOC
        # '/' and 'mod' must be by a non-zero constant to stay simple
        if not (type(b) is Lin and b.is_const() and b.const != 0):
            raise NotSimple
        if t.op == "mod" and type(a) is Lin:
            if a.is_const():
                return Lin.of(trunc_mod(a.const, b.const))
            return Mod(a, b.const)
        if t.op == "/" and type(a) is Lin and a.is_const():
            q = abs(a.const) // abs(b.const)
            return Lin.of(q if (a.const < 0) == (b.const < 0) else -q)
        return HAVOC
    raise NotSimple


def compile_cond(t: Term, name_of: NameOf) -> Cond:
    """Compile a boolean-valued term into a condition (raises NotSimple)."""
    cls = type(t)
    if cls is Const:
        if type(t.value) is not bool:
            raise NotSimple
        return TRUE if t.value else FALSE
    if cls is UnOp and t.op == "not":
        return negate(compile_cond(t.arg, name_of))
    if cls is BinOp:
        if t.op == "&&":
            return conj(compile_cond(t.left, name_of), compile_cond(t.right, name_of))
        if t.op == "||":
            return disj(compile_cond(t.left, name_of), compile_cond(t.right, name_of))
        if t.op in lang.CMP_OPS:
            a = compile_expr(t.left, name_of)
            b = compile_expr(t.right, name_of)
            return _cmp(t.op, a, b)
    raise NotSimple


def _cmp(op: str, a: Expr, b: Expr) -> Cond:
    if type(a) is Lin and type(b) is Lin:
        if op == "<=":
            return le(a, b)
        if op == "<":
            return lt(a, b)
        if op == ">=":
            return le(b, a)
        if op == ">":
            return lt(b, a)
        if op == "=":
            return eq(a, b)
        return ne(a, b)
    if op in ("=", "<>"):
        if type(b) is Mod and type(a) is Lin:
            a, b = b, a
        if type(a) is Mod and type(b) is Lin and b.is_const():
            m = abs(a.c)
            if abs(b.const) >= m:
                atom: Cond = FALSE
            else:
                atom = ModEq(a.expr, m, b.const)
            return atom if op == "=" else negate(atom)
    return UNKNOWN
