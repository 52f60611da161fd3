"""Common interface and generic transfer functions of the numerical domains."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Iterable, Mapping, Sequence

from .linexpr import (
    HAVOC, NU, UNKNOWN, And, BoolConst, Cmp, Cond, Expr, Lin, Mod, ModEq, Or,
    _Havoc, _Unknown, eq, eval_cond, negate, trunc_mod,
)

INF = math.inf


class ScopeError(ValueError):
    pass


def check_scope(scope: Sequence[str]) -> tuple[str, ...]:
    scope = tuple(scope)
    if len(set(scope)) != len(scope):
        raise ScopeError(f"duplicate names in scope {scope}")
    if NU in scope and scope[-1] != NU:
        raise ScopeError("ν must be the last variable of a scope")
    return scope


def floor_div(a, b: int):
    if a in (INF, -INF):
        return a if b > 0 else -a
    return a // b


def ceil_div(a, b: int):
    if a in (INF, -INF):
        return a if b > 0 else -a
    return -((-a) // b)


class BaseAbstract(ABC):
    """An element of a numerical domain over a named scope.

    Instances are immutable; every operation returns a new element.
    """

    tag: str = "?"
    scope: tuple[str, ...]

    # -- construction ---------------------------------------------------
    @classmethod
    @abstractmethod
    def top(cls, scope: Sequence[str]) -> "BaseAbstract": ...

    @classmethod
    @abstractmethod
    def bot(cls, scope: Sequence[str]) -> "BaseAbstract": ...

    # -- lattice ----------------------------------------------------------
    @abstractmethod
    def is_bot(self) -> bool: ...

    @abstractmethod
    def leq(self, o: "BaseAbstract") -> bool: ...

    @abstractmethod
    def join(self, o: "BaseAbstract") -> "BaseAbstract": ...

    @abstractmethod
    def meet(self, o: "BaseAbstract") -> "BaseAbstract": ...

    @abstractmethod
    def widen(self, o: "BaseAbstract", thresholds: Iterable[Cond] | None = None) -> "BaseAbstract": ...

    def is_top(self) -> bool:
        return self.top(self.scope).leq(self)

    def equal(self, o: "BaseAbstract") -> bool:
        return self.leq(o) and o.leq(self)

    # -- scope ------------------------------------------------------------
    @abstractmethod
    def reshape(self, scope: Sequence[str]) -> "BaseAbstract":
        """Move to another scope: shared names keep their constraints, new
        names are unconstrained, missing names are projected away."""

    @abstractmethod
    def project(self, x: str) -> "BaseAbstract": ...

    def project_many(self, xs: Iterable[str]) -> "BaseAbstract":
        r = self
        for x in xs:
            r = r.project(x)
        return r

    def add_var(self, x: str, before: str | None = None) -> "BaseAbstract":
        if x in self.scope:
            raise ScopeError(f"{x} already in scope")
        s = list(self.scope)
        if before is None:
            before = NU if NU in s else None
        if before is not None and before in s:
            s.insert(s.index(before), x)
        else:
            s.append(x)
        return self.reshape(s)

    def drop_var(self, x: str) -> "BaseAbstract":
        if x not in self.scope:
            raise ScopeError(f"{x} not in scope")
        return self.reshape([y for y in self.scope if y != x])

    def rename(self, a: str, b: str) -> "BaseAbstract":
        if a == b:
            return self
        if a not in self.scope:
            raise ScopeError(f"{a} not in scope")
        if b in self.scope:
            raise ScopeError(f"name collision: {b} already in scope")
        return self._renamed({a: b})

    def rename_many(self, m: Mapping[str, str]) -> "BaseAbstract":
        m = {a: b for a, b in m.items() if a != b and a in self.scope}
        if not m:
            return self
        new = [m.get(x, x) for x in self.scope]
        if len(set(new)) != len(new):
            raise ScopeError(f"renaming {m} collides in {self.scope}")
        return self._renamed(m)

    @abstractmethod
    def _renamed(self, m: Mapping[str, str]) -> "BaseAbstract": ...

    def _same(self, o: "BaseAbstract"):
        if type(o) is not type(self):
            raise ScopeError(f"domain mismatch: {self.tag} vs {o.tag}")
        if o.scope != self.scope:
            raise ScopeError(f"scope mismatch: {self.scope} vs {o.scope}")

    # -- queries ------------------------------------------------------------
    @abstractmethod
    def bounds(self, x: str) -> tuple:
        """(lo, hi) with ±inf for unbounded; (inf, -inf) when bottom."""

    @abstractmethod
    def _contains(self, point: Mapping[str, int]) -> bool: ...

    def gamma_contains(self, value: int | None, env: Mapping[str, int]) -> bool:
        if self.is_bot():
            return False
        pt = dict(env)
        if NU in self.scope:
            pt[NU] = 0 if value is None else value
        missing = [x for x in self.scope if x not in pt]
        if missing:
            raise ScopeError(f"environment misses {missing}")
        return self._contains(pt)

    def lin_bounds(self, lin: Lin) -> tuple:
        lo = hi = lin.const
        for x, a in lin.coeffs:
            l, h = self.bounds(x)
            if a > 0:
                lo, hi = lo + a * l, hi + a * h
            else:
                lo, hi = lo + a * h, hi + a * l
        return lo, hi

    def singleton(self, x: str) -> int | None:
        lo, hi = self.bounds(x)
        return lo if lo == hi and lo not in (INF, -INF) else None

    def entails(self, c: Cond) -> bool:
        return self.test(negate(c)).is_bot()

    # -- transfer functions --------------------------------------------------
    def test(self, c: Cond) -> "BaseAbstract":
        if self.is_bot():
            return self
        t = type(c)
        if t is BoolConst:
            return self if c.value else self.bot(self.scope)
        if isinstance(c, _Unknown):
            return self
        if t is And:
            r = self
            for x in c.items:
                r = r.test(x)
                if r.is_bot():
                    break
            return r
        if t is Or:
            parts = [self.test(x) for x in c.items]
            out = parts[0]
            for p in parts[1:]:
                out = out.join(p)
            return out
        # atoms: decide exactly when every variable is pinned
        lin = c.lin
        for x in lin.vars:
            if x not in self.scope:
                raise ScopeError(f"{x} not in scope {self.scope}")
        vals = {}
        for x in lin.vars:
            v = self.singleton(x)
            if v is None:
                break
            vals[x] = v
        else:
            return self if eval_cond(c, vals) else self.bot(self.scope)
        if t is Cmp:
            if c.op == "<=":
                return self._test_le(lin)
            if c.op == "=":
                return self._test_eq(lin)
            return self._test_le(lin.shift(1)).join(self._test_le((-lin).shift(1)))
        if t is ModEq:
            return self._test_modeq(c)
        raise TypeError(c)

    @abstractmethod
    def _test_le(self, lin: Lin) -> "BaseAbstract":
        """Filter by ``lin <= 0``."""

    def _test_eq(self, lin: Lin) -> "BaseAbstract":
        r = self._test_le(lin)
        return r if r.is_bot() else r._test_le(-lin)

    def _test_modeq(self, c: ModEq) -> "BaseAbstract":
        # sign information only; residue classes are the congruence domain's job
        if c.r > 0:
            return self._test_le((-c.lin).shift(1))
        if c.r < 0:
            return self._test_le(c.lin.shift(1))
        return self

    def assign(self, x: str, e: Expr) -> "BaseAbstract":
        if x not in self.scope:
            raise ScopeError(f"{x} not in scope")
        if self.is_bot():
            return self
        if isinstance(e, _Havoc):
            return self.project(x)
        inner = e.expr if type(e) is Mod else e
        if x in inner.vars:
            tmp = "$tmp"
            while tmp in self.scope:
                tmp += "'"
            r = self.add_var(tmp).assign(tmp, e).project(x)
            return r.rename_many({x: "$gone", tmp: x}).reshape(self.scope)
        if type(e) is Lin:
            return self.project(x).test(eq(Lin.var(x), e))
        return self._assign_mod(x, e)

    def _assign_mod(self, x: str, e: Mod) -> "BaseAbstract":
        m = abs(e.c)
        lo, hi = self.lin_bounds(e.expr)
        r = self.project(x)
        if lo >= 0:
            r = r.test(Cmp(Lin.var(x, -1), "<="))
            if len(e.expr.coeffs) == 1 and e.expr.coeffs[0][1] == 1 and e.expr.const == 0:
                r = r.test(Cmp(Lin.var(x) - e.expr, "<="))
        elif hi <= 0:
            r = r.test(Cmp(Lin.var(x), "<="))
            if len(e.expr.coeffs) == 1 and e.expr.coeffs[0][1] == 1 and e.expr.const == 0:
                r = r.test(Cmp(e.expr - Lin.var(x), "<="))
        r = r.test(Cmp(Lin.var(x).shift(-(m - 1)), "<="))
        return r.test(Cmp(Lin.var(x, -1).shift(-(m - 1)), "<="))

    # -- rendering -----------------------------------------------------------
    @abstractmethod
    def constraints(self) -> list[str]: ...

    def __str__(self) -> str:
        if self.is_bot():
            return "⊥"
        cs = self.constraints()
        return "{" + ", ".join(cs) + "}" if cs else "⊤"

    def __repr__(self) -> str:
        return f"{type(self).__name__}{self.scope}:{self}"


def fmt_bound(x: str, lo, hi) -> list[str]:
    if lo == hi:
        return [f"{x} = {lo}"]
    out = []
    if lo != -INF and hi != INF:
        return [f"{lo} <= {x} <= {hi}"]
    if lo != -INF:
        out.append(f"{x} >= {lo}")
    if hi != INF:
        out.append(f"{x} <= {hi}")
    return out
