"""Numerical abstract domains for base refinement types.

Four domains share one interface (:class:`BaseAbstract`): ``interval``,
``congruence``, ``octagon`` and ``octcong`` (the reduced product of the last
two).  Elements live over an explicit scope of names in which ``ν`` (the
value variable), when present, comes last.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .base import INF, BaseAbstract, ScopeError
from .congruence import Congruence
from .interval import Interval
from .linexpr import (
    FALSE, HAVOC, NU, TRUE, UNKNOWN, And, Cmp, Cond, Expr, Lin, Mod, ModEq,
    NotSimple, Or, compile_cond, compile_expr, conj, disj, eq, le, lt, ne, negate,
)
from .octagon import Octagon
from .product import OctCong, reduce_pair

DOMAINS: dict[str, type[BaseAbstract]] = {
    "interval": Interval,
    "congruence": Congruence,
    "octagon": Octagon,
    "octcong": OctCong,
}

__all__ = [
    "BaseAbstract", "Interval", "Congruence", "Octagon", "OctCong", "DOMAINS",
    "NU", "INF", "Lin", "Mod", "HAVOC", "Cmp", "ModEq", "And", "Or", "TRUE",
    "FALSE", "UNKNOWN", "Cond", "Expr", "ScopeError", "NotSimple",
    "compile_cond", "compile_expr", "conj", "disj", "eq", "le", "lt", "ne", "negate",
    "top", "bot", "leq", "join", "meet", "widen", "widen_thresholds", "assign",
    "test", "project", "rename", "add_var", "drop_var", "strengthen_eq",
    "const_singleton", "gamma_contains", "entails", "domain_class", "reduce_pair",
]


def domain_class(tag: str) -> type[BaseAbstract]:
    try:
        return DOMAINS[tag]
    except KeyError:
        raise ValueError(f"unknown domain {tag!r}; choose from {sorted(DOMAINS)}") from None


def top(scope: Sequence[str], tag: str = "octagon") -> BaseAbstract:
    return domain_class(tag).top(scope)


def bot(scope: Sequence[str], tag: str = "octagon") -> BaseAbstract:
    return domain_class(tag).bot(scope)


def leq(a: BaseAbstract, b: BaseAbstract) -> bool:
    return a.leq(b)


def join(a: BaseAbstract, b: BaseAbstract) -> BaseAbstract:
    return a.join(b)


def meet(a: BaseAbstract, b: BaseAbstract) -> BaseAbstract:
    return a.meet(b)


def widen(a: BaseAbstract, b: BaseAbstract) -> BaseAbstract:
    return a.widen(b)


def widen_thresholds(a: BaseAbstract, b: BaseAbstract, thresholds: Iterable[Cond]) -> BaseAbstract:
    return a.widen(b, list(thresholds))


def assign(var: str, expr: Expr, b: BaseAbstract) -> BaseAbstract:
    return b.assign(var, expr)


def test(cond: Cond, b: BaseAbstract) -> BaseAbstract:
    return b.test(cond)


def project(var: str, b: BaseAbstract) -> BaseAbstract:
    return b.project(var)


def rename(b: BaseAbstract, old: str, new: str) -> BaseAbstract:
    return b.rename(old, new)


def add_var(b: BaseAbstract, var: str) -> BaseAbstract:
    return b.add_var(var)


def drop_var(b: BaseAbstract, var: str) -> BaseAbstract:
    return b.drop_var(var)


def strengthen_eq(b: BaseAbstract, x: str, y: str) -> BaseAbstract:
    return b.test(eq(Lin.var(x), Lin.var(y)))


def const_singleton(scope: Sequence[str], c: int, tag: str = "octagon") -> BaseAbstract:
    return top(scope, tag).test(eq(Lin.var(NU), Lin.of(c)))


def gamma_contains(b: BaseAbstract, value: int | None, env: Mapping[str, int]) -> bool:
    return b.gamma_contains(value, env)


def entails(b: BaseAbstract, c: Cond) -> bool:
    return b.entails(c)
