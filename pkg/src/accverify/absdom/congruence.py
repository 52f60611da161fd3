"""Non-relational congruence domain: each variable lies in ``r + mZ``.

A pair ``(m, r)`` with ``m = 0`` is the constant ``r``; ``(1, 0)`` is top.
"""

from __future__ import annotations

from math import gcd
from typing import Sequence

from .base import INF, BaseAbstract, check_scope
from .linexpr import Lin, Mod, ModEq, trunc_mod

TOP_C = (1, 0)


def cnorm(m: int, r: int) -> tuple[int, int]:
    m = abs(m)
    return (m, r % m) if m else (0, r)


def cadd(a, b):
    return cnorm(gcd(a[0], b[0]), a[1] + b[1])


def cscale(k: int, a):
    return cnorm(k * a[0], k * a[1])


def cjoin(a, b):
    return cnorm(gcd(gcd(a[0], b[0]), abs(a[1] - b[1])), a[1])


def cleq(a, b) -> bool:
    if b[0] == 0:
        return a[0] == 0 and a[1] == b[1]
    return a[0] % b[0] == 0 and (a[1] - b[1]) % b[0] == 0


def cmeet(a, b):
    """Intersection, or None when empty."""
    (m1, r1), (m2, r2) = a, b
    if m1 == 0 and m2 == 0:
        return a if r1 == r2 else None
    if m1 == 0:
        return a if (r1 - r2) % m2 == 0 else None
    if m2 == 0:
        return b if (r2 - r1) % m1 == 0 else None
    g = gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    k = ((r2 - r1) // g) * pow(m1 // g, -1, m2 // g) % (m2 // g) if m2 // g > 1 else 0
    return cnorm(l, r1 + m1 * k)


def ccontains(a, v: int) -> bool:
    m, r = a
    return v == r if m == 0 else (v - r) % m == 0


class Congruence(BaseAbstract):
    tag = "congruence"
    __slots__ = ("scope", "vals")

    def __init__(self, scope: Sequence[str], vals):
        self.scope = check_scope(scope)
        self.vals = vals  # tuple of (m, r) or None for bottom

    @classmethod
    def top(cls, scope):
        scope = tuple(scope)
        return cls(scope, tuple(TOP_C for _ in scope))

    @classmethod
    def bot(cls, scope):
        return cls(scope, None)

    def is_bot(self):
        return self.vals is None

    def get(self, x: str):
        return self.vals[self.scope.index(x)]

    def _with(self, i: int, c):
        if c is None:
            return Congruence.bot(self.scope)
        v = list(self.vals)
        v[i] = c
        return Congruence(self.scope, tuple(v))

    def leq(self, o):
        self._same(o)
        if self.vals is None:
            return True
        if o.vals is None:
            return False
        return all(cleq(a, b) for a, b in zip(self.vals, o.vals))

    def join(self, o):
        self._same(o)
        if self.vals is None:
            return o
        if o.vals is None:
            return self
        return Congruence(self.scope, tuple(cjoin(a, b) for a, b in zip(self.vals, o.vals)))

    def meet(self, o):
        self._same(o)
        if self.vals is None or o.vals is None:
            return Congruence.bot(self.scope)
        out = []
        for a, b in zip(self.vals, o.vals):
            c = cmeet(a, b)
            if c is None:
                return Congruence.bot(self.scope)
            out.append(c)
        return Congruence(self.scope, tuple(out))

    def widen(self, o, thresholds=None):
        # ascending chains are finite (moduli strictly decrease by division)
        return self.join(o)

    def reshape(self, scope):
        scope = check_scope(scope)
        if self.vals is None:
            return Congruence.bot(scope)
        cur = dict(zip(self.scope, self.vals))
        return Congruence(scope, tuple(cur.get(x, TOP_C) for x in scope))

    def project(self, x):
        if self.vals is None:
            return self
        return self._with(self.scope.index(x), TOP_C)

    def _renamed(self, m):
        return Congruence(tuple(m.get(x, x) for x in self.scope), self.vals)

    def bounds(self, x):
        if self.vals is None:
            return (INF, -INF)
        m, r = self.get(x)
        return (r, r) if m == 0 else (-INF, INF)

    def _contains(self, pt):
        return all(ccontains(c, pt[x]) for x, c in zip(self.scope, self.vals))

    # value of a linear form as a congruence
    def lin_value(self, lin: Lin, skip: str | None = None):
        acc = (0, lin.const)
        for x, a in lin.coeffs:
            if x == skip:
                continue
            acc = cadd(acc, cscale(a, self.get(x)))
        return acc

    def _solve(self, lin: Lin, modulus: int, residue: int):
        """Refine every unit-coefficient variable of ``lin ≡ residue (mod modulus)``;
        ``modulus = 0`` means the equation ``lin = residue``."""
        r = self
        for _ in range(2):
            for x, a in lin.coeffs:
                if abs(a) != 1 or r.is_bot():
                    continue
                rest = r.lin_value(lin, skip=x)
                # a*x ≡ residue - rest
                rhs = cadd((modulus, residue), cscale(-1, rest))
                val = cscale(a, rhs)  # a = ±1 so a is its own inverse
                i = r.scope.index(x)
                r = r._with(i, cmeet(r.vals[i], val))
        if not r.is_bot():
            v = r.lin_value(lin)
            if cmeet(v, cnorm(modulus, residue)) is None:
                return Congruence.bot(self.scope)
        return r

    def _test_le(self, lin):
        return self

    def _test_eq(self, lin):
        return self._solve(lin, 0, 0)

    def _test_modeq(self, c: ModEq):
        if abs(c.r) >= abs(c.c):
            return Congruence.bot(self.scope)
        return self._solve(c.lin, abs(c.c), c.r)

    def _assign_mod(self, x, e: Mod):
        v = self.lin_value(e.expr)
        val = cnorm(gcd(v[0], abs(e.c)), v[1])
        if v[0] == 0:
            val = (0, trunc_mod(v[1], e.c))
        r = self.project(x)
        return r._with(r.scope.index(x), val)

    def constraints(self):
        out = []
        for x, (m, r) in zip(self.scope, self.vals):
            if m == 0:
                out.append(f"{x} = {r}")
            elif m > 1:
                out.append(f"{x} ≡ {r} mod {m}")
        return out
