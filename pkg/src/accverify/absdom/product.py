"""Reduced product of octagons and congruences."""

from __future__ import annotations

from typing import Sequence

from .base import INF, BaseAbstract, ScopeError, check_scope
from .congruence import Congruence, cadd, cmeet, cscale
from .linexpr import Lin, Mod, ModEq
from .octagon import Octagon


def reduce_pair(oct_: Octagon, cong: Congruence) -> tuple[Octagon, Congruence]:
    """One round of mutual refinement.

    Octagon bounds are moved onto the nearest values of the residue class;
    a pinned octagon variable pins the congruence, and residues are copied
    along octagonal equalities.  Never removes points.
    """
    if oct_.is_bot() or cong.is_bot():
        return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
    entries = []
    vals = list(cong.vals)
    for k, x in enumerate(oct_.scope):
        lo, hi = oct_.bounds(x)
        m, r = vals[k]
        if m == 0:
            if not (lo <= r <= hi):
                return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
            if lo != r:
                entries.append((2 * k + 1, 2 * k, -2 * r))
            if hi != r:
                entries.append((2 * k, 2 * k + 1, 2 * r))
            continue
        nlo, nhi = lo, hi
        if lo != -INF and m > 1:
            nlo = lo + (r - lo) % m
        if hi != INF and m > 1:
            nhi = hi - (hi - r) % m
        if nlo > nhi:
            return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
        if nlo != lo:
            entries.append((2 * k + 1, 2 * k, -2 * nlo))
        if nhi != hi:
            entries.append((2 * k, 2 * k + 1, 2 * nhi))
        if nlo == nhi:
            vals[k] = (0, nlo)
    o2 = oct_.add_constraints(entries) if entries else oct_
    if o2.is_bot():
        return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
    # residues travel along octagonal equalities x - y = c and x + y = c
    m = o2.m
    n = len(vals)
    for a in range(n):
        for b in range(a + 1, n):
            d_hi, d_lo = m[2 * a][2 * b], m[2 * b][2 * a]
            if d_hi != INF and d_hi == -d_lo:
                ca = cmeet(vals[a], cadd(vals[b], (0, d_hi)))
                if ca is None:
                    return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
                vals[a] = ca
                vals[b] = cmeet(vals[b], cadd(ca, (0, -d_hi)))
            s_hi, s_lo = m[2 * a][2 * b + 1], m[2 * a + 1][2 * b]
            if s_hi != INF and s_hi == -s_lo:
                ca = cmeet(vals[a], cadd(cscale(-1, vals[b]), (0, s_hi)))
                if ca is None:
                    return Octagon.bot(oct_.scope), Congruence.bot(cong.scope)
                vals[a] = ca
                vals[b] = cmeet(vals[b], cadd(cscale(-1, ca), (0, s_hi)))
    c2 = Congruence(cong.scope, tuple(vals))
    return o2, c2


class OctCong(BaseAbstract):
    tag = "octcong"
    __slots__ = ("scope", "oct", "cong")

    def __init__(self, scope: Sequence[str], oct_: Octagon, cong: Congruence, reduce: bool = True):
        self.scope = check_scope(scope)
        if reduce:
            oct_, cong = reduce_pair(oct_, cong)
        self.oct, self.cong = oct_, cong

    @classmethod
    def top(cls, scope):
        return cls(scope, Octagon.top(scope), Congruence.top(scope), reduce=False)

    @classmethod
    def bot(cls, scope):
        return cls(scope, Octagon.bot(scope), Congruence.bot(scope), reduce=False)

    def is_bot(self):
        return self.oct.is_bot() or self.cong.is_bot()

    def _mk(self, o, c, reduce=True):
        return OctCong(o.scope, o, c, reduce)

    def leq(self, o):
        self._same(o)
        if self.is_bot():
            return True
        if o.is_bot():
            return False
        return self.oct.leq(o.oct) and self.cong.leq(o.cong)

    def join(self, o):
        self._same(o)
        if self.is_bot():
            return o
        if o.is_bot():
            return self
        return self._mk(self.oct.join(o.oct), self.cong.join(o.cong))

    def meet(self, o):
        self._same(o)
        return self._mk(self.oct.meet(o.oct), self.cong.meet(o.cong))

    def widen(self, o, thresholds=None):
        self._same(o)
        if self.is_bot():
            return self.join(o)
        if o.is_bot():
            return self
        return self._mk(self.oct.widen(o.oct, thresholds), self.cong.widen(o.cong, thresholds))

    def reshape(self, scope):
        return self._mk(self.oct.reshape(scope), self.cong.reshape(scope), reduce=False)

    def project(self, x):
        if self.is_bot():
            return self
        return self._mk(self.oct.project(x), self.cong.project(x), reduce=False)

    def _renamed(self, m):
        return self._mk(self.oct._renamed(m), self.cong._renamed(m), reduce=False)

    def bounds(self, x):
        if self.is_bot():
            return (INF, -INF)
        return self.oct.bounds(x)

    def singleton(self, x):
        if self.is_bot():
            return None
        v = self.oct.singleton(x)
        if v is None:
            m, r = self.cong.get(x)
            return r if m == 0 else None
        return v

    def _contains(self, pt):
        return self.oct._contains(pt) and self.cong._contains(pt)

    def test(self, c):
        if self.is_bot():
            return self
        return self._mk(self.oct.test(c), self.cong.test(c))

    def _test_le(self, lin):  # pragma: no cover - test() is overridden
        return self._mk(self.oct._test_le(lin), self.cong._test_le(lin))

    def assign(self, x, e):
        if x not in self.scope:
            raise ScopeError(f"{x} not in scope")
        if self.is_bot():
            return self
        return self._mk(self.oct.assign(x, e), self.cong.assign(x, e))

    def constraints(self):
        return self.oct.constraints() + [c for c in self.cong.constraints()
                                         if "≡" in c]
