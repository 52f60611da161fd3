"""Non-relational interval domain."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .base import INF, BaseAbstract, ceil_div, check_scope, floor_div, fmt_bound
from .linexpr import Cmp, Cond, Lin, Mod, ModEq, cond_vars


def unary_thresholds(thresholds: Iterable[Cond] | None) -> dict[str, set]:
    """Per variable, the boundary constants of single-variable threshold atoms."""
    out: dict[str, set] = {}
    for c in thresholds or ():
        if type(c) is not Cmp or len(c.lin.coeffs) != 1:
            continue
        (x, a), k = c.lin.coeffs[0], c.lin.const
        # a*x + k <= 0  (or = 0): boundary at -k/a, rounded both ways
        out.setdefault(x, set()).update({floor_div(-k, a), ceil_div(-k, a)})
    return out


def widen_bound_hi(old, new, cands) -> object:
    if new <= old:
        return old
    above = [t for t in cands if t >= new]
    return min(above) if above else INF


def widen_bound_lo(old, new, cands) -> object:
    if new >= old:
        return old
    below = [t for t in cands if t <= new]
    return max(below) if below else -INF


class Interval(BaseAbstract):
    tag = "interval"
    __slots__ = ("scope", "box")

    def __init__(self, scope: Sequence[str], box):
        self.scope = check_scope(scope)
        self.box = box  # tuple of (lo, hi) or None for bottom

    @classmethod
    def top(cls, scope):
        scope = tuple(scope)
        return cls(scope, tuple((-INF, INF) for _ in scope))

    @classmethod
    def bot(cls, scope):
        return cls(scope, None)

    def is_bot(self) -> bool:
        return self.box is None

    def _idx(self, x: str) -> int:
        return self.scope.index(x)

    def leq(self, o):
        self._same(o)
        if self.box is None:
            return True
        if o.box is None:
            return False
        return all(ol <= l and h <= oh for (l, h), (ol, oh) in zip(self.box, o.box))

    def join(self, o):
        self._same(o)
        if self.box is None:
            return o
        if o.box is None:
            return self
        return Interval(self.scope, tuple((min(a, c), max(b, d)) for (a, b), (c, d) in zip(self.box, o.box)))

    def meet(self, o):
        self._same(o)
        if self.box is None or o.box is None:
            return Interval.bot(self.scope)
        out = []
        for (a, b), (c, d) in zip(self.box, o.box):
            lo, hi = max(a, c), min(b, d)
            if lo > hi:
                return Interval.bot(self.scope)
            out.append((lo, hi))
        return Interval(self.scope, tuple(out))

    def widen(self, o, thresholds=None):
        self._same(o)
        o = self.join(o)
        if self.box is None:
            return o
        th = unary_thresholds(thresholds)
        out = []
        for x, (a, b), (c, d) in zip(self.scope, self.box, o.box):
            cands = th.get(x, ())
            out.append((widen_bound_lo(a, c, cands), widen_bound_hi(b, d, cands)))
        return Interval(self.scope, tuple(out))

    def reshape(self, scope):
        scope = check_scope(scope)
        if self.box is None:
            return Interval.bot(scope)
        cur = dict(zip(self.scope, self.box))
        return Interval(scope, tuple(cur.get(x, (-INF, INF)) for x in scope))

    def project(self, x):
        if self.box is None:
            return self
        i = self._idx(x)
        b = list(self.box)
        b[i] = (-INF, INF)
        return Interval(self.scope, tuple(b))

    def _renamed(self, m):
        return Interval(tuple(m.get(x, x) for x in self.scope), self.box)

    def bounds(self, x):
        if self.box is None:
            return (INF, -INF)
        return self.box[self._idx(x)]

    def _contains(self, pt):
        return all(lo <= pt[x] <= hi for x, (lo, hi) in zip(self.scope, self.box))

    def _test_le(self, lin: Lin):
        box = list(self.box)
        idx = {x: self._idx(x) for x in lin.vars}
        for _ in range(3):
            changed = False
            for j, (xj, aj) in enumerate(lin.coeffs):
                rest_lo = lin.const
                for k, (xk, ak) in enumerate(lin.coeffs):
                    if k == j:
                        continue
                    lo, hi = box[idx[xk]]
                    rest_lo += ak * lo if ak > 0 else ak * hi
                    if rest_lo == INF:
                        break
                if rest_lo in (INF, -INF) or rest_lo != rest_lo:
                    continue
                lo, hi = box[idx[xj]]
                # aj * xj <= -rest_lo
                if aj > 0:
                    nh = floor_div(-rest_lo, aj)
                    if nh < hi:
                        hi, changed = nh, True
                else:
                    nl = ceil_div(-rest_lo, aj)
                    if nl > lo:
                        lo, changed = nl, True
                if lo > hi:
                    return Interval.bot(self.scope)
                box[idx[xj]] = (lo, hi)
            if not changed:
                break
        return Interval(self.scope, tuple(box))

    def constraints(self):
        out = []
        for x, (lo, hi) in zip(self.scope, self.box):
            out.extend(fmt_bound(x, lo, hi))
        return out
