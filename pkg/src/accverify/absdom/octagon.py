"""Integer octagons as tightly closed difference-bound matrices.

Variable ``k`` owns rows/columns ``2k`` (standing for ``+x``) and ``2k+1``
(``-x``).  ``m[i][j] = c`` encodes ``V_i - V_j <= c``.  Bounds are Python
integers or ``inf``, so closure is exact.  Every non-bottom element is kept
tightly closed (shortest paths, even unary bounds, strengthening).
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .base import INF, BaseAbstract, check_scope, floor_div
from .linexpr import Cmp, Cond, Lin


def _close(m: list[list], n2: int):
    """Tight closure in place; returns None when the octagon is empty."""
    for k in range(n2):
        mk = m[k]
        for i in range(n2):
            mik = m[i][k]
            if mik == INF:
                continue
            mi = m[i]
            for j, v in enumerate(mk):
                w = mik + v
                if w < mi[j]:
                    mi[j] = w
    for i in range(n2):
        if m[i][i] < 0:
            return None
        m[i][i] = 0
    for i in range(n2):
        v = m[i][i ^ 1]
        if v != INF and v % 2:
            m[i][i ^ 1] = v - 1
    for i in range(n2):
        if m[i][i ^ 1] + m[i ^ 1][i] < 0:
            return None
    half = [m[i][i ^ 1] for i in range(n2)]
    for i in range(n2):
        hi = half[i]
        if hi == INF:
            continue
        mi = m[i]
        for j in range(n2):
            hj = half[j ^ 1]
            if hj == INF:
                continue
            w = (hi + hj) // 2
            if w < mi[j]:
                mi[j] = w
    return m


def _add_to(m: list[list], i: int, j: int, c) -> None:
    """Record ``V_i - V_j <= c`` and its coherent twin."""
    if c < m[i][j]:
        m[i][j] = c
    if c < m[j ^ 1][i ^ 1]:
        m[j ^ 1][i ^ 1] = c


def _lin_entries(lin: Lin, idx: Mapping[str, int]):
    """If ``lin <= 0`` is octagonal, return the DBM entry (i, j, bound)."""
    cs, k = lin.coeffs, lin.const
    if len(cs) == 1:
        (x, a), = cs
        if abs(a) != 1:
            return None
        v = idx[x]
        i = 2 * v if a > 0 else 2 * v + 1
        return (i, i ^ 1, 2 * (-k))
    if len(cs) == 2:
        (x, a), (y, b) = cs
        if abs(a) != 1 or abs(b) != 1:
            return None
        i = 2 * idx[x] if a > 0 else 2 * idx[x] + 1
        j = 2 * idx[y] + 1 if b > 0 else 2 * idx[y]
        return (i, j, -k)
    return None


class Octagon(BaseAbstract):
    tag = "octagon"
    __slots__ = ("scope", "m")

    def __init__(self, scope: Sequence[str], m):
        self.scope = check_scope(scope)
        self.m = m  # closed matrix (list of lists) or None for bottom

    @classmethod
    def top(cls, scope):
        scope = tuple(scope)
        n2 = 2 * len(scope)
        m = [[INF] * n2 for _ in range(n2)]
        for i in range(n2):
            m[i][i] = 0
        return cls(scope, m)

    @classmethod
    def bot(cls, scope):
        return cls(scope, None)

    @classmethod
    def from_matrix(cls, scope, m):
        """Close an arbitrary coherent matrix."""
        m = [row[:] for row in m]
        return cls(scope, _close(m, len(m)))

    def is_bot(self):
        return self.m is None

    def _idx(self) -> dict[str, int]:
        return {x: i for i, x in enumerate(self.scope)}

    def _copy(self):
        return [row[:] for row in self.m]

    # lattice
    def leq(self, o):
        self._same(o)
        if self.m is None:
            return True
        if o.m is None:
            return False
        for ra, rb in zip(self.m, o.m):
            for a, b in zip(ra, rb):
                if a > b:
                    return False
        return True

    def join(self, o):
        self._same(o)
        if self.m is None:
            return o
        if o.m is None:
            return self
        return Octagon(self.scope, [[a if a >= b else b for a, b in zip(ra, rb)]
                                    for ra, rb in zip(self.m, o.m)])

    def meet(self, o):
        self._same(o)
        if self.m is None or o.m is None:
            return Octagon.bot(self.scope)
        m = [[a if a <= b else b for a, b in zip(ra, rb)] for ra, rb in zip(self.m, o.m)]
        return Octagon(self.scope, _close(m, len(m)))

    def _threshold_table(self, thresholds: Iterable[Cond] | None):
        table: dict[tuple[int, int], set] = {}
        if not thresholds:
            return table
        idx = self._idx()
        for c in thresholds:
            if type(c) is not Cmp or any(x not in idx for x in c.lin.vars):
                continue
            lins = [c.lin] if c.op == "<=" else [c.lin, -c.lin]
            for lin in lins:
                e = _lin_entries(lin, idx)
                if e is None:
                    continue
                i, j, b = e
                table.setdefault((i, j), set()).add(b)
                table.setdefault((j ^ 1, i ^ 1), set()).add(b)
        return table

    def widen(self, o, thresholds=None):
        self._same(o)
        o = self.join(o)
        if self.m is None:
            return o
        table = self._threshold_table(thresholds)
        n2 = len(self.m)
        m = []
        for i in range(n2):
            ra, rb = self.m[i], o.m[i]
            row = []
            for j in range(n2):
                a, b = ra[j], rb[j]
                if b <= a:
                    row.append(a)
                    continue
                above = [t for t in table.get((i, j), ()) if t >= b]
                row.append(min(above) if above else INF)
            m.append(row)
        return Octagon(self.scope, _close(m, n2))

    # scope
    def reshape(self, scope):
        scope = check_scope(scope)
        if self.m is None:
            return Octagon.bot(scope)
        if scope == self.scope:
            return self
        old = self._idx()
        src = []
        for x in scope:
            k = old.get(x)
            src.extend((None, None) if k is None else (2 * k, 2 * k + 1))
        n2 = len(src)
        m = []
        for i, si in enumerate(src):
            row = self.m[si] if si is not None else None
            r = []
            for j, sj in enumerate(src):
                if i == j:
                    r.append(0)
                elif si is None or sj is None:
                    r.append(INF)
                else:
                    r.append(row[sj])
            m.append(r)
        return Octagon(scope, m)

    def project(self, x):
        if self.m is None:
            return self
        k = self.scope.index(x)
        m = self._copy()
        for p in (2 * k, 2 * k + 1):
            row = m[p]
            for j in range(len(m)):
                row[j] = INF
                m[j][p] = INF
            row[p] = 0
        return Octagon(self.scope, m)

    def _renamed(self, mp):
        return Octagon(tuple(mp.get(x, x) for x in self.scope), self.m)

    # queries
    def bounds(self, x):
        if self.m is None:
            return (INF, -INF)
        k = self.scope.index(x)
        hi = self.m[2 * k][2 * k + 1]
        lo = self.m[2 * k + 1][2 * k]
        return (-lo // 2 if lo != INF else -INF, hi // 2 if hi != INF else INF)

    def _contains(self, pt):
        vals = []
        for x in self.scope:
            v = pt[x]
            vals.extend((v, -v))
        for i, row in enumerate(self.m):
            vi = vals[i]
            for j, c in enumerate(row):
                if vi - vals[j] > c:
                    return False
        return True

    # transfer
    def add_constraints(self, entries) -> "Octagon":
        if self.m is None:
            return self
        m = self._copy()
        changed = False
        for i, j, c in entries:
            if c < m[i][j] or c < m[j ^ 1][i ^ 1]:
                _add_to(m, i, j, c)
                changed = True
        if not changed:
            return self
        return Octagon(self.scope, _close(m, len(m)))

    def _test_le(self, lin: Lin):
        idx = self._idx()
        e = _lin_entries(lin, idx)
        if e is not None:
            return self.add_constraints([e])
        # derive the octagonal consequences from the bounds of the other terms
        entries = []
        cs = lin.coeffs
        mins = []
        for x, a in cs:
            lo, hi = self.bounds(x)
            mins.append(a * lo if a > 0 else a * hi)
        total = sum(mins) + lin.const
        unit3 = len(cs) == 3 and all(abs(a) == 1 for _, a in cs)
        for p, (x, a) in enumerate(cs):
            rest = total - mins[p] if mins[p] != -INF else _sum_except(mins, lin.const, {p})
            if unit3:
                # the other two terms form an octagonal pair; use its own bound
                (y, b), (z, c) = [cs[q] for q in range(3) if q != p]
                e = _lin_entries(Lin(((y, -b), (z, -c)), 0), idx)
                hi = self.m[e[0]][e[1]]
                if hi != INF and (rest != rest or rest == -INF or lin.const - hi > rest):
                    rest = lin.const - hi
            if rest == -INF or rest != rest:
                continue
            # a*x <= -rest
            v = idx[x]
            if a > 0:
                entries.append((2 * v, 2 * v + 1, 2 * floor_div(-rest, a)))
            else:
                entries.append((2 * v + 1, 2 * v, 2 * floor_div(-rest, -a)))
        for p in range(len(cs)):
            for q in range(p + 1, len(cs)):
                (x, a), (y, b) = cs[p], cs[q]
                if abs(a) != 1 or abs(b) != 1:
                    continue
                rest = _sum_except(mins, lin.const, {p, q})
                if rest == -INF:
                    continue
                sub = Lin(((x, a), (y, b)), rest)
                e2 = _lin_entries(sub, idx)
                if e2 is not None:
                    entries.append(e2)
        if not entries:
            return self
        return self.add_constraints(entries)

    def constraints(self):
        out = []
        n = len(self.scope)
        for k, x in enumerate(self.scope):
            lo, hi = self.bounds(x)
            if lo == hi:
                out.append(f"{x} = {lo}")
                continue
            if lo != -INF:
                out.append(f"{x} >= {lo}")
            if hi != INF:
                out.append(f"{x} <= {hi}")
        for a in range(n):
            la, ha = self.bounds(self.scope[a])
            for b in range(a + 1, n):
                x, y = self.scope[a], self.scope[b]
                lb, hb = self.bounds(y)
                if (la == ha and la != -INF) or (lb == hb and lb != -INF):
                    continue
                # x - y in [-m[2b][2a], m[2a][2b]]
                d_hi = self.m[2 * a][2 * b]
                d_lo = -self.m[2 * b][2 * a]
                s_hi = self.m[2 * a][2 * b + 1]
                s_lo = -self.m[2 * a + 1][2 * b]
                out.extend(_rel(f"{x} - {y}", d_lo, d_hi, ha - lb, la - hb, x, y, "-"))
                out.extend(_rel(f"{x} + {y}", s_lo, s_hi, ha + hb, la + lb, x, y, "+"))
        return out


def _sum_except(mins, const, skip):
    s = const
    for i, v in enumerate(mins):
        if i not in skip:
            s += v
    return s


def _rel(label, lo, hi, implied_hi, implied_lo, x, y, op):
    """Render a binary constraint unless the unary bounds already imply it."""
    out = []
    if lo == hi and lo != -INF:
        if op == "-":
            out.append(f"{x} = {y}" if lo == 0 else f"{x} = {y} {'+' if lo > 0 else '-'} {abs(lo)}")
        else:
            out.append(f"{label} = {lo}")
        return out
    if lo != -INF and lo > implied_lo:
        out.append(f"{label} >= {lo}")
    if hi != INF and hi < implied_hi:
        out.append(f"{label} <= {hi}")
    return out
