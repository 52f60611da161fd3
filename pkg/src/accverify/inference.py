"""Abstract interpretation of programs against an SAA.

The analyzer threads, through every expression, a path condition ``Φ``
(a numerical abstraction of the integer variables in scope) and an effect
``ε`` mapping each automaton state to the accumulator values reachable
there together with their relation to those variables.  Values carry
refinement types: integers are base abstractions over the scope plus
``ν``; functions are sets of closures.

Functions are summarized per lambda and call string.  A summary maps an
input state (parameter relations and an input effect) to an output type and
output effect.  Each summary scope has ghost copies ``$pre0 ..`` of the
accumulators at entry so that outputs can relate the accumulators before
and after a call.

Fixpoint iteration is round-robin: the program entry, then every summary
body, until a full round changes nothing.  Growing summaries are joined and,
after ``widen_delay`` increases, widened with thresholds.  The last round's
observations are what the checks and the execution map report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import absdom, effectdom
from .absdom import (
    HAVOC, NU, TRUE, UNKNOWN, And, BaseAbstract, Cmp, Cond, Lin, Mod, NotSimple, Or,
    compile_cond, compile_expr, eq, le, negate,
)
from .effectdom import Effect, SafetyReport
from .lang import (
    CMP_OPS, App, Assert, BinOp, Const, Ev, If, Lam, Let, LetPair, LetRec, Nondet, Pair,
    Proj, Term, UNIT, UnOp, Var, app_spine, free_vars, iter_nodes, lambda_chain,
    main_arity, rename_apart,
)
from .saa import Saa, acc_names

__all__ = [
    "AnalysisConfig", "AnalysisResult", "Context", "ExecutionMap", "NodeRecord",
    "DriftType", "Bot", "Top", "Base", "Eff", "Fun", "FunEntry", "Clos", "PairT",
    "BOT", "TOP", "BOOL", "UNIT_T", "infer", "transform_node", "subtype_leq",
    "widen_map", "tjoin",
]

VERIFIED, UNKNOWN_VERDICT = "Verified", "Unknown"


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class AnalysisConfig:
    domain: str = "octagon"
    widen_delay: int = 2
    thresholds: bool = True
    ctx_depth: int = 0
    trace_partition: bool = False
    max_tokens: int = 2
    max_iterations: int = 80

    def __post_init__(self):
        absdom.domain_class(self.domain)
        if self.ctx_depth not in (0, 1):
            raise ValueError("ctx_depth must be 0 or 1")
        if self.widen_delay < 0 or self.max_tokens < 0 or self.max_iterations < 1:
            raise ValueError("negative analysis parameter")

    def label(self) -> str:
        parts = [f"ctx{self.ctx_depth}", self.domain]
        if self.trace_partition:
            parts.append("tp")
        if not self.thresholds:
            parts.append("noth")
        return "/".join(parts)


@dataclass(frozen=True, order=True)
class Context:
    """Call string (call-site node ids, innermost last) and partition tokens."""
    callstring: tuple = ()
    tokens: tuple = ()


# ---------------------------------------------------------------- types

class DriftType:
    __slots__ = ()


class Bot(DriftType):
    __slots__ = ()

    def __repr__(self):
        return "⊥"


class Top(DriftType):
    __slots__ = ()

    def __repr__(self):
        return "⊤"


BOT, TOP = Bot(), Top()


@dataclass(frozen=True, eq=False)
class Base(DriftType):
    """``int`` (with a β over scope+ν), ``bool`` or ``unit``."""
    kind: str
    beta: BaseAbstract | None = None

    def __repr__(self):
        if self.kind == "int" and self.beta is not None:
            return f"int{self.beta}"
        return self.kind


BOOL, UNIT_T = Base("bool"), Base("unit")
INTVAR = Base("int")  # environment marker: the variable itself lives in the scope


@dataclass(frozen=True, eq=False)
class Eff(DriftType):
    effect: Effect


@dataclass(frozen=True, eq=False)
class FunEntry:
    param: str
    in_type: DriftType
    in_eff: Effect | None
    out_type: DriftType
    out_eff: Effect | None


@dataclass(frozen=True, eq=False)
class Fun(DriftType):
    """Function type as a table from contexts to input/output pairs."""
    table: Mapping[Context, FunEntry]


@dataclass(frozen=True, eq=False)
class Clos(DriftType):
    """A set of closures ``(lambda node id, local)``.  ``local`` closures were
    created in the current activation, so their captured integers are the
    variables of the same name in scope."""
    closures: frozenset

    def __repr__(self):
        return "fun{" + ",".join(f"λ{n}" for n, _ in sorted(self.closures)) + "}"


@dataclass(frozen=True, eq=False)
class PairT(DriftType):
    left: DriftType
    right: DriftType

    def __repr__(self):
        return f"({self.left!r} * {self.right!r})"


def _is_int(v) -> bool:
    return type(v) is Base and v.kind == "int"


def tjoin(a: DriftType | None, b: DriftType | None, widen: bool = False, th=None) -> DriftType:
    if a is None or type(a) is Bot:
        return b if b is not None else BOT
    if b is None or type(b) is Bot:
        return a
    if type(a) is Top or type(b) is Top:
        return TOP
    if type(a) is Base and type(b) is Base:
        if a.kind != b.kind:
            return TOP
        if a.beta is None or b.beta is None:
            return a if a.beta is None else b
        return Base(a.kind, a.beta.widen(b.beta, th) if widen else a.beta.join(b.beta))
    if type(a) is Clos and type(b) is Clos:
        return Clos(a.closures | b.closures)
    if type(a) is PairT and type(b) is PairT:
        return PairT(tjoin(a.left, b.left, widen, th), tjoin(a.right, b.right, widen, th))
    if type(a) is Eff and type(b) is Eff:
        j = (effectdom.widen_thresholds(a.effect, b.effect, th or ()) if widen
             else effectdom.join(a.effect, b.effect))
        return Eff(j)
    return TOP


def subtype_leq(t1: DriftType, t2: DriftType) -> bool:
    """Structural subtyping: contravariant inputs, covariant outputs."""
    if type(t1) is Bot:
        return type(t2) is not Top
    if type(t2) is Top:
        return True
    if type(t1) is Top or type(t2) is Bot:
        return False
    if type(t1) is Base and type(t2) is Base:
        if t1.kind != t2.kind:
            return False
        if t2.beta is None:
            return True
        if t1.beta is None:
            return t2.beta.is_top()
        return t1.beta.leq(t2.beta)
    if type(t1) is Eff and type(t2) is Eff:
        return effectdom.leq(t1.effect, t2.effect)
    if type(t1) is Clos and type(t2) is Clos:
        return t1.closures <= t2.closures
    if type(t1) is PairT and type(t2) is PairT:
        return subtype_leq(t1.left, t2.left) and subtype_leq(t1.right, t2.right)
    if type(t1) is Fun and type(t2) is Fun:
        for ctx, e2 in t2.table.items():
            e1 = t1.table.get(ctx)
            if e1 is None:
                return False
            if not subtype_leq(e2.in_type, e1.in_type) or not subtype_leq(e1.out_type, e2.out_type):
                return False
            if e1.in_eff is not None and e2.in_eff is not None and not effectdom.leq(e2.in_eff, e1.in_eff):
                return False
            if e1.out_eff is not None and e2.out_eff is not None and not effectdom.leq(e1.out_eff, e2.out_eff):
                return False
        return True
    return False


def _reshape_val(v: DriftType, scope: tuple) -> DriftType:
    """Move a value to the scope ``scope`` (which ends with ν)."""
    if type(v) is Base and v.beta is not None:
        return v if v.beta.scope == scope else Base(v.kind, v.beta.reshape(scope))
    if type(v) is PairT:
        return PairT(_reshape_val(v.left, scope), _reshape_val(v.right, scope))
    return v


def _free_val(v: DriftType, phi: BaseAbstract) -> DriftType:
    """A scope-free version of ``v``: integer relations are projected to ν
    and closures lose locality."""
    if type(v) is Base and v.beta is not None:
        b = v.beta.meet(phi.add_var(NU)) if NU not in phi.scope else v.beta
        return Base(v.kind, b.reshape((NU,)))
    if type(v) is Clos:
        if all(not loc for _, loc in v.closures):
            return v
        return Clos(frozenset((n, False) for n, _ in v.closures))
    if type(v) is PairT:
        return PairT(_free_val(v.left, phi), _free_val(v.right, phi))
    return v


# ---------------------------------------------------------------- records

@dataclass
class NodeRecord:
    """What the last round observed at one program node under one context."""
    scope: tuple
    phi: BaseAbstract
    env: dict
    in_eff: Effect
    result: DriftType
    out_eff: Effect | None

    def env_types(self) -> dict:
        """Environment typing with in-scope integers as singleton relations."""
        out = {}
        for x, v in self.env.items():
            if v is INTVAR:
                b = self.phi.add_var(NU).test(eq(Lin.var(NU), Lin.var(x)))
                out[x] = Base("int", b)
            else:
                out[x] = v
        return out


ExecutionMap = dict  # (node id, Context) -> NodeRecord


@dataclass
class Obligation:
    nid: int
    kind: str
    ok: bool
    detail: str = ""


@dataclass
class AnalysisResult:
    verdict: str
    config: AnalysisConfig
    execution_map: ExecutionMap
    ev_effects: dict            # (node id, Context) -> Effect after the event
    exit_effect: Effect | None
    safety: SafetyReport
    failures: list              # failed obligations of the last round
    stats: dict
    program: Term
    diagnostics: list = field(default_factory=list)
    _analyzer: object = field(default=None, repr=False)

    @property
    def verified(self) -> bool:
        return self.verdict == VERIFIED

    def effect_at(self, nid: int) -> Effect | None:
        """Post-event effect at an ``ev`` node, joined over contexts."""
        out = None
        for (n, _), e in sorted(self.ev_effects.items(), key=lambda kv: repr(kv[0])):
            if n == nid:
                out = e if out is None else effectdom.join(out, e)
        return out

    def summaries(self) -> dict:
        return self._analyzer.export_summaries() if self._analyzer else {}


# ---------------------------------------------------------------- analyzer internals

@dataclass
class _St:
    phi: BaseAbstract
    eff: Effect


@dataclass(frozen=True)
class _LamInfo:
    nid: int
    params: tuple
    body: Term
    captured: tuple
    rec_name: str | None


@dataclass
class _Frame:
    ctx: tuple
    ghosts: tuple
    key: object


class _Entry:
    __slots__ = ("key", "int_params", "scope", "in_phi", "in_eff", "in_types",
                 "out_val", "out_eff", "n_in", "n_out")

    def __init__(self, key, int_params, scope):
        self.key = key
        self.int_params = int_params
        self.scope = scope
        self.in_phi = None
        self.in_eff = None
        self.in_types = None
        self.out_val = None
        self.out_eff = None
        self.n_in = 0
        self.n_out = 0


def _one(outs):
    """Join a list of (value, state) outcomes; None when empty."""
    if not outs:
        return None
    v, s = outs[0]
    phi, eff = s.phi, s.eff
    for v2, s2 in outs[1:]:
        v = tjoin(v, v2)
        phi = phi.join(s2.phi)
        eff = effectdom.join(eff, s2.eff)
    return v, _St(phi, eff)


def _atoms(c: Cond):
    if type(c) in (And, Or):
        for x in c.items:
            yield from _atoms(x)
    elif type(c) is Cmp:
        yield c


class _Analyzer:
    def __init__(self, program: Term, a: Saa, cfg: AnalysisConfig):
        self.cfg = cfg
        self.saa = a
        self.tag = cfg.domain
        self.prog = rename_apart(program)
        self.accs = acc_names(a.k)
        self.ghosts = tuple(f"$pre{i}" for i in range(a.k))
        self.arity = main_arity(self.prog)
        self.lams: dict[int, _LamInfo] = {}
        self._collect(self.prog)
        self.atoms = self._harvest()
        self._th_cache: dict = {}
        self.entries: dict = {}
        self.cap_int: dict = {}
        self.clo_int: dict = {}
        self.clo_int_n: dict = {}
        self.clo_fun: dict = {}
        self.clo_fun_n: dict = {}
        self.widenings = 0

    # -- preprocessing ------------------------------------------------------
    def _collect(self, t: Term):
        inner = set()
        rec = {}
        for n in iter_nodes(t):
            if type(n) is LetRec:
                rec[n.fn.nid] = n.name
            if type(n) is Lam and type(n.body) is Lam:
                inner.add(n.body.nid)
        for n in iter_nodes(t):
            if type(n) is Lam and n.nid not in inner:
                ps, body, _ = lambda_chain(n)
                rn = rec.get(n.nid)
                cap = tuple(sorted(free_vars(n) - {rn}))
                self.lams[n.nid] = _LamInfo(n.nid, tuple(ps), body, cap, rn)

    def _harvest(self) -> list:
        atoms = []
        for n in iter_nodes(self.prog):
            c = n.cond if type(n) is If else n.arg if type(n) is Assert else None
            if c is None:
                continue
            try:
                atoms.extend(_atoms(compile_cond(c, lambda x: x)))
            except NotSimple:
                pass
        accs = set(self.accs)
        preds = [t.guard for t in self.saa.transitions if t.guard is not None]
        preds += [p for p in (self.saa.assert_always, self.saa.assert_final) if p is not None]
        for p in preds:
            try:
                atoms.extend(_atoms(compile_cond(p, lambda x: x if x in accs else None)))
            except NotSimple:
                pass
        seen, out = set(), []
        for c in atoms:
            for lin in ([c.lin] if c.op == "<=" else [c.lin, -c.lin]) if c.op != "<>" else [c.lin]:
                k = (lin.coeffs, lin.const)
                if k not in seen:
                    seen.add(k)
                    out.append(Cmp(lin, "<="))
        return out

    def thresholds(self, scope: tuple) -> list:
        if not self.cfg.thresholds:
            return []
        th = self._th_cache.get(scope)
        if th is None:
            sc = set(scope)
            th = [c for c in self.atoms if set(c.lin.vars) <= sc]
            for i, x in enumerate(scope):
                th.append(Cmp(Lin.var(x), "<="))
                th.append(Cmp(Lin.var(x, -1), "<="))
                for y in scope[i + 1:]:
                    th.append(Cmp(Lin.var(x) - Lin.var(y), "<="))
                    th.append(Cmp(Lin.var(y) - Lin.var(x), "<="))
            self._th_cache[scope] = th
        return th

    # -- bookkeeping --------------------------------------------------------
    def fail(self, nid: int, kind: str, detail: str = ""):
        self.obligations.append(Obligation(nid, kind, False, detail))

    def ok(self, nid: int, kind: str):
        self.obligations.append(Obligation(nid, kind, True))

    def _grow_abs(self, old, new, n):
        if old is None:
            return new, True
        if new.leq(old):
            return old, False
        if n >= self.cfg.widen_delay:
            self.widenings += 1
            return old.widen(new, self.thresholds(old.scope)), True
        return old.join(new), True

    def _grow_eff(self, old, new, n):
        if old is None:
            return new, True
        if effectdom.leq(new, old):
            return old, False
        if n >= self.cfg.widen_delay:
            self.widenings += 1
            return effectdom.widen_thresholds(old, new, self.thresholds(old.scope)), True
        return effectdom.join(old, new), True

    def _grow_type(self, old, new, n):
        if old is None:
            return new, True
        if subtype_leq(new, old):
            return old, False
        w = n >= self.cfg.widen_delay
        sc = None
        if _is_int(old) and old.beta is not None:
            sc = self.thresholds(old.beta.scope)
        return tjoin(old, new, widen=w, th=sc), True

    # -- state helpers ------------------------------------------------------
    def escope(self, scope, fr) -> tuple:
        return tuple(scope) + fr.ghosts + self.accs

    def ival(self, st: _St, e) -> Base:
        b = st.phi.add_var(NU)
        if e is HAVOC:
            return Base("int", b)
        return Base("int", b.assign(NU, e))

    def filter(self, st: _St, c: Cond) -> _St | None:
        phi = st.phi.test(c)
        if phi.is_bot():
            return None
        eff = st.eff.pointwise(lambda b: b.test(c))
        if eff.is_bot():
            return None
        return _St(phi, eff)

    def push(self, st: _St, x: str, beta: BaseAbstract, fr) -> _St | None:
        S = st.phi.scope
        if x in S:
            raise RuntimeError(f"binder {x} shadows a variable in scope")
        S2 = S + (x,)
        b = beta.rename(NU, x)
        phi = st.phi.reshape(S2).meet(b.reshape(S2))
        if phi.is_bot():
            return None
        es = self.escope(S2, fr)
        be = b.reshape(es)
        eff = st.eff.reshape(es).pointwise(lambda e: e.meet(be))
        if eff.is_bot():
            return None
        return _St(phi, eff)

    def pop(self, st: _St, xs, fr) -> _St:
        S = tuple(y for y in st.phi.scope if y not in xs)
        return _St(st.phi.reshape(S), st.eff.reshape(self.escope(S, fr)))

    @staticmethod
    def name_of(env):
        return lambda x: x if env.get(x) is INTVAR else None

    def simple_cond(self, t: Term, env) -> Cond | None:
        try:
            return compile_cond(t, self.name_of(env))
        except NotSimple:
            return None

    def simple_expr(self, t: Term, env):
        try:
            e = compile_expr(t, self.name_of(env))
        except NotSimple:
            return None
        return None if e is HAVOC else e

    # -- driver -------------------------------------------------------------
    def run(self) -> AnalysisResult:
        diags = []
        converged = False
        rounds = 0
        for rounds in range(1, self.cfg.max_iterations + 1):
            self.changed = False
            self._reset_round()
            self._top_round()
            for key in sorted(self.entries):
                self._analyze_entry(key)
            if not self.changed:
                converged = True
                break
        if not converged:
            diags.append(f"iteration cap {self.cfg.max_iterations} reached")
        effects = dict(self.ev_post)
        if self.exit_eff is not None:
            effects["exit"] = self.exit_eff
        safety = effectdom.check_safety(effects, self.saa, "exit")
        failures = [o for o in self.obligations if not o.ok]
        verdict = VERIFIED if converged and safety.safe and not failures else UNKNOWN_VERDICT
        for o in failures:
            diags.append(f"node {o.nid}: {o.kind}{': ' + o.detail if o.detail else ''}")
        for loc, q, b in safety.offending:
            diags.append(f"{_loc_name(loc)}: error state {q} may be reached: {b}")
        for kind, loc, q, b in safety.assertion_failures:
            diags.append(f"{_loc_name(loc)}: assert_{kind} not entailed in {q}: {b}")
        stats = {
            "iterations": rounds,
            "converged": converged,
            "summaries": len(self.entries),
            "widenings": self.widenings,
            "nodes": len(self.exec_map),
        }
        return AnalysisResult(verdict, self.cfg, self.exec_map, self.ev_post, self.exit_eff,
                              safety, failures, stats, self.prog, diags, self)

    def _reset_round(self):
        self.obligations: list[Obligation] = []
        self.ev_post: dict = {}
        self.exec_map: ExecutionMap = {}
        self.exit_eff = None

    def _top_round(self):
        fr = _Frame((), (), "top")
        st = _St(absdom.top((), self.tag), effectdom.initial_effect(self.saa, (), self.tag))
        r = _one(self.an(self.prog, {}, st, fr, ()))
        if r is None:
            return
        v, s = r
        if self.arity > 0:
            args = [self.ival(s, HAVOC) for _ in range(self.arity)]
            r = _one(self.apply(v, args, s, fr, [-1] * self.arity, -1))
            if r is None:
                return
            _, s = r
        self.exit_eff = s.eff.reshape(self.accs)

    def _analyze_entry(self, key):
        e = self.entries[key]
        if e.in_phi is None:
            return
        info = self.lams[key[0]]
        env = {}
        for i, p in enumerate(info.params):
            env[p] = INTVAR if i in e.int_params else e.in_types[i]
        for x in self.cap_int.get(info.nid, ()):
            env[x] = INTVAR
        env.update(self.clo_fun.get(info.nid, {}))
        if info.rec_name is not None:
            env[info.rec_name] = Clos(frozenset({(info.nid, True)}))
        fr = _Frame(key[1], self.ghosts, key)
        r = _one(self.an(info.body, env, _St(e.in_phi, e.in_eff), fr, ()))
        if r is None:
            return
        v, s = r
        if _is_int(v):
            out = Base("int", v.beta.meet(s.phi.add_var(NU)))
        else:
            out = _free_val(v, s.phi)
        nv, c1 = self._grow_type(e.out_val, out, e.n_out)
        ne, c2 = self._grow_eff(e.out_eff, s.eff, e.n_out)
        if c1 or c2:
            e.out_val, e.out_eff = nv, ne
            e.n_out += 1
            self.changed = True

    def export_summaries(self) -> dict:
        out = {}
        for key in sorted(self.entries):
            e = self.entries[key]
            info = self.lams[key[0]]
            out[key] = {
                "params": info.params,
                "int_params": e.int_params,
                "in_phi": e.in_phi,
                "in_eff": e.in_eff,
                "out": e.out_val,
                "out_eff": e.out_eff,
            }
        return out

    # -- expressions --------------------------------------------------------
    def an(self, t: Term, env: dict, st: _St, fr: _Frame, tokens: tuple) -> list:
        outs = self._an(t, env, st, fr, tokens)
        key = (t.nid, Context(fr.ctx, tokens))
        r = _one(outs)
        val = r[0] if r else BOT
        oeff = r[1].eff if r else None
        rec = self.exec_map.get(key)
        if rec is None:
            self.exec_map[key] = NodeRecord(st.phi.scope, st.phi, dict(env), st.eff, val, oeff)
        else:
            rec.phi = rec.phi.join(st.phi)
            for x, v in env.items():
                rec.env[x] = tjoin(rec.env.get(x), v) if rec.env.get(x) is not v else v
            rec.in_eff = effectdom.join(rec.in_eff, st.eff)
            rec.result = tjoin(rec.result, val)
            if oeff is not None:
                rec.out_eff = oeff if rec.out_eff is None else effectdom.join(rec.out_eff, oeff)
        return outs

    def _an(self, t, env, st, fr, tokens) -> list:
        cls = type(t)
        if cls is Const:
            v = t.value
            if type(v) is int:
                return [(self.ival(st, Lin.of(v)), st)]
            if type(v) is bool:
                return [(BOOL, st)]
            if v is UNIT:
                return [(UNIT_T, st)]
            self.fail(t.nid, "type", "unsupported constant")
            return [(TOP, st)]
        if cls is Var:
            v = env.get(t.name)
            if v is None:
                self.fail(t.nid, "unbound", t.name)
                return [(TOP, st)]
            if v is INTVAR:
                return [(self.ival(st, Lin.var(t.name)), st)]
            return [(_reshape_val(v, st.phi.scope + (NU,)), st)]
        if cls is Nondet:
            return [(self.ival(st, HAVOC), st)]
        if cls is Lam:
            self.capture(t.nid, env, st)
            return [(Clos(frozenset({(t.nid, True)})), st)]
        if cls is LetRec:
            self.capture(t.fn.nid, env, st)
            env2 = {**env, t.name: Clos(frozenset({(t.fn.nid, True)}))}
            return self.an(t.body, env2, st, fr, tokens)
        if cls is Let:
            return self._let(t, env, st, fr, tokens)
        if cls is LetPair:
            return self._letpair(t, env, st, fr, tokens)
        if cls is If:
            return self._if(t, env, st, fr, tokens)
        if cls is Ev:
            return self._ev(t, env, st, fr, tokens)
        if cls is Assert:
            return self._assert(t, env, st, fr, tokens)
        if cls is App:
            return self._app(t, env, st, fr, tokens)
        if cls is Pair:
            r = _one(self.an(t.left, env, st, fr, tokens))
            if r is None:
                return []
            lv, s1 = r
            r = _one(self.an(t.right, env, s1, fr, tokens))
            if r is None:
                return []
            rv, s2 = r
            return [(PairT(lv, rv), s2)]
        if cls is Proj:
            r = _one(self.an(t.arg, env, st, fr, tokens))
            if r is None:
                return []
            v, s = r
            if type(v) is not PairT:
                self.fail(t.nid, "type", "projection of non-pair")
                return [(TOP, s)]
            return [(v.right if t.index else v.left, s)]
        if cls is UnOp:
            if t.op == "neg":
                return self._arith(t, env, st, fr, tokens)
            r = _one(self.an(t.arg, env, st, fr, tokens))
            if r is None:
                return []
            v, s = r
            if not (type(v) is Base and v.kind == "bool"):
                self.fail(t.nid, "type", "non-boolean operand to not")
                return [(TOP, s)]
            return [(BOOL, s)]
        if cls is BinOp:
            if t.op in ("+", "-", "*", "/", "mod"):
                return self._arith(t, env, st, fr, tokens)
            return self._boolop(t, env, st, fr, tokens)
        self.fail(t.nid, "unsupported", cls.__name__)
        return [(TOP, st)]

    def capture(self, lam: int, env: dict, st: _St):
        info = self.lams[lam]
        ints = []
        S = st.phi.scope
        for x in info.captured:
            v = env.get(x)
            if v is None:
                self.fail(lam, "unbound", x)
                continue
            if v is INTVAR:
                ints.append(x)
                continue
            fv = _free_val(_reshape_val(v, S + (NU,)), st.phi)
            d = self.clo_fun.setdefault(lam, {})
            n = self.clo_fun_n.get((lam, x), 0)
            nv, ch = self._grow_type(d.get(x), fv, n)
            if ch:
                d[x] = nv
                self.clo_fun_n[(lam, x)] = n + 1
                self.changed = True
        ints = tuple(ints)
        prev = self.cap_int.get(lam)
        if prev is not None and prev != ints:
            self.fail(lam, "type", "captured variables change kind")
            return
        self.cap_int[lam] = ints
        proj = st.phi.reshape(ints)
        n = self.clo_int_n.get(lam, 0)
        nv, ch = self._grow_abs(self.clo_int.get(lam), proj, n)
        if ch:
            self.clo_int[lam] = nv
            self.clo_int_n[lam] = n + 1
            self.changed = True

    def _let(self, t: Let, env, st, fr, tokens):
        outs = self.an(t.bound, env, st, fr, tokens)
        if not outs:
            return []
        multi = len(outs) > 1
        S = st.phi.scope
        res = []
        for i, (v, s1) in enumerate(outs):
            tk = tokens + ((t.bound.nid, i),) if multi else tokens
            if t.name.startswith("_"):
                res.extend(self.an(t.body, env, s1, fr, tk))
            elif _is_int(v):
                s2 = self.push(s1, t.name, v.beta, fr)
                if s2 is None:
                    continue
                env2 = {**env, t.name: INTVAR}
                for v3, s3 in self.an(t.body, env2, s2, fr, tk):
                    res.append((_reshape_val(v3, S + (NU,)), self.pop(s3, (t.name,), fr)))
            else:
                res.extend(self.an(t.body, {**env, t.name: v}, s1, fr, tk))
        r = _one(res)
        return [r] if r else []

    def _letpair(self, t: LetPair, env, st, fr, tokens):
        r = _one(self.an(t.bound, env, st, fr, tokens))
        if r is None:
            return []
        v, s = r
        if type(v) is not PairT:
            self.fail(t.nid, "type", "pair pattern on non-pair")
            return [(TOP, s)]
        S = st.phi.scope
        env2 = dict(env)
        pushed = []
        for name, comp in ((t.left, v.left), (t.right, v.right)):
            if name.startswith("_"):
                continue
            if _is_int(comp):
                s = self.push(s, name, _reshape_val(comp, s.phi.scope + (NU,)).beta, fr)
                if s is None:
                    return []
                env2[name] = INTVAR
                pushed.append(name)
            else:
                env2[name] = comp
        res = [(_reshape_val(v3, S + (NU,)), self.pop(s3, tuple(pushed), fr))
               for v3, s3 in self.an(t.body, env2, s, fr, tokens)]
        r = _one(res)
        return [r] if r else []

    def _if(self, t: If, env, st, fr, tokens):
        c = self.simple_cond(t.cond, env)
        if c is not None:
            pre, conds = st, (c, negate(c))
        else:
            r = _one(self.an(t.cond, env, st, fr, tokens))
            if r is None:
                return []
            v, pre = r
            if not (type(v) is Base and v.kind == "bool"):
                self.fail(t.nid, "type", "non-boolean condition")
            conds = (TRUE, TRUE)
        split = self.cfg.trace_partition and len(tokens) < self.cfg.max_tokens
        parts = []
        for bit, (br, cc) in enumerate(((t.then, conds[0]), (t.else_, conds[1]))):
            s2 = self.filter(pre, cc)
            if s2 is None:
                continue
            tk = tokens + ((t.nid, 1 - bit),) if split else tokens
            r = _one(self.an(br, env, s2, fr, tk))
            if r is not None:
                parts.append(r)
        if split or len(parts) <= 1:
            return parts
        return [_one(parts)]

    def _ev(self, t: Ev, env, st, fr, tokens):
        r = _one(self.an(t.arg, env, st, fr, tokens))
        if r is None:
            return []
        v, s = r
        if not _is_int(v):
            self.fail(t.nid, "type", "non-integer event")
            return [(UNIT_T, s)]
        b = v.beta.meet(s.phi.add_var(NU))
        ne = effectdom.extend(s.eff, b)
        key = (t.nid, Context(fr.ctx, tokens))
        old = self.ev_post.get(key)
        self.ev_post[key] = ne if old is None else effectdom.join(old, ne)
        if ne.is_bot():
            return []
        return [(UNIT_T, _St(s.phi, ne))]

    def _assert(self, t: Assert, env, st, fr, tokens):
        c = self.simple_cond(t.arg, env)
        if c is None:
            r = _one(self.an(t.arg, env, st, fr, tokens))
            if r is None:
                return []
            v, s = r
            self.fail(t.nid, "assert", "condition outside the analyzed fragment")
            return [(UNIT_T, s)]
        nc = negate(c)
        proved = st.phi.test(nc).is_bot() or all(b.test(nc).is_bot() for _, b in st.eff.items())
        if proved:
            self.ok(t.nid, "assert")
        else:
            self.fail(t.nid, "assert", "cannot prove assertion")
        s2 = self.filter(st, c)
        return [(UNIT_T, s2)] if s2 is not None else []

    def _arith(self, t, env, st, fr, tokens):
        e = self.simple_expr(t, env)
        if e is not None:
            return [(self.ival(st, e), st)]
        subs = [t.arg] if type(t) is UnOp else [t.left, t.right]
        vals, cur = [], st
        for sub in subs:
            r = _one(self.an(sub, env, cur, fr, tokens))
            if r is None:
                return []
            v, cur = r
            if not _is_int(v):
                self.fail(t.nid, "type", "non-integer operand")
                return [(TOP, cur)]
            vals.append(v)
        S = cur.phi.scope
        temps = ("$l", "$r")[:len(vals)]
        J = S + temps + (NU,)
        b = cur.phi.reshape(J)
        for tmp, v in zip(temps, vals):
            b = b.meet(v.beta.rename(NU, tmp).reshape(J))
        op = "neg" if type(t) is UnOp else t.op
        L = Lin.var("$l")
        if op == "neg":
            b = b.assign(NU, -L)
        elif op in ("+", "-"):
            R = Lin.var("$r")
            b = b.assign(NU, L + R if op == "+" else L - R)
        elif op == "*":
            cl, cr = b.singleton("$l"), b.singleton("$r")
            if cr is not None:
                b = b.assign(NU, L.scale(cr))
            elif cl is not None:
                b = b.assign(NU, Lin.var("$r").scale(cl))
        else:
            zero = b.test(eq(Lin.var("$r"), Lin.of(0)))
            if zero.is_bot():
                self.ok(t.nid, "division")
            else:
                self.fail(t.nid, "division", "divisor may be zero")
            b = b.test(absdom.ne(Lin.var("$r"), Lin.of(0)))
            c = b.singleton("$r")
            if c is not None and c != 0:
                if op == "/":
                    m = abs(c) - 1
                    d = L - Lin.var(NU).scale(c)
                    b = b.test(le(d, Lin.of(m))).test(le(Lin.of(-m), d))
                else:
                    b = b.assign(NU, Mod(L, c))
        return [(Base("int", b.reshape(S + (NU,))), cur)]

    def _boolop(self, t: BinOp, env, st, fr, tokens):
        if self.simple_cond(t, env) is not None:
            return [(BOOL, st)]
        r = _one(self.an(t.left, env, st, fr, tokens))
        if r is None:
            return []
        lv, s1 = r
        if t.op in ("&&", "||"):
            if not (type(lv) is Base and lv.kind == "bool"):
                self.fail(t.nid, "type", f"non-boolean operand to {t.op}")
            outs = [(BOOL, s1)]
            r = _one(self.an(t.right, env, s1, fr, tokens))
            if r is not None:
                rv, s2 = r
                if not (type(rv) is Base and rv.kind == "bool"):
                    self.fail(t.nid, "type", f"non-boolean operand to {t.op}")
                outs.append((BOOL, s2))
            return [_one(outs)]
        r = _one(self.an(t.right, env, s1, fr, tokens))
        if r is None:
            return []
        rv, s2 = r
        if t.op in ("=", "<>"):
            okk = (type(lv) is Base and type(rv) is Base and lv.kind == rv.kind)
        elif t.op in CMP_OPS:
            okk = _is_int(lv) and _is_int(rv)
        else:
            okk = False
        if not okk:
            self.fail(t.nid, "type", f"bad operands to {t.op}")
        return [(BOOL, s2)]

    # -- application --------------------------------------------------------
    def _app(self, t: App, env, st, fr, tokens):
        head, args, apps = app_spine(t)
        r = _one(self.an(head, env, st, fr, tokens))
        if r is None:
            return []
        hv, cur = r
        vals = []
        for a in args:
            r = _one(self.an(a, env, cur, fr, tokens))
            if r is None:
                return []
            v, cur = r
            vals.append(v)
        S = cur.phi.scope + (NU,)
        vals = [_reshape_val(v, S) for v in vals]
        return self.apply(hv, vals, cur, fr, [ap.nid for ap in apps], t.nid)

    def apply(self, hv, vals, st, fr, sites, nid) -> list:
        if type(hv) is not Clos:
            self.fail(nid, "type", "application of a non-function")
            return [(TOP, st)]
        results = []
        for lam, local in sorted(hv.closures):
            info = self.lams[lam]
            n = len(info.params)
            if len(vals) < n:
                self.fail(nid, "type", "partial application")
                results.append((TOP, st))
                continue
            r = self.call(lam, local, vals[:n], st, fr, sites[n - 1], nid)
            if r is None:
                continue
            if len(vals) > n:
                v, s2 = r
                S = s2.phi.scope + (NU,)
                results.extend(self.apply(v, [_reshape_val(x, S) for x in vals[n:]], s2, fr,
                                          sites[n:], nid))
            else:
                results.append(r)
        r = _one(results)
        return [r] if r else []

    def call(self, lam, local, args, st: _St, fr: _Frame, site, nid):
        info = self.lams[lam]
        ctx = (site,) if self.cfg.ctx_depth == 1 else ()
        key = (lam, ctx)
        S = st.phi.scope
        int_idx = tuple(i for i, v in enumerate(args) if _is_int(v))
        cap = self.cap_int.get(lam, ())
        c_loc = tuple(x for x in cap if local and x in S)
        c_non = tuple(x for x in cap if x not in c_loc)
        ptemps = {i: f"$p{i}" for i in int_idx}
        ctemps = {x: f"$c{j}" for j, x in enumerate(c_non)}
        J = S + tuple(ptemps.values()) + tuple(ctemps.values())
        phiJ = st.phi.reshape(J)
        for i in int_idx:
            phiJ = phiJ.meet(args[i].beta.rename(NU, ptemps[i]).reshape(J))
        if c_non:
            ce = self.clo_int.get(lam)
            if ce is None:
                ce = absdom.top(cap, self.tag)
            ce = ce.reshape(c_non).rename_many(ctemps)
            phiJ = phiJ.meet(ce.reshape(J))
        if phiJ.is_bot():
            return None
        T = tuple(info.params[i] for i in int_idx) + cap
        ren = {ptemps[i]: info.params[i] for i in int_idx}
        ren.update({ctemps[x]: x for x in c_non})
        keep = tuple(ptemps.values()) + c_loc + tuple(ctemps.values())
        in_phi = phiJ.reshape(keep).rename_many(ren).reshape(T)
        EJ = J + fr.ghosts + self.accs
        phiE = phiJ.reshape(EJ)
        ET = T + self.ghosts + self.accs
        m = {}
        for q, b in st.eff.items():
            bb = b.reshape(EJ).meet(phiE)
            bb = bb.reshape(keep + self.accs).rename_many(ren).reshape(ET)
            for g, acc in zip(self.ghosts, self.accs):
                bb = bb.test(eq(Lin.var(g), Lin.var(acc)))
            m[q] = bb
        in_eff = Effect(self.saa, ET, self.tag, m)
        in_types = tuple(INTVAR if i in int_idx else _free_val(v, st.phi)
                         for i, v in enumerate(args))

        e = self.entries.get(key)
        if e is None:
            e = self.entries[key] = _Entry(key, int_idx, T)
            self.changed = True
        elif e.int_params != int_idx or e.scope != T:
            self.fail(nid, "type", "argument kinds differ between calls")
            return (TOP, st)
        p2, c1 = self._grow_abs(e.in_phi, in_phi, e.n_in)
        e2, c2 = self._grow_eff(e.in_eff, in_eff, e.n_in)
        if e.in_types is None:
            t2, c3 = in_types, True
        else:
            t2, c3 = [], False
            for o, nw in zip(e.in_types, in_types):
                x, ch = self._grow_type(o, nw, e.n_in)
                t2.append(x)
                c3 = c3 or ch
            t2 = tuple(t2)
        if c1 or c2 or c3:
            e.in_phi, e.in_eff, e.in_types = p2, e2, t2
            e.n_in += 1
            self.changed = True
        if e.out_eff is None:
            return None

        back = {info.params[i]: ptemps[i] for i in int_idx}
        back.update({x: ctemps[x] for x in c_non})
        if _is_int(e.out_val):
            b = e.out_val.beta.rename_many(back).reshape(J + (NU,)).meet(phiJ.reshape(J + (NU,)))
            val = Base("int", b.reshape(S + (NU,)))
        else:
            val = _reshape_val(e.out_val, S + (NU,))
        gtemps = tuple(f"$g{i}" for i in range(len(self.ghosts)))
        back_e = dict(back)
        back_e.update(dict(zip(self.ghosts, gtemps)))
        EJ2 = J + fr.ghosts + gtemps + self.accs
        rel = st.eff.joined().rename_many(dict(zip(self.accs, gtemps))).reshape(EJ2)
        rel = rel.meet(phiJ.reshape(EJ2))
        out_scope = self.escope(S, fr)
        m = {}
        for q, b in e.out_eff.items():
            if b.is_bot():
                m[q] = absdom.bot(out_scope, self.tag)
                continue
            bb = b.rename_many(back_e).reshape(EJ2).meet(rel)
            m[q] = bb.reshape(out_scope)
        ne = Effect(self.saa, out_scope, self.tag, m)
        if ne.is_bot():
            return None
        return (val, _St(st.phi, ne))


def _loc_name(loc) -> str:
    if loc == "exit":
        return "exit"
    nid, ctx = loc
    return f"ev@{nid}" + (f"[{','.join(map(str, ctx.callstring))}]" if ctx.callstring else "")


# ---------------------------------------------------------------- public API

def infer(program: Term, a: Saa, cfg: AnalysisConfig | None = None) -> AnalysisResult:
    """Analyze ``program`` (a closed program whose entry takes integer inputs)."""
    return _Analyzer(program, a, cfg or AnalysisConfig()).run()


def transform_node(result: AnalysisResult, nid: int, ctx: Context):
    """Re-run the node transformer once on a recorded node against the final
    summaries.  Returns (result type, outgoing effect) or None if unrecorded."""
    an = result._analyzer
    rec = result.execution_map.get((nid, ctx))
    if rec is None:
        return None
    node = next(n for n in iter_nodes(result.program) if n.nid == nid)
    fr_key = "top"
    ghosts = ()
    if any(ghost in rec.in_eff.scope for ghost in an.ghosts) and an.ghosts:
        ghosts = an.ghosts
    fr = _Frame(ctx.callstring, ghosts, fr_key)
    saved = (an.obligations, an.ev_post, an.exec_map, an.changed)
    an.obligations, an.ev_post, an.exec_map = [], {}, {}
    try:
        r = _one(an._an(node, rec.env, _St(rec.phi, rec.in_eff), fr, ctx.tokens))
    finally:
        an.obligations, an.ev_post, an.exec_map, an.changed = saved
    if r is None:
        return BOT, None
    return r[0], r[1].eff


def widen_map(old: ExecutionMap, new: ExecutionMap, cfg: AnalysisConfig | None = None) -> ExecutionMap:
    """Pointwise widening of two execution maps (records absent on one side
    are taken from the other)."""
    out: ExecutionMap = {}
    for key in sorted(set(old) | set(new), key=repr):
        a, b = old.get(key), new.get(key)
        if a is None or b is None:
            out[key] = a or b
            continue
        env = dict(a.env)
        for x, v in b.env.items():
            env[x] = v if env.get(x) is v else tjoin(env.get(x), v, widen=True)
        oe = a.out_eff if b.out_eff is None else (
            b.out_eff if a.out_eff is None else effectdom.widen(a.out_eff, b.out_eff))
        out[key] = NodeRecord(a.scope, a.phi.widen(b.phi), env,
                              effectdom.widen(a.in_eff, b.in_eff),
                              tjoin(a.result, b.result, widen=True), oe)
    return out
