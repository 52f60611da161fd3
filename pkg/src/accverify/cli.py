"""Command-line driver and benchmark harness.

Modes: ``analyze``, ``translate-tuple``, ``translate-cps``, ``run``,
``monitor``, ``bench`` and ``fuzz``.  Exit codes: 0 for Verified or success,
1 for Unknown or a violation found, 2 for usage or input errors.  JSON output
is sorted and carries no timings, so equal flags give equal bytes.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from . import lang, saa, translate
from .effectdom import Effect
from .inference import AnalysisConfig, AnalysisResult, infer

__all__ = [
    "main", "MODES", "BenchEntry", "BenchRun", "Finding", "load_corpus",
    "corpus_dir", "bench", "fuzz_soundness", "check_run", "config_from_dict",
    "result_json", "EXIT_OK", "EXIT_FAIL", "EXIT_USAGE",
]

MODES = ("analyze", "translate-tuple", "translate-cps", "run", "monitor", "bench", "fuzz")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
JSON_VERSION = 1


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- corpus

@dataclass(frozen=True)
class BenchRun:
    config: AnalysisConfig
    expected: str


@dataclass(frozen=True)
class BenchEntry:
    name: str
    program: Path
    spec: Path
    safe: bool
    runs: tuple[BenchRun, ...]
    sibling: str | None = None

    def load(self) -> tuple[lang.Term, saa.Saa]:
        return (lang.parse_program(self.program.read_text()),
                saa.parse_spec(self.spec.read_text()))


def corpus_dir() -> Path:
    return Path(str(resources.files("accverify") / "corpus"))


def config_from_dict(d: dict) -> AnalysisConfig:
    return AnalysisConfig(domain=d.get("domain", "octagon"), ctx_depth=d.get("ctx", 0),
                          trace_partition=d.get("trace_partition", False),
                          thresholds=d.get("thresholds", True),
                          widen_delay=d.get("widen_delay", 2))


def config_dict(cfg: AnalysisConfig) -> dict:
    return {"domain": cfg.domain, "ctx": cfg.ctx_depth, "trace_partition": cfg.trace_partition,
            "thresholds": cfg.thresholds, "widen_delay": cfg.widen_delay}


def load_corpus(directory: Path | str | None = None) -> list[BenchEntry]:
    """Entries of ``expected.json`` in name order."""
    d = Path(directory) if directory is not None else corpus_dir()
    table = json.loads((d / "expected.json").read_text())
    out = []
    for e in table["entries"]:
        runs = tuple(BenchRun(config_from_dict(r["config"]), r["expected"]) for r in e["runs"])
        out.append(BenchEntry(e["name"], d / e["program"], d / e["spec"], e["safe"], runs,
                              e.get("sibling")))
    return sorted(out, key=lambda x: x.name)


def _bench_job(job):
    entry, run = job
    p, a = entry.load()
    r = infer(p, a, run.config)
    return {"name": entry.name, "config": run.config.label(), "safe": entry.safe,
            "expected": run.expected, "actual": r.verdict, "iterations": r.stats["iterations"],
            "match": r.verdict == run.expected}


def _fan_out(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def bench(entries: Iterable[BenchEntry] | None = None, workers: int = 1) -> list[dict]:
    """Analyze every (entry, configuration) pair; rows in name order."""
    entries = load_corpus() if entries is None else list(entries)
    jobs = [(e, r) for e in sorted(entries, key=lambda x: x.name) for r in e.runs]
    return _fan_out(_bench_job, jobs, workers)


# ---------------------------------------------------------------- fuzzing

@dataclass(frozen=True)
class Finding:
    name: str
    config: str
    inputs: tuple
    seed: int
    kind: str
    detail: str = ""


def check_run(program: lang.Term, a: saa.Saa, inputs: Sequence[int], seed: int,
              fuel: int) -> tuple[str, str] | None:
    """Concrete oracle: the first problem with one execution, if any."""
    out = lang.eval_program(program, inputs, fuel=fuel, nondet_seed=seed)
    if type(out) is lang.AssertionFailed:
        return "assertion", f"assert at node {out.nid}"
    if type(out) is lang.Stuck:
        return "stuck", out.reason
    r = saa.run(a, out.trace)
    if r.reached_error:
        return "error-state", f"after {r.first_error} events"
    if r.always_assert_violated is not None:
        return "assert_always", f"after {r.always_assert_violated} events"
    if type(out) is lang.Finished and not r.final_assert_holds:
        return "assert_final", f"final state {r.final.q} {r.final.acc}"
    return None


def _grid(arity: int, bound: int):
    return itertools.product(range(-bound, bound + 1), repeat=arity)


def _fuzz_job(job):
    entry, labels, bound, seeds, fuel = job
    p, a = entry.load()
    found = []
    for ins in _grid(lang.main_arity(p), bound):
        for s in seeds:
            bad = check_run(p, a, ins, s, fuel)
            if bad:
                found.extend(Finding(entry.name, lab, ins, s, *bad) for lab in labels)
    return found


def fuzz_soundness(entries: Iterable[BenchEntry] | None = None, bound: int = 5,
                   seeds: Sequence[int] = (0, 1, 2, 3), fuel: int = 1_000_000,
                   workers: int = 1, analyze=infer) -> list[Finding]:
    """Run every Verified (program, configuration) pair on the input grid
    and report each execution the concrete oracle rejects."""
    entries = load_corpus() if entries is None else list(entries)
    jobs = []
    for e in sorted(entries, key=lambda x: x.name):
        p, a = e.load()
        labels = [r.config.label() for r in e.runs if analyze(p, a, r.config).verified]
        if labels:
            jobs.append((e, tuple(labels), bound, tuple(seeds), fuel))
    out: list[Finding] = []
    for part in _fan_out(_fuzz_job, jobs, workers):
        out.extend(part)
    return out


# ---------------------------------------------------------------- rendering

def _loc_key(loc) -> str:
    if loc == "exit":
        return "exit"
    nid, ctx = loc
    s = f"ev@{nid}"
    if ctx.callstring:
        s += "[" + ",".join(map(str, ctx.callstring)) + "]"
    if ctx.tokens:
        s += "{" + ",".join(f"{n}.{i}" for n, i in ctx.tokens) + "}"
    return s


def _effect_json(eff: Effect) -> dict:
    return {q: str(b) for q, b in eff.items()}


def result_json(r: AnalysisResult) -> dict:
    effects = {_loc_key(loc): _effect_json(e) for loc, e in r.ev_effects.items()}
    if r.exit_effect is not None:
        effects["exit"] = _effect_json(r.exit_effect)
    return {
        "version": JSON_VERSION,
        "verdict": r.verdict,
        "config": config_dict(r.config),
        "effects": effects,
        "stats": dict(r.stats),
        "diagnostics": list(r.diagnostics),
    }


def _value_str(v) -> str:
    if type(v) is bool:
        return "true" if v else "false"
    return repr(v)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)


# ---------------------------------------------------------------- main

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accverify", description="Effect-aware refinement analysis.")
    ap.add_argument("args", nargs="*", help="[MODE] [PROGRAM]")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--spec", help="automaton spec file")
    ap.add_argument("--domain", default="octagon",
                    choices=("interval", "congruence", "octagon", "octcong"))
    ap.add_argument("--ctx", type=int, default=0, choices=(0, 1))
    ap.add_argument("--trace-partition", action=argparse.BooleanOptionalAction, default=False)
    ap.add_argument("--thresholds", action=argparse.BooleanOptionalAction, default=True)
    ap.add_argument("--widen-delay", type=int, default=2)
    ap.add_argument("--fuel", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--inputs", nargs="*", type=int, default=[])
    ap.add_argument("--json", action="store_true")
    ap.add_argument("--tuple-mode", choices=("seq", "product"), default="seq")
    ap.add_argument("--corpus", help="corpus directory (bench, fuzz)")
    ap.add_argument("--bound", type=int, default=5, help="input grid bound (fuzz)")
    ap.add_argument("--seeds", type=int, default=4, help="number of nondet seeds (fuzz)")
    ap.add_argument("--jobs", type=int, default=1)
    return ap


def _resolve(ns) -> tuple[str, str | None]:
    rest = list(ns.args)
    mode = ns.mode
    if mode is None:
        if not rest or rest[0] not in MODES:
            raise UsageError(f"a mode is required: one of {', '.join(MODES)}")
        mode = rest.pop(0)
    elif rest and rest[0] == mode:
        rest.pop(0)
    if len(rest) > 1:
        raise UsageError(f"unexpected arguments: {' '.join(rest[1:])}")
    prog = rest[0] if rest else None
    if mode not in ("bench", "fuzz") and prog is None:
        raise UsageError(f"{mode} needs a program file")
    if mode in ("analyze", "monitor", "translate-cps") and ns.spec is None:
        raise UsageError(f"{mode} needs --spec")
    if mode == "translate-tuple" and ns.tuple_mode == "product" and ns.spec is None:
        raise UsageError("product mode needs --spec")
    if ns.fuel <= 0 or ns.seeds <= 0 or ns.bound < 0 or ns.jobs <= 0:
        raise UsageError("fuel, seeds and jobs must be positive; bound non-negative")
    return mode, prog


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    ap = _parser()
    try:
        ns = ap.parse_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        mode, prog_path = _resolve(ns)
        program = lang.parse_program(_read(prog_path)) if prog_path else None
        a = saa.parse_spec(_read(ns.spec)) if ns.spec else None
        cfg = AnalysisConfig(domain=ns.domain, ctx_depth=ns.ctx,
                             trace_partition=ns.trace_partition, thresholds=ns.thresholds,
                             widen_delay=ns.widen_delay)
        return _dispatch(mode, ns, program, a, cfg, out)
    except (UsageError, lang.ParseError, saa.SpecError, translate.TranslationError,
            ValueError) as e:
        print(f"accverify: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(mode, ns, program, a, cfg, out) -> int:
    emit = (lambda obj: print(_dump(obj), file=out)) if ns.json else None
    if mode == "analyze":
        r = infer(program, a, cfg)
        if emit:
            emit(result_json(r))
        else:
            print(f"verdict: {r.verdict}  ({cfg.label()}, {r.stats['iterations']} rounds)", file=out)
            for loc, e in sorted(r.ev_effects.items(), key=lambda kv: _loc_key(kv[0])):
                print(f"{_loc_key(loc)}:", file=out)
                for line in str(e).splitlines():
                    print(f"  {line}", file=out)
            if r.exit_effect is not None:
                print("exit:", file=out)
                for line in str(r.exit_effect).splitlines():
                    print(f"  {line}", file=out)
            for d in r.diagnostics:
                print(f"! {d}", file=out)
        return EXIT_OK if r.verified else EXIT_FAIL

    if mode in ("run", "monitor"):
        res = lang.eval_program(program, ns.inputs, fuel=ns.fuel, nondet_seed=ns.seed)
        status = type(res).__name__
        doc = {"version": JSON_VERSION, "status": status, "trace": list(res.trace)}
        if type(res) is lang.Finished:
            doc["value"] = _value_str(res.value)
        if type(res) is lang.Stuck:
            doc["reason"] = res.reason
        bad = status != "Finished"
        violated = False
        if a is not None:
            run = saa.run(a, res.trace)
            doc["final_state"] = {"q": run.final.q, "acc": list(run.final.acc)}
            doc["reached_error"] = run.reached_error
            doc["assert_always_violated_at"] = run.always_assert_violated
            doc["assert_final_holds"] = run.final_assert_holds
            if mode == "monitor":
                doc["states"] = [{"q": s.q, "acc": list(s.acc)} for s in run.states]
            violated = (run.reached_error or run.always_assert_violated is not None
                        or (status == "Finished" and not run.final_assert_holds))
            bad = bad or violated
        if emit:
            emit(doc)
        else:
            print(f"status: {status}", file=out)
            if "value" in doc:
                print(f"value: {doc['value']}", file=out)
            if "reason" in doc:
                print(f"reason: {doc['reason']}", file=out)
            print(f"trace: {doc['trace']}", file=out)
            if mode == "monitor":
                for i, s in enumerate(doc["states"]):
                    ev = "" if i == 0 else f"  after {doc['trace'][i - 1]}"
                    print(f"  {s['q']} {tuple(s['acc'])}{ev}", file=out)
            if a is not None:
                fs = doc["final_state"]
                print(f"final state: {fs['q']} {tuple(fs['acc'])}", file=out)
                print(f"property: {'violated' if violated else 'ok'}", file=out)
        return EXIT_FAIL if bad else EXIT_OK

    if mode in ("translate-tuple", "translate-cps"):
        if mode == "translate-tuple":
            tp = translate.tuple_translate(program, a, ns.tuple_mode)
        else:
            tp = translate.cps_translate(program, a)
        if emit:
            emit({"version": JSON_VERSION, "mode": tp.mode, "arity": tp.arity,
                  "source": translate.render_source(tp)})
        else:
            out.write(translate.render_source(tp))
        return EXIT_OK

    entries = load_corpus(ns.corpus)
    if mode == "bench":
        rows = bench(entries, ns.jobs)
        bad = [r for r in rows if not r["match"]]
        if emit:
            emit({"version": JSON_VERSION, "rows": rows, "mismatches": len(bad)})
        else:
            w = max(len(r["name"]) for r in rows)
            for r in rows:
                mark = "ok" if r["match"] else "MISMATCH"
                print(f"{r['name'].ljust(w)}  {r['config']:<22} expected {r['expected']:<8}"
                      f" got {r['actual']:<8} {mark}", file=out)
            print(f"{len(rows) - len(bad)}/{len(rows)} rows match", file=out)
        return EXIT_FAIL if bad else EXIT_OK

    # fuzz
    findings = fuzz_soundness(entries, ns.bound, range(ns.seed, ns.seed + ns.seeds), ns.fuel,
                              ns.jobs)
    rows = [{"name": f.name, "config": f.config, "inputs": list(f.inputs), "seed": f.seed,
             "kind": f.kind, "detail": f.detail} for f in findings]
    if emit:
        emit({"version": JSON_VERSION, "findings": rows, "bound": ns.bound,
              "seeds": ns.seeds, "fuel": ns.fuel})
    else:
        for r in rows:
            print(f"{r['name']} [{r['config']}] inputs={r['inputs']} seed={r['seed']}: "
                  f"{r['kind']} {r['detail']}", file=out)
        print(f"{len(rows)} soundness findings", file=out)
    return EXIT_FAIL if rows else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
