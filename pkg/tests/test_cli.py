"""Command-line modes, exit codes, JSON output and the soundness harness."""

import io
import json

import pytest

from accverify import absdom, cli, effectdom
from accverify.cli import bench, corpus_dir, fuzz_soundness, load_corpus, main

import oracles

C = corpus_dir()
BUSY = str(C / "overview1.ml")
BUSY_BAD = str(C / "overview1-unsafe.ml")
BUSY_SPEC = str(C / "overview1.spec")
GOLDEN = oracles.golden_dir()


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def entries(*names):
    return [e for e in load_corpus() if e.name in names]


# ---------------------------------------------------------------- exit codes

def test_analyze_verified_exits_zero():
    code, text = run("analyze", BUSY, "--spec", BUSY_SPEC)
    assert code == 0 and text.startswith("verdict: Verified")
    assert "exit:" in text and "q2 ↦" in text


def test_analyze_unknown_exits_one():
    code, text = run("analyze", BUSY_BAD, "--spec", BUSY_SPEC)
    assert code == 1 and "verdict: Unknown" in text


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate", BUSY],
    ["analyze", BUSY],
    ["run"],
    ["analyze", "/nonexistent.ml", "--spec", BUSY_SPEC],
    ["run", BUSY, "--fuel", "0"],
    ["translate-tuple", BUSY, "--tuple-mode", "product"],
    ["analyze", BUSY, "--spec", BUSY_SPEC, "--domain", "polka"],
])
def test_usage_errors_exit_two(argv):
    assert run(*argv)[0] == 2


def test_mode_flag_equivalent_to_positional():
    assert run("--mode", "run", BUSY, "--inputs", "7", "2") == run("run", BUSY, "--inputs", "7", "2")


# ---------------------------------------------------------------- run and monitor

def test_run_prints_trace_and_state():
    code, text = run("run", BUSY, "--spec", BUSY_SPEC, "--inputs", "7", "2")
    assert code == 0
    assert "trace: [7, -7]" in text and "final state: q2 (7,)" in text


def test_run_without_spec():
    code, text = run("run", BUSY, "--inputs", "7", "2")
    assert code == 0 and "status: Finished" in text and "final state" not in text


def test_run_reports_violation():
    code, text = run("run", BUSY_BAD, "--spec", BUSY_SPEC, "--inputs", "7", "2")
    assert code == 1 and "property: violated" in text


def test_monitor_lists_states():
    code, out = run("monitor", BUSY, "--spec", BUSY_SPEC, "--inputs", "7", "2", "--json")
    doc = json.loads(out)
    assert code == 0
    assert [s["q"] for s in doc["states"]] == ["q0", "q1", "q2"]
    assert doc["final_state"] == {"q": "q2", "acc": [7]}


def test_run_divergence_is_reported(tmp_path):
    p = tmp_path / "loop.ml"
    p.write_text("let rec f x = f x in f 0")
    code, out = run("run", str(p), "--fuel", "1000", "--json")
    assert code == 1 and json.loads(out)["status"] == "Diverged"


# ---------------------------------------------------------------- translations

def test_translate_tuple_product_matches_golden():
    code, text = run("translate-tuple", BUSY, "--spec", BUSY_SPEC, "--tuple-mode", "product")
    assert code == 0 and text == (GOLDEN / "overview1_product.ml").read_text()


def test_translate_cps_json():
    code, out = run("translate-cps", BUSY, "--spec", BUSY_SPEC, "--json")
    doc = json.loads(out)
    assert code == 0 and doc["mode"] == "cps" and doc["arity"] == 2
    assert doc["source"] == (GOLDEN / "overview1_cps.ml").read_text()


def test_translate_cps_rejects_wide_accumulators(tmp_path):
    s = tmp_path / "wide.spec"
    s.write_text("states: q; acc: 2 init (0, 0); from q otherwise update (acc1, v) goto q;")
    assert run("translate-cps", BUSY, "--spec", str(s))[0] == 2


# ---------------------------------------------------------------- JSON determinism

@pytest.mark.parametrize("argv", [
    ["analyze", BUSY, "--spec", BUSY_SPEC, "--json"],
    ["analyze", str(C / "monotonic.ml"), "--spec", str(C / "monotonic.spec"),
     "--domain", "octcong", "--ctx", "1", "--json"],
    ["run", BUSY, "--spec", BUSY_SPEC, "--inputs", "3", "4", "--json"],
    ["monitor", BUSY, "--spec", BUSY_SPEC, "--inputs", "3", "4", "--json"],
    ["translate-tuple", BUSY, "--json"],
    ["translate-cps", BUSY, "--spec", BUSY_SPEC, "--json"],
])
def test_json_is_byte_identical(argv):
    a, b = run(*argv), run(*argv)
    assert a == b
    json.loads(a[1])


def test_analyze_json_shape():
    doc = json.loads(run("analyze", BUSY, "--spec", BUSY_SPEC, "--json")[1])
    assert doc["verdict"] == "Verified"
    assert {"config", "stats", "effects", "diagnostics"} <= set(doc)
    assert "exit" in doc["effects"]


# ---------------------------------------------------------------- bench and fuzz

def test_bench_subset():
    rows = bench(entries("overview1", "overview1-unsafe", "tp-div"))
    assert rows and all(r["match"] for r in rows)
    assert [r["name"] for r in rows] == sorted(r["name"] for r in rows)


def test_bench_mode_on_copied_corpus(tmp_path):
    src = json.loads((C / "expected.json").read_text())
    keep = [e for e in src["entries"] if e["name"].startswith("overview1")]
    for e in keep:
        for f in (e["program"], e["spec"]):
            (tmp_path / f).write_text((C / f).read_text())
    (tmp_path / "expected.json").write_text(json.dumps({"entries": keep}))
    code, text = run("bench", "--corpus", str(tmp_path))
    assert code == 0 and text.rstrip().endswith("rows match")


def test_fuzz_empty_corpus():
    assert fuzz_soundness([]) == []


def test_fuzz_on_verified_entries_is_clean():
    assert fuzz_soundness(entries("overview1", "tp-div"), bound=2, seeds=(0, 1), fuel=100_000) == []


def test_fuzz_detects_a_lying_analyzer():
    class Yes:
        verified = True

    found = fuzz_soundness(entries("overview1-unsafe"), bound=2, seeds=(0,), fuel=100_000,
                           analyze=lambda p, a, c: Yes())
    assert found and all(f.name == "overview1-unsafe" for f in found)


def test_fuzz_detects_a_broken_extension(monkeypatch):
    # drop every transition into an error state
    real = effectdom.extend

    def broken(eff, event):
        out = real(eff, event)
        m = {q: (absdom.bot(b.scope, out.tag) if q in eff.saa.errors else b) for q, b in out.items()}
        return effectdom.Effect(out.saa, out.scope, out.tag, m)

    monkeypatch.setattr(effectdom, "extend", broken)
    found = fuzz_soundness(entries("monotonic-unsafe"), bound=3, seeds=(0,), fuel=100_000)
    assert any(f.kind == "error-state" for f in found)


def test_finding_is_reported_by_cli(monkeypatch):
    monkeypatch.setattr(cli, "fuzz_soundness",
                        lambda *a, **k: [cli.Finding("x", "ctx0/octagon", (1,), 0, "stuck", "boom")])
    code, text = run("fuzz")
    assert code == 1 and "1 soundness findings" in text
