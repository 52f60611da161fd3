"""
Checking a temporal property of a recursive program
===================================================

``busy`` first emits its input ``x``, spins for ``n`` rounds and finally
emits ``-x``.  The automaton remembers the first event in its accumulator
and only accepts when the second event is its negation.
"""

from accverify import lang, saa
from accverify.cli import corpus_dir
from accverify.inference import AnalysisConfig, infer

corpus = corpus_dir()
program = lang.parse_program((corpus / "overview1.ml").read_text())
spec = saa.parse_spec((corpus / "overview1.spec").read_text())
print((corpus / "overview1.ml").read_text())

# one concrete run, replayed through the automaton
out = lang.eval_program(program, [7, 3])
print("trace:", list(out.trace))
print("final state:", saa.run(spec, out.trace).final)

# the analysis needs a relation between acc0 and the emitted value,
# so octagons succeed where intervals give up
for domain in ("octagon", "interval"):
    r = infer(program, spec, AnalysisConfig(domain=domain))
    print(f"\n{domain}: {r.verdict} after {r.stats['iterations']} rounds")
    print(r.exit_effect)

# the unsafe variant emits x + 1 at the end
bad = lang.parse_program((corpus / "overview1-unsafe.ml").read_text())
print("\nunsafe variant:", infer(bad, spec, AnalysisConfig(domain="octagon")).verdict)
