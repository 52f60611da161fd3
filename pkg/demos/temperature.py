"""
A monotone sensor and the effect table
======================================

``f`` walks ``x`` down by two, emitting an increasing counter on even
steps and a decreasing one on odd steps.  The automaton commits to a
direction at the first event and jumps to ``qerr`` when it is broken.
Proving that requires both the relation acc0 = pos and the parity of x.
"""

from accverify import lang, saa
from accverify.cli import corpus_dir
from accverify.inference import AnalysisConfig, infer

corpus = corpus_dir()
program = lang.parse_program((corpus / "temperature.ml").read_text())
spec = saa.parse_spec((corpus / "temperature.spec").read_text())

r = infer(program, spec, AnalysisConfig(domain="octcong", ctx_depth=1))
print("octagon x congruence, one call site of context:", r.verdict)

# the table right after `ev pos`; $pre0 is the accumulator on entry to f
pos_event = next(n for n in lang.iter_nodes(program)
                 if type(n) is lang.Ev and type(n.arg) is lang.Var and n.arg.name == "pos")
print(r.effect_at(pos_event.nid))

# octagons alone lose the parity of x and cannot exclude the odd branch
r2 = infer(program, spec, AnalysisConfig(domain="octagon", ctx_depth=1))
print("\noctagon only:", r2.verdict)
for d in r2.diagnostics[:2]:
    print(" ", d)
