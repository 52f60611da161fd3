"""
Making the event trace explicit
===============================

The tuple translation threads the trace (or the automaton state) through
every function as an extra argument, producing an ordinary program with no
``ev``.  The CPS variant keeps only the automaton state and turns the
final acceptance condition into an assertion.
"""

from accverify import lang, saa, translate
from accverify.cli import corpus_dir

corpus = corpus_dir()
program = lang.parse_program((corpus / "overview1.ml").read_text())
spec = saa.parse_spec((corpus / "overview1.spec").read_text())

seq = translate.tuple_translate(program)
print(translate.render_source(seq))
print("direct:    ", lang.eval_program(program, [4, 2]))
print("translated:", translate.run_translated(seq, [4, 2]))

# each event becomes a call to the automaton's step function
print("\n" + lang.render(translate.embed_ev_step(spec)))

product = translate.tuple_translate(program, spec, "product")
out = translate.run_translated(product, [4, 2])
print("\nfinal automaton state:", translate.decode_state(spec, out.value.snd))

cps = translate.cps_translate(program, spec)
print("\ncps, safe run:  ", type(translate.run_translated(cps, [4, 2])).__name__)
bad = lang.parse_program((corpus / "overview1-unsafe.ml").read_text())
print("cps, unsafe run:", type(translate.run_translated(translate.cps_translate(bad, spec), [4, 2])).__name__)
