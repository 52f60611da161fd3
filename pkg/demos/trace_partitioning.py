"""
Trace partitioning at a conditional
===================================

``z`` is 1 or -1 depending on a branch.  Joining the branches gives the
interval [-1, 1], which contains 0, so the assertion before the division
cannot be discharged.  Keeping the two branches apart fixes that.
"""

from accverify import lang, saa
from accverify.cli import corpus_dir
from accverify.inference import AnalysisConfig, infer

corpus = corpus_dir()
program = lang.parse_program((corpus / "tp-div.ml").read_text())
spec = saa.parse_spec((corpus / "tp-div.spec").read_text())
print((corpus / "tp-div.ml").read_text())

for tp in (False, True):
    r = infer(program, spec, AnalysisConfig(domain="octagon", trace_partition=tp))
    print(f"partitioning {'on ' if tp else 'off'}: {r.verdict}", [f.kind for f in r.failures])
