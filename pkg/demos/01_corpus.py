"""
Synthetic corpus, ingestion and audit
=====================================

Generate a seeded corpus, read it back the way a real one would be read,
and check that every class has enough lines in each word-count group.
"""

import tempfile
from pathlib import Path

from pcc_autocode.corpus import load_corpus
from pcc_autocode.synth import GenConfig, audit, generate

out = Path(tempfile.mkdtemp()) / "corpus"
generate(GenConfig(seed=42)).write(out)
print(sorted(p.name for p in out.iterdir()))

corpus = load_corpus(out)
pool = corpus.pool()

# one bucket per code; NotCoded holds every uncoded physician line
for code, n in pool.counts().items():
    print(f"{code.value:14s} {n}")

# a coded line together with the same-speaker lines right before it
line = next(cl for cl in pool.lines() if cl.context)
for c in line.context:
    print("  context:", c.text)
print("  line:   ", line.utterance.text, "->", line.code.value)

print(audit(pool).to_text())
