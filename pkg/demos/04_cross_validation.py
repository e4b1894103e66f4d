"""
One balanced cross-validation run
=================================

Balanced sample per class, stratified 10-fold CV with the vocabulary and
feature set refitted on each training fold.
"""

import tempfile
from pathlib import Path

from pcc_autocode.corpus import SEVEN_CLASSES, load_corpus
from pcc_autocode.evaluation import balanced_sample, cross_validate
from pcc_autocode.synth import GenConfig, generate

out = Path(tempfile.mkdtemp())
generate(GenConfig(seed=42)).write(out / "corpus")
pool = load_corpus(out / "corpus").pool()

lines = balanced_sample(pool, SEVEN_CLASSES, n_per_class=190, min_words=5, seed=1)
report = cross_validate("NB", lines, k=10, seed=1)
print(f"accuracy {report.accuracy:.3f}  micro-F1 {report.micro_f1:.3f}  macro-F1 {report.macro_f1:.3f}")
print(report.confusion)

report.write(out / "eval")
print(sorted(p.name for p in (out / "eval").iterdir()))
