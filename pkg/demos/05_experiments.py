"""
The three experiments, scaled down
==================================

Word-count groups, tracked group-C lines and the effect of context, on
fewer lines and resamples than the defaults so it runs in seconds.
"""

import tempfile
from pathlib import Path

from pcc_autocode.corpus import load_corpus
from pcc_autocode.experiments import Exp1Config, Exp2Config, Exp3Config, run_exp1, run_exp2, run_exp3
from pcc_autocode.synth import GenConfig, generate

out = Path(tempfile.mkdtemp())
generate(GenConfig(seed=42)).write(out / "corpus")
pool = load_corpus(out / "corpus").pool()

small = dict(n_per_class=60, resamples=2, k=5, seed=42, algorithms=("NB", "SVM"))

exp1 = run_exp1(pool, Exp1Config(**small))
for g in exp1.axes():
    print(g, {a: round(exp1.mean(g, a), 3) for a in exp1.algorithms()})

# reuse the group-C predictions instead of re-running them
exp2 = run_exp2(pool, Exp2Config(Exp1Config(**small)), exp1)
for g in exp2.axes():
    print(g, {a: (round(exp2.mean(g, a), 3), round(exp2.mean(g, a, "tracked_rate"), 3))
              for a in exp2.algorithms()})

exp3 = run_exp3(pool, Exp3Config(**small))
print({a: f"{d:+.3f}" for a, d in exp3.deltas().items()})

exp3.write(out / "exp3")
summary = (out / "exp3" / "summary.md").read_text()
print(summary[summary.index("## accuracy delta"):])
