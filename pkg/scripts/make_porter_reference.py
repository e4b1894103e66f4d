"""Regenerate tests/data/porter_reference.tsv.

The reference stems come from the Snowball project's ``porter`` stemmer,
an implementation independent of ``pcc_autocode.preprocess.porter``. The
vocabulary is an evenly spaced sample of Webster's 2nd International word
list as shipped by the ``english-words`` package.

Needs (not package dependencies): ``pip install snowballstemmer english-words``
"""

import sys
from pathlib import Path

import snowballstemmer
from english_words import get_english_words_set

N_WORDS = 25000

words = sorted(get_english_words_set(["web2"], lower=True, alpha=True))
words = [w for w in words if w.isascii()]
step = len(words) / N_WORDS
sample = sorted({words[int(i * step)] for i in range(N_WORDS)})
stemmer = snowballstemmer.stemmer("porter")

out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/porter_reference.tsv")
with out.open("w", encoding="utf-8", newline="\n") as fh:
    for w, s in zip(sample, stemmer.stemWords(sample)):
        fh.write(f"{w}\t{s}\n")
print(f"wrote {len(sample)} pairs to {out}")
