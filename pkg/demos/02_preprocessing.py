"""
From a transcript line to terms
===============================

Tokenize, tag, keep content words, stem and drop stopwords.
"""

from pcc_autocode.preprocess import PreprocessConfig, preprocess_text, stem, tokenize
from pcc_autocode.preprocess.tagger import tag_word

text = "Do you think the chemo could completely cure it and get rid of the cancer?"
print([t.surface for t in tokenize(text)])
print([(w, tag_word(w).name) for w in ("cure", "completely", "the", "could", "cancer")])

terms, n_tokens = preprocess_text(text)
print(terms, f"{len(terms)} terms from {n_tokens} tokens")

# the classic stemming examples
for w in ("caresses", "ponies", "relational", "generalization", "hopefully"):
    print(w, "->", stem(w))

# without the tagger every non-stopword survives
print(preprocess_text("quickly the cancer", PreprocessConfig(tagger="none"))[0])
