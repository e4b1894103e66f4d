from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcc_autocode.corpus import Code, CodedLine, Speaker, Utterance
from pcc_autocode.preprocess import (
    SINGLE,
    WITH_CONTEXT,
    PreprocessConfig,
    Token,
    content_filter,
    pos_tag,
    preprocess_line,
    preprocess_text,
    remove_stopwords,
    tokenize,
)
from pcc_autocode.preprocess.porter import stem
from pcc_autocode.preprocess.stopwords import ENGLISH_STOPWORDS
from pcc_autocode.preprocess.tagger import POS, tag_word

REFERENCE = Path(__file__).parent / "data" / "porter_reference.tsv"


def surfaces(tokens):
    return [t.surface for t in tokens]


def test_tokenize_examples():
    assert surfaces(tokenize("Tell me, what do you understand?")) == ["tell", "me", "what", "do", "you", "understand"]
    assert surfaces(tokenize("6-12 months.")) == ["months"]
    assert tokenize("") == []


def test_tokenize_keeps_inner_apostrophes_and_hyphens():
    assert surfaces(tokenize("It's a follow-up...")) == ["it's", "a", "follow-up"]
    assert surfaces(tokenize("It’s")) == ["it's"]


def test_tokenize_numeric_switch():
    assert surfaces(tokenize("70% of", drop_numeric=False)) == ["70", "of"]


@pytest.mark.parametrize("word, tag", [("quickly", POS.ADVERB), ("the", POS.OTHER), ("cancer", POS.NOUN),
                                       ("curable", POS.ADJECTIVE), ("progressing", POS.VERB)])
def test_tagger(word, tag):
    assert tag_word(word) is tag


def test_content_filter():
    tagged = pos_tag([Token("the"), Token("cancer")])
    assert surfaces(content_filter(tagged)) == ["cancer"]
    assert content_filter(pos_tag([Token("the"), Token("of")])) == []
    assert surfaces(content_filter(tagged, enabled=False)) == ["the", "cancer"]


@pytest.mark.parametrize("word, expected", [("caresses", "caress"), ("ponies", "poni"), ("sky", "sky"),
                                            ("relational", "relat"), ("generalization", "gener")])
def test_stem_examples(word, expected):
    assert stem(word) == expected


def test_stem_passes_non_alphabetic_through():
    assert stem("follow-up") == "follow-up"
    assert stem("a") == "a"


def test_porter_reference_file():
    pairs = [line.split("\t") for line in REFERENCE.read_text(encoding="utf-8").splitlines() if line]
    assert len(pairs) >= 20000
    wrong = [(w, s, stem(w)) for w, s in pairs if stem(w) != s]
    assert wrong == []


def test_remove_stopwords():
    assert remove_stopwords(["do", "understand"]) == ["understand"]
    assert remove_stopwords([]) == []
    # "doing" stems to "do", which is a stop stem
    assert remove_stopwords([stem("doing")], ["doing"]) == []


def test_stopword_list_order_irrelevant():
    terms = ["cure", "do", "month", "the", "cure"]
    assert Counter(remove_stopwords(terms)) == Counter(remove_stopwords(list(reversed(terms))))


def line(text, context=()):
    u = Utterance("c1", 10, Speaker.DOCTOR, text)
    ctx = tuple(Utterance("c1", 10 - len(context) + i, Speaker.DOCTOR, t) for i, t in enumerate(context))
    return CodedLine(u, Code.Curability, ctx)


def test_curability_example():
    inst = preprocess_line(line("D: It’s not a cure."), SINGLE)
    assert "cure" in inst.terms
    assert inst.usable
    assert str(inst.id) == "c1:10:Curability:single"


def test_empty_context_identity():
    single = preprocess_line(line("It's not a cure."), SINGLE)
    ctx = preprocess_line(line("It's not a cure."), WITH_CONTEXT)
    assert ctx.terms == single.terms
    assert ctx.id.variant == WITH_CONTEXT


def test_all_stopwords_unusable():
    inst = preprocess_line(line("It is what it is."), SINGLE)
    assert not inst.usable and inst.word_count == 0


def test_tagger_none_mode():
    terms, _ = preprocess_text("quickly the cancer", PreprocessConfig(tagger="none"))
    assert terms == ("quickli", "cancer")


words = st.lists(st.sampled_from(["cure", "the", "months", "chemo", "of", "quickly", "is", "family",
                                  "Christmas", "you", "doing", "treatments", "6-12"]), max_size=10)


@given(words, st.lists(words, max_size=3))
def test_context_terms_are_superset(target, context):
    cl = line(" ".join(target) or "cure", [" ".join(c) or "the" for c in context])
    single = Counter(preprocess_line(cl, SINGLE).terms)
    both = Counter(preprocess_line(cl, WITH_CONTEXT).terms)
    assert not single - both


@given(words)
def test_terms_never_stopwords_or_empty(ws):
    terms, _ = preprocess_text(" ".join(ws))
    stop_stems = {stem(w) for w in ENGLISH_STOPWORDS}
    assert all(t and t not in ENGLISH_STOPWORDS and t not in stop_stems for t in terms)
