"""Utterance text -> multiset of stemmed content terms.

The pipeline is tokenize -> POS tag -> keep nouns/verbs/adjectives/adverbs
-> Porter stem -> drop stopwords.
"""

from __future__ import annotations

import string
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence, TextIO

from ..corpus import Code, CodedLine
from .porter import stem
from .stopwords import STOPWORD_LIST_ID, STOPWORD_LISTS
from .tagger import CONTENT_TAGS, POS, tag_word

__all__ = [
    "POS",
    "Token",
    "Instance",
    "InstanceId",
    "PreprocessConfig",
    "tokenize",
    "pos_tag",
    "content_filter",
    "stem",
    "remove_stopwords",
    "preprocess_text",
    "preprocess_line",
    "write_instances",
]

SINGLE = "single"
WITH_CONTEXT = "with_context"
VARIANTS = (SINGLE, WITH_CONTEXT)

_STRIP = string.punctuation + "“”‘’«»…–—"
_QUOTE_MAP = str.maketrans({"’": "'", "‘": "'"})


@dataclass(frozen=True)
class Token:
    surface: str
    pos: POS | None = None


@dataclass(frozen=True)
class PreprocessConfig:
    pos_filter_enabled: bool = True
    stopword_list_id: str = STOPWORD_LIST_ID
    tagger: str = "lexicon"  # "lexicon" or "none"
    drop_numeric: bool = True
    # "terms": group thresholds count terms after preprocessing; "tokens": raw tokens
    word_count_basis: str = "terms"

    def __post_init__(self):
        if self.tagger not in ("lexicon", "none"):
            raise ValueError(f"unknown tagger {self.tagger!r}")
        if self.stopword_list_id not in STOPWORD_LISTS:
            raise ValueError(f"unknown stopword list {self.stopword_list_id!r}")
        if self.word_count_basis not in ("terms", "tokens"):
            raise ValueError(f"unknown word_count_basis {self.word_count_basis!r}")

    def as_dict(self) -> dict:
        return asdict(self)


class InstanceId(NamedTuple):
    case_id: str
    line_no: int
    code: Code
    variant: str = SINGLE

    def __str__(self):
        return f"{self.case_id}:{self.line_no}:{self.code.value}:{self.variant}"

    @property
    def line(self) -> "InstanceId":
        """The same coded line with the variant normalised, for pairing across conditions."""
        return self._replace(variant=SINGLE)


@dataclass(frozen=True)
class Instance:
    id: InstanceId
    label: Code
    terms: tuple[str, ...]
    raw_word_count: int = 0

    @property
    def word_count(self) -> int:
        return len(self.terms)

    @property
    def usable(self) -> bool:
        return len(self.terms) > 0

    def length(self, basis: str = "terms") -> int:
        return self.word_count if basis == "terms" else self.raw_word_count


def tokenize(text: str, drop_numeric: bool = True) -> list[Token]:
    """Whitespace split, strip edge punctuation, lowercase.

    Internal apostrophes and hyphens survive. Tokens with no letter left
    (numbers, ranges like ``6-12``, stray punctuation) are dropped.
    """
    out = []
    for raw in text.translate(_QUOTE_MAP).split():
        tok = raw.strip(_STRIP).lower()
        if not tok:
            continue
        if drop_numeric and not any(ch.isalpha() for ch in tok):
            continue
        out.append(Token(tok))
    return out


def pos_tag(tokens: Iterable[Token]) -> list[Token]:
    return [Token(t.surface, tag_word(t.surface)) for t in tokens]


def content_filter(tokens: Iterable[Token], enabled: bool = True) -> list[Token]:
    if not enabled:
        return list(tokens)
    return [t for t in tokens if t.pos in CONTENT_TAGS]


@lru_cache(maxsize=None)
def _stemmed_stoplist(list_id: str) -> frozenset[str]:
    words = STOPWORD_LISTS[list_id]
    return words | frozenset(stem(w) for w in words)


def remove_stopwords(
    terms: Sequence[str],
    surfaces: Sequence[str] | None = None,
    list_id: str = STOPWORD_LIST_ID,
) -> list[str]:
    """Drop stems (or their unstemmed surfaces, when given) found in the stoplist.

    The stoplist is matched both verbatim and after stemming its entries, so
    ``doing -> do`` cannot leak through.
    """
    stop = _stemmed_stoplist(list_id)
    if surfaces is None:
        return [t for t in terms if t not in stop]
    return [t for t, s in zip(terms, surfaces) if t not in stop and s not in stop]


@lru_cache(maxsize=200_000)
def preprocess_text(text: str, config: PreprocessConfig = PreprocessConfig()) -> tuple[tuple[str, ...], int]:
    """Return ``(terms, raw_token_count)`` for one piece of text."""
    tokens = tokenize(text, config.drop_numeric)
    if config.tagger == "lexicon":
        kept = content_filter(pos_tag(tokens), config.pos_filter_enabled)
    else:
        kept = tokens
    surfaces = [t.surface for t in kept]
    stems = [stem(s) for s in surfaces]
    terms = remove_stopwords(stems, surfaces, config.stopword_list_id)
    return tuple(t for t in terms if t), len(tokens)


def preprocess_line(
    coded_line: CodedLine, variant: str = SINGLE, config: PreprocessConfig = PreprocessConfig()
) -> Instance:
    """Build the classification instance for a coded line.

    ``with_context`` prepends the attached context lines in dialogue order.
    """
    if variant == SINGLE:
        texts = [coded_line.utterance.text]
    elif variant == WITH_CONTEXT:
        texts = [u.text for u in coded_line.context] + [coded_line.utterance.text]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    terms: list[str] = []
    raw = 0
    for text in texts:
        t, n = preprocess_text(text, config)
        terms.extend(t)
        raw += n
    iid = InstanceId(coded_line.case_id, coded_line.line_no, coded_line.code, variant)
    return Instance(iid, coded_line.code, tuple(terms), raw)


def write_instances(instances: Iterable[Instance], fh: TextIO) -> None:
    """Debug dump: ``id<TAB>label<TAB>space-separated terms``."""
    for inst in instances:
        fh.write(f"{inst.id}\t{inst.label.value}\t{' '.join(inst.terms)}\n")
