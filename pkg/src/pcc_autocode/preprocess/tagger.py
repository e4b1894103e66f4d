"""Coarse part-of-speech tagging from a closed-class lexicon plus suffix rules."""

import enum


class POS(enum.Enum):
    NOUN = "Noun"
    VERB = "Verb"
    ADJECTIVE = "Adjective"
    ADVERB = "Adverb"
    OTHER = "Other"


CONTENT_TAGS = frozenset({POS.NOUN, POS.VERB, POS.ADJECTIVE, POS.ADVERB})

_PRONOUNS = """
i me my mine myself we us our ours ourselves you your yours yourself
yourselves he him his himself she her hers herself it its itself they them
their theirs themselves who whom whose which what whatever whoever this
that these those one someone somebody something anyone anybody anything
everyone everybody everything nobody nothing
i'm i've i'll i'd you're you've you'll you'd he's he'll he'd she's she'll
she'd it's it'll we're we've we'll we'd they're they've they'll they'd
that's there's here's what's who's let's
"""
_DETERMINERS = """
a an the some any no every each either neither all both half several many
much few little more most less least other another such
"""
_PREPOSITIONS = """
of in on at by for with about against between into through during before
after above below to from up down out off over under around among upon
within without along across behind beyond near toward towards onto than
via per like since until till
"""
_CONJUNCTIONS = """
and but or nor so yet if because although though while whereas unless
whether as then also either
"""
_AUXILIARIES = """
be am is are was were been being have has had having do does did doing
will would shall should can could may might must ought
isn't aren't wasn't weren't haven't hasn't hadn't don't doesn't didn't
won't wouldn't shan't shouldn't can't cannot couldn't mustn't mightn't
"""

CLOSED_CLASS = frozenset(
    (_PRONOUNS + _DETERMINERS + _PREPOSITIONS + _CONJUNCTIONS + _AUXILIARIES).split()
)

_SUFFIX_RULES = (
    (("ly",), POS.ADVERB),
    (("ous", "ful", "ive", "able"), POS.ADJECTIVE),
    (("ize", "ed", "ing"), POS.VERB),
)


def tag_word(word: str) -> POS:
    if word in CLOSED_CLASS:
        return POS.OTHER
    for suffixes, pos in _SUFFIX_RULES:
        if word.endswith(suffixes):
            return pos
    return POS.NOUN
