import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcc_autocode.corpus import (
    EXPERIMENT_CODES,
    RARE_CODES,
    Annotation,
    Code,
    ContextMode,
    Corpus,
    CorpusError,
    Scope,
    Speaker,
    Utterance,
    attach_context,
    majority_filter,
    merge_and_dedup,
    parse_annotations,
    parse_coders,
    parse_transcripts,
    write_annotations,
    write_transcripts,
)

T_HEADER = "case_id\tline_no\tspeaker\ttext\n"
A_HEADER = "case_id\tline_no\tcoder_id\tcode\n"


def U(case, n, spk, text="some words here"):
    return Utterance(case, n, Speaker(spk), text)


def A(case, n, coder, code):
    return Annotation(case, n, coder, Code(code))


def test_code_enum():
    assert len(Code) == 12
    assert {c for c in Code if c.physician_only} == {Code.CancKnowl, Code.OpenDoor, Code.UnderSProg}
    assert Code.parse("SurvTime") is Code.SurvTime
    with pytest.raises(ValueError):
        Code.parse("survtime")
    assert not set(RARE_CODES) & set(EXPERIMENT_CODES)


def test_parse_single_row():
    utts = parse_transcripts(io.StringIO(T_HEADER + "c1\t1\tD\tHello there.\n"))
    assert utts == [Utterance("c1", 1, Speaker.DOCTOR, "Hello there.")]


def test_duplicate_line_names_row_3():
    with pytest.raises(CorpusError) as err:
        parse_transcripts(io.StringIO(T_HEADER + "c1\t1\tD\tHi.\nc1\t1\tD\tAgain.\n"))
    assert err.value.row == 3


@pytest.mark.parametrize(
    "row, fragment",
    [
        ("c1\t1\tX\tHi.", "speaker"),
        ("c1\t1\tD", "column"),
        ("c1\t1\tD\tHi\tthere", "column"),
        ("c1\tone\tD\tHi.", "line_no"),
    ],
)
def test_malformed_transcript_rows(row, fragment):
    with pytest.raises(CorpusError) as err:
        parse_transcripts(io.StringIO(T_HEADER + row + "\n"))
    assert err.value.row == 2
    assert fragment in str(err.value)


def test_non_increasing_line_numbers():
    with pytest.raises(CorpusError):
        parse_transcripts(io.StringIO(T_HEADER + "c1\t2\tD\tHi.\nc1\t1\tP\tHey.\n"))


def test_parse_annotations():
    anns = parse_annotations(io.StringIO(A_HEADER + "c1\t4\tcoderA\tSurvTime\n"))
    assert anns == [Annotation("c1", 4, "coderA", Code.SurvTime)]
    for bad in ("NotCoded", "survtime"):
        with pytest.raises(CorpusError):
            parse_annotations(io.StringIO(A_HEADER + f"c1\t4\tcoderA\t{bad}\n"))


def test_parse_coders():
    assert parse_coders(io.StringIO("case_id\tn_coders\nc1\t3\n")) == {"c1": 3}
    with pytest.raises(CorpusError):
        parse_coders(io.StringIO("case_id\tn_coders\nc1\t0\n"))


def test_dedup_same_code_two_coders():
    utts = [U("c1", 1, "D")]
    pool = merge_and_dedup(utts, [A("c1", 1, "a", "SurvTime"), A("c1", 1, "b", "SurvTime")])
    assert len(pool[Code.SurvTime]) == 1
    assert pool[Code.NotCoded] == ()


def test_two_codes_give_two_lines():
    utts = [U("c1", 1, "D")]
    pool = merge_and_dedup(utts, [A("c1", 1, "a", "SurvTime"), A("c1", 1, "b", "Curability")])
    assert len(pool[Code.SurvTime]) == 1 and len(pool[Code.Curability]) == 1


def test_not_coded_is_unannotated_doctor_lines():
    utts = [U("c1", 1, "D"), U("c1", 2, "P"), U("c1", 3, "D")]
    pool = merge_and_dedup(utts, [A("c1", 3, "a", "FurQol")])
    assert [cl.line_no for cl in pool[Code.NotCoded]] == [1]
    every = merge_and_dedup(utts, [A("c1", 3, "a", "FurQol")], Scope.ALL)
    assert [cl.line_no for cl in every[Code.NotCoded]] == [1, 2]


def test_patient_annotations_dropped_under_physician_scope():
    utts = [U("c1", 1, "P")]
    pool = merge_and_dedup(utts, [A("c1", 1, "a", "FurQol")])
    assert all(cl.utterance.speaker is Speaker.DOCTOR for cl in pool.lines())
    assert pool[Code.FurQol] == ()


def test_dangling_annotation():
    with pytest.raises(CorpusError) as err:
        merge_and_dedup([U("c1", 1, "D")], [A("c1", 9, "a", "FurQol")])
    assert "c1" in str(err.value) and "9" in str(err.value)


@pytest.mark.parametrize("n_coders, agreeing, kept", [(3, 2, True), (4, 2, False), (1, 1, True)])
def test_majority_filter(n_coders, agreeing, kept):
    anns = [A("c1", 1, f"k{i}", "SurvTime") for i in range(agreeing)]
    assert bool(majority_filter(anns, {"c1": n_coders})) == kept


def test_majority_filter_missing_case():
    with pytest.raises(KeyError):
        majority_filter([A("c9", 1, "a", "SurvTime")], {"c1": 2})


annotation_lists = st.lists(
    st.builds(
        Annotation,
        st.sampled_from(["c1", "c2"]),
        st.integers(1, 4),
        st.sampled_from(["a", "b", "c"]),
        st.sampled_from(list(EXPERIMENT_CODES)),
    ),
    max_size=30,
)


@given(annotation_lists, st.integers(1, 4))
def test_majority_filter_subset_and_fixpoint(anns, n):
    coders = {"c1": n, "c2": n}
    once = majority_filter(anns, coders)
    assert all(a in anns for a in once)
    assert majority_filter(once, coders) == once


@settings(max_examples=50)
@given(annotation_lists)
def test_merge_is_deterministic_and_ordered(anns):
    utts = [U(c, n, "D") for c in ("c1", "c2") for n in range(1, 5)]
    p1 = merge_and_dedup(utts, anns, Scope.ALL)
    p2 = merge_and_dedup(utts, list(reversed(anns)), Scope.ALL)
    assert p1 == p2
    for bucket in p1.buckets.values():
        keys = [(cl.case_id, cl.line_no) for cl in bucket]
        assert keys == sorted(set(keys))
    distinct = {(a.case_id, a.line_no, a.code) for a in anns}
    coded = sum(len(b) for c, b in p1.buckets.items() if c is not Code.NotCoded)
    assert coded == len(distinct)


def _context_lines(speakers, target):
    utts = [U("c1", i + 1, s, f"line {i + 1}") for i, s in enumerate(speakers)]
    pool = merge_and_dedup(utts, [A("c1", target, "a", "SurvTime")])
    return [u.line_no for u in attach_context(pool, utts)[Code.SurvTime][0].context]


def test_context_examples():
    assert _context_lines("DDDPD", 5) == []
    assert _context_lines("DDDD", 4) == [1, 2, 3]
    assert _context_lines("D", 1) == []


def test_context_stops_at_gap():
    utts = [U("c1", 1, "D"), U("c1", 2, "D"), U("c1", 4, "D")]
    pool = attach_context(merge_and_dedup(utts, [A("c1", 4, "a", "FurQol")]), utts)
    assert pool[Code.FurQol][0].context == ()


def test_other_speaker_context():
    utts = [U("c1", 1, "D"), U("c1", 2, "P"), U("c1", 3, "P"), U("c1", 4, "D")]
    pool = attach_context(merge_and_dedup(utts, [A("c1", 4, "a", "FurQol")]), utts, ContextMode.OTHER_SPEAKER)
    assert [u.line_no for u in pool[Code.FurQol][0].context] == [2, 3]


@given(st.lists(st.sampled_from("DP"), min_size=1, max_size=12), st.data())
def test_context_is_contiguous_same_speaker_run(speakers, data):
    target = data.draw(st.integers(1, len(speakers)))
    ctx = _context_lines("".join(speakers), target) if speakers[target - 1] == "D" else []
    if ctx:
        assert ctx == list(range(ctx[0], target))
        assert all(speakers[i - 1] == "D" for i in ctx)
        assert ctx[0] == 1 or speakers[ctx[0] - 2] != "D"


def test_round_trip(tmp_path):
    utts = [U("c1", 1, "D", "It’s not a cure."), U("c1", 2, "P", "Okay.")]
    anns = [A("c1", 1, "a", "Curability")]
    with open(tmp_path / "transcripts.tsv", "w", encoding="utf-8") as fh:
        write_transcripts(utts, fh)
    with open(tmp_path / "annotations.tsv", "w", encoding="utf-8") as fh:
        write_annotations(anns, fh)
    from pcc_autocode.corpus import load_corpus

    corpus = load_corpus(tmp_path)
    assert corpus.utterances == utts and corpus.annotations == anns
    assert isinstance(corpus, Corpus)
    assert corpus.pool().has_context
