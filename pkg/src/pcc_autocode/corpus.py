"""Transcript and annotation ingestion.

Transcripts and coder annotations are tab-separated files with a header row.
``merge_and_dedup`` turns them into per-code pools of coded lines: a line
tagged with the same code by several coders is kept once, a line tagged with
different codes is kept once per code, and unannotated lines form the
``NotCoded`` pool.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, TextIO


class Code(enum.Enum):
    """Prognosis communication codes plus the derived ``NotCoded`` sentinel.

    Declaration order is the canonical class order; every tie in the
    classifiers is broken by it.
    """

    CancKnowl = "CancKnowl"
    OpenDoor = "OpenDoor"
    UnderSProg = "UnderSProg"
    ChgforWorse = "ChgforWorse"
    FurQol = "FurQol"
    PallCare = "PallCare"
    AdvDirect = "AdvDirect"
    Curability = "Curability"
    SurvTime = "SurvTime"
    BestWorstCase = "BestWorstCase"
    DoubFram = "DoubFram"
    NotCoded = "NotCoded"

    @property
    def order(self) -> int:
        return _CODE_ORDER[self]

    @property
    def physician_only(self) -> bool:
        return self in PHYSICIAN_ONLY_CODES

    @classmethod
    def parse(cls, name: str) -> "Code":
        """Case-sensitive lookup over all twelve values."""
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown code {name!r}") from None

    @classmethod
    def parse_manual(cls, name: str) -> "Code":
        """Like :meth:`parse` but rejects the derived ``NotCoded`` label."""
        code = cls.parse(name)
        if code is cls.NotCoded:
            raise ValueError("NotCoded is derived and cannot appear in annotations")
        return code


_CODE_ORDER = {c: i for i, c in enumerate(Code)}

PHYSICIAN_ONLY_CODES = frozenset({Code.CancKnowl, Code.OpenDoor, Code.UnderSProg})
MANUAL_CODES = tuple(c for c in Code if c is not Code.NotCoded)
RARE_CODES = (Code.BestWorstCase, Code.CancKnowl, Code.DoubFram, Code.OpenDoor, Code.UnderSProg)
EXPERIMENT_CODES = (
    Code.ChgforWorse,
    Code.FurQol,
    Code.PallCare,
    Code.AdvDirect,
    Code.Curability,
    Code.SurvTime,
)
SEVEN_CLASSES = EXPERIMENT_CODES + (Code.NotCoded,)


def sort_codes(codes: Iterable[Code]) -> tuple[Code, ...]:
    return tuple(sorted(set(codes), key=lambda c: c.order))


class Speaker(enum.Enum):
    DOCTOR = "D"
    PATIENT = "P"


class Scope(enum.Enum):
    PHYSICIAN_ONLY = "physician"
    ALL = "all"


class CorpusError(ValueError):
    """Malformed or inconsistent corpus input. ``row`` is 1-based, header = 1."""

    def __init__(self, message: str, source: str | None = None, row: int | None = None):
        self.source = source
        self.row = row
        where = ""
        if source is not None:
            where += f"{source}: "
        if row is not None:
            where += f"row {row}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Utterance:
    case_id: str
    line_no: int
    speaker: Speaker
    text: str

    @property
    def key(self) -> tuple[str, int]:
        return (self.case_id, self.line_no)


@dataclass(frozen=True)
class Annotation:
    case_id: str
    line_no: int
    coder_id: str
    code: Code

    @property
    def key(self) -> tuple[str, int]:
        return (self.case_id, self.line_no)


@dataclass(frozen=True)
class CodedLine:
    utterance: Utterance
    code: Code
    context: tuple[Utterance, ...] = ()

    @property
    def case_id(self) -> str:
        return self.utterance.case_id

    @property
    def line_no(self) -> int:
        return self.utterance.line_no

    @property
    def sort_key(self):
        return (self.utterance.case_id, self.utterance.line_no, self.code.order)


@dataclass(frozen=True)
class InstancePool:
    """Coded lines bucketed by code; every bucket is in canonical order."""

    buckets: Mapping[Code, tuple[CodedLine, ...]]
    scope: Scope = Scope.PHYSICIAN_ONLY
    has_context: bool = False

    def __getitem__(self, code: Code) -> tuple[CodedLine, ...]:
        return self.buckets.get(code, ())

    def counts(self) -> dict[Code, int]:
        return {c: len(self[c]) for c in Code}

    def lines(self) -> list[CodedLine]:
        out = [cl for bucket in self.buckets.values() for cl in bucket]
        out.sort(key=lambda cl: cl.sort_key)
        return out


# ---------------------------------------------------------------------------
# TSV parsing

TRANSCRIPT_HEADER = ("case_id", "line_no", "speaker", "text")
ANNOTATION_HEADER = ("case_id", "line_no", "coder_id", "code")
CODERS_HEADER = ("case_id", "n_coders")


def _rows(stream: TextIO | Iterable[str], header: tuple[str, ...], source: str):
    """Yield (row_number, fields) for every non-blank data row."""
    it = iter(stream)
    first = next(it, None)
    if first is None:
        raise CorpusError("empty input, expected header", source, 1)
    got = tuple(first.rstrip("\r\n").lstrip("﻿").split("\t"))
    if got != header:
        raise CorpusError(f"bad header {got!r}, expected {header!r}", source, 1)
    for row, raw in enumerate(it, start=2):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(header):
            raise CorpusError(
                f"expected {len(header)} tab-separated columns, got {len(fields)}", source, row
            )
        yield row, fields


def _positive_int(value: str, what: str, source: str, row: int) -> int:
    try:
        n = int(value)
    except ValueError:
        raise CorpusError(f"{what} must be an integer, got {value!r}", source, row) from None
    if n < 1:
        raise CorpusError(f"{what} must be positive, got {n}", source, row)
    return n


def parse_transcripts(stream, source: str = "transcripts.tsv") -> list[Utterance]:
    """Parse ``case_id<TAB>line_no<TAB>speaker<TAB>text`` rows in file order."""
    out = []
    seen = set()
    last_line: dict[str, int] = {}
    for row, (case_id, line_no, speaker, text) in _rows(stream, TRANSCRIPT_HEADER, source):
        if not case_id:
            raise CorpusError("empty case_id", source, row)
        n = _positive_int(line_no, "line_no", source, row)
        try:
            spk = Speaker(speaker)
        except ValueError:
            raise CorpusError(f"unknown speaker {speaker!r} (expected D or P)", source, row) from None
        if not text.strip():
            raise CorpusError("empty text", source, row)
        if (case_id, n) in seen:
            raise CorpusError(f"duplicate line ({case_id}, {n})", source, row)
        if case_id in last_line and n <= last_line[case_id]:
            raise CorpusError(
                f"line_no {n} does not increase within case {case_id} (previous {last_line[case_id]})",
                source,
                row,
            )
        seen.add((case_id, n))
        last_line[case_id] = n
        out.append(Utterance(case_id, n, spk, text))
    return out


def parse_annotations(stream, source: str = "annotations.tsv") -> list[Annotation]:
    out = []
    for row, (case_id, line_no, coder_id, code) in _rows(stream, ANNOTATION_HEADER, source):
        n = _positive_int(line_no, "line_no", source, row)
        if not coder_id:
            raise CorpusError("empty coder_id", source, row)
        try:
            c = Code.parse_manual(code)
        except ValueError as exc:
            raise CorpusError(str(exc), source, row) from None
        out.append(Annotation(case_id, n, coder_id, c))
    return out


def parse_coders(stream, source: str = "coders.tsv") -> dict[str, int]:
    out = {}
    for row, (case_id, n) in _rows(stream, CODERS_HEADER, source):
        if case_id in out:
            raise CorpusError(f"duplicate case {case_id}", source, row)
        out[case_id] = _positive_int(n, "n_coders", source, row)
    return out


def write_transcripts(utterances: Iterable[Utterance], fh: TextIO) -> None:
    fh.write("\t".join(TRANSCRIPT_HEADER) + "\n")
    for u in utterances:
        fh.write(f"{u.case_id}\t{u.line_no}\t{u.speaker.value}\t{u.text}\n")


def write_annotations(annotations: Iterable[Annotation], fh: TextIO) -> None:
    fh.write("\t".join(ANNOTATION_HEADER) + "\n")
    for a in annotations:
        fh.write(f"{a.case_id}\t{a.line_no}\t{a.coder_id}\t{a.code.value}\n")


def write_coders(coders: Mapping[str, int], fh: TextIO) -> None:
    fh.write("\t".join(CODERS_HEADER) + "\n")
    for case_id, n in coders.items():
        fh.write(f"{case_id}\t{n}\n")


# ---------------------------------------------------------------------------
# Pool construction


def majority_filter(
    annotations: Iterable[Annotation], coders_per_case: Mapping[str, int]
) -> list[Annotation]:
    """Keep annotations whose (line, code) is backed by a strict majority of the case's coders."""
    annotations = list(annotations)
    votes: dict[tuple, set] = defaultdict(set)
    for a in annotations:
        if a.case_id not in coders_per_case:
            raise KeyError(f"case {a.case_id!r} has no coder count")
        votes[(a.case_id, a.line_no, a.code)].add(a.coder_id)
    return [
        a
        for a in annotations
        if 2 * len(votes[(a.case_id, a.line_no, a.code)]) > coders_per_case[a.case_id]
    ]


def merge_and_dedup(
    utterances: Iterable[Utterance],
    annotations: Iterable[Annotation],
    scope: Scope = Scope.PHYSICIAN_ONLY,
) -> InstancePool:
    by_key = {u.key: u for u in utterances}
    codes_of: dict[tuple[str, int], set[Code]] = defaultdict(set)
    for a in annotations:
        if a.key not in by_key:
            raise CorpusError(f"annotation references missing line ({a.case_id}, {a.line_no})")
        codes_of[a.key].add(a.code)

    buckets: dict[Code, list[CodedLine]] = {c: [] for c in Code}
    for key in sorted(by_key):
        u = by_key[key]
        if scope is Scope.PHYSICIAN_ONLY and u.speaker is not Speaker.DOCTOR:
            continue
        codes = codes_of.get(key)
        if not codes:
            buckets[Code.NotCoded].append(CodedLine(u, Code.NotCoded))
            continue
        for code in sort_codes(codes):
            buckets[code].append(CodedLine(u, code))
    return InstancePool({c: tuple(b) for c, b in buckets.items()}, scope)


class ContextMode(enum.Enum):
    SAME_SPEAKER = "same_speaker"
    OTHER_SPEAKER = "other_speaker"


def attach_context(
    pool: InstancePool,
    utterances: Iterable[Utterance],
    mode: ContextMode = ContextMode.SAME_SPEAKER,
) -> InstancePool:
    """Attach to every coded line the run of lines immediately preceding it.

    ``SAME_SPEAKER`` takes the maximal run of consecutive earlier lines by the
    target's own speaker. ``OTHER_SPEAKER`` takes the run by the other party
    that ends right before the target. Runs stop at any gap in line numbers.
    """
    by_case: dict[str, list[Utterance]] = defaultdict(list)
    for u in utterances:
        by_case[u.case_id].append(u)
    position = {}
    for case_id, lines in by_case.items():
        lines.sort(key=lambda u: u.line_no)
        for i, u in enumerate(lines):
            position[u.key] = i

    def run_before(u: Utterance) -> tuple[Utterance, ...]:
        lines = by_case[u.case_id]
        i = position[u.key]
        want_same = mode is ContextMode.SAME_SPEAKER
        run = []
        prev_no = u.line_no
        for j in range(i - 1, -1, -1):
            p = lines[j]
            if p.line_no != prev_no - 1 or (p.speaker is u.speaker) != want_same:
                break
            run.append(p)
            prev_no = p.line_no
        return tuple(reversed(run))

    buckets = {
        code: tuple(
            CodedLine(cl.utterance, cl.code, run_before(cl.utterance)) for cl in bucket
        )
        for code, bucket in pool.buckets.items()
    }
    return InstancePool(buckets, pool.scope, has_context=True)


@dataclass
class Corpus:
    """Parsed corpus files plus the pool derived from them."""

    utterances: list[Utterance]
    annotations: list[Annotation]
    coders: dict[str, int] = field(default_factory=dict)

    def pool(
        self,
        scope: Scope = Scope.PHYSICIAN_ONLY,
        majority: bool = False,
        context: ContextMode | None = ContextMode.SAME_SPEAKER,
    ) -> InstancePool:
        annotations = self.annotations
        if majority:
            annotations = majority_filter(annotations, self.coders)
        pool = merge_and_dedup(self.utterances, annotations, scope)
        if context is not None:
            pool = attach_context(pool, self.utterances, context)
        return pool


def load_corpus(directory, transcripts="transcripts.tsv", annotations="annotations.tsv",
                coders="coders.tsv") -> Corpus:
    d = Path(directory)
    with open(d / transcripts, encoding="utf-8") as fh:
        utts = parse_transcripts(fh, str(d / transcripts))
    with open(d / annotations, encoding="utf-8") as fh:
        anns = parse_annotations(fh, str(d / annotations))
    coder_counts = {}
    if (d / coders).exists():
        with open(d / coders, encoding="utf-8") as fh:
            coder_counts = parse_coders(fh, str(d / coders))
    return Corpus(utts, anns, coder_counts)
