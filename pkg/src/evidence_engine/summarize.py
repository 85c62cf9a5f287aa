"""Extract-and-compress evidence summaries driven by skeleton coverage."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .corpus import Document, tokenize
from .errors import NoEvidence
from .kb import ExpandedQuery, Form, Query
from .skeleton import SkeletonAnnotation, SkeletonItem, item_of, span_chars

DISCOURSE_MARKERS = ("however,", "moreover,", "in addition,", "furthermore,")

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class SummaryConfig:
    budget: int = 60
    compression_enabled: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


class EvidenceSentence(NamedTuple):
    index: int
    text: str


@dataclass(frozen=True)
class Evidence:
    doc_id: str
    sentences: tuple[EvidenceSentence, ...]
    covered_items: tuple[SkeletonItem, ...]
    query: Query | None
    skeleton: SkeletonAnnotation

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)


def sentence_coverage(doc: Document, sentence_index: int,
                      ann: SkeletonAnnotation) -> set[SkeletonItem]:
    return {item_of(doc, s) for s in ann.spans if s.sentence_index == sentence_index}


def select_sentences(doc: Document, ann: SkeletonAnnotation,
                     cfg: SummaryConfig = SummaryConfig()) -> list[int]:
    """Greedy maximum coverage of skeleton items under the token budget.

    Each round picks, among body sentences that still fit the remaining
    budget, the one adding the most uncovered items; ties go to the shorter
    sentence, then the earlier one. The result is in document order.
    """
    coverage = {
        s.index: sentence_coverage(doc, s.index, ann)
        for s in doc.sentences if not s.is_title
    }
    length = {i: doc.sentences[i].token_end - doc.sentences[i].token_start for i in coverage}
    covered: set[SkeletonItem] = set()
    chosen: list[int] = []
    used = 0
    while True:
        best = None
        for i, items in coverage.items():
            if i in chosen or used + length[i] > cfg.budget:
                continue
            gain = len(items - covered)
            if gain and (best is None or (-gain, length[i], i) < best):
                best = (-gain, length[i], i)
        if best is None:
            break
        i = best[2]
        chosen.append(i)
        covered |= coverage[i]
        used += length[i]
    return sorted(chosen)


def _paren_groups(text: str) -> list[tuple[int, int]]:
    """Top-level balanced parenthesized segments as (open, close + 1)."""
    groups, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            if depth == 0:
                start = i
            depth += 1
        elif ch == ")" and depth:
            depth -= 1
            if depth == 0:
                groups.append((start, i + 1))
    return groups


def compression_cuts(doc: Document, sentence_index: int,
                     ann: SkeletonAnnotation) -> list[tuple[int, int]]:
    """Character ranges (document offsets) that compression deletes."""
    sent = doc.sentences[sentence_index]
    text = doc.text[sent.start:sent.end]
    protected = [span_chars(doc, s) for s in ann.in_sentence(sentence_index)]

    def is_protected(start: int, end: int) -> bool:
        return any(ps < end and start < pe for ps, pe in protected)

    cuts = []
    lowered = text.lower()
    for marker in DISCOURSE_MARKERS:
        if lowered.startswith(marker):
            end = len(marker)
            while end < len(text) and text[end].isspace():
                end += 1
            if not is_protected(sent.start, sent.start + end):
                cuts.append((sent.start, sent.start + end))
            break
    floor = cuts[0][1] if cuts else sent.start
    for open_, close in _paren_groups(text):
        start, end = sent.start + open_, sent.start + close
        if start < floor or is_protected(start, end):
            continue
        while start > floor and doc.text[start - 1].isspace():
            start -= 1
        cuts.append((start, end))
    return cuts


def compress_sentence(doc: Document, sentence_index: int, ann: SkeletonAnnotation) -> str:
    """Drop a leading discourse marker and skeleton-free parentheticals.

    Deletion only; no token inside a skeleton span is ever removed.
    """
    sent = doc.sentences[sentence_index]
    out, pos = "", sent.start
    for start, end in sorted(compression_cuts(doc, sentence_index, ann)):
        out = _join(out, doc.text[pos:start])
        pos = end
    out = _join(out, doc.text[pos:sent.end])
    return _WS_RE.sub(" ", out).strip()


def _join(left: str, right: str) -> str:
    # keep a deletion from fusing two words into one token
    if left and right and left[-1].isalnum() and right[0].isalnum():
        return f"{left} {right}"
    return left + right


def contains_form(norms: Sequence[str], form: Form) -> bool:
    m = len(form)
    return any(tuple(norms[i:i + m]) == form for i in range(len(norms) - m + 1))


def generate_evidence(doc: Document, ann: SkeletonAnnotation, eq: ExpandedQuery,
                      cfg: SummaryConfig = SummaryConfig(),
                      query: Query | None = None) -> Evidence:
    chosen = select_sentences(doc, ann, cfg)
    if not chosen:
        raise NoEvidence(doc.doc_id, "no sentence covers a skeleton item within budget")
    emitted = tuple(
        EvidenceSentence(
            i, compress_sentence(doc, i, ann) if cfg.compression_enabled
            else doc.sentence_text(i))
        for i in chosen
    )
    per_sentence = [[t.norm for t in tokenize(s.text)] for s in emitted]
    for gi, group in enumerate(eq.groups):
        if not any(contains_form(n, f) for n in per_sentence for f in group.forms):
            raise NoEvidence(doc.doc_id, f"no mention of {group.source.surface!r} in evidence")
    covered = set().union(*(sentence_coverage(doc, i, ann) for i in chosen))
    return Evidence(
        doc_id=doc.doc_id,
        sentences=emitted,
        covered_items=tuple(sorted(covered, key=lambda it: (it.label.value, it.text,
                                                            -1 if it.group_ref is None
                                                            else it.group_ref))),
        query=query,
        skeleton=ann,
    )
