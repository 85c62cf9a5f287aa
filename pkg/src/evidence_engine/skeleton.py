"""Skeleton extraction: exact alias matches, claim triggers and query-similar terms."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corpus import Document
from .kb import EmbeddingTable, ExpandedQuery, Form


class Label(str, Enum):
    EXACT = "exact_match"
    TRIGGER = "trigger"
    SIMILAR = "similar"


# lower wins when spans overlap
PRIORITY = {Label.EXACT: 0, Label.TRIGGER: 1, Label.SIMILAR: 2}


class SkeletonSpan(NamedTuple):
    sentence_index: int
    token_start: int  # document-level token index
    token_end: int  # exclusive
    label: Label
    score: float
    group_ref: int | None

    @property
    def width(self) -> int:
        return self.token_end - self.token_start


class SkeletonItem(NamedTuple):
    """Identity of a skeleton concept; repeated mentions collapse to one item."""

    label: Label
    text: str
    group_ref: int | None


@dataclass(frozen=True)
class SkeletonConfig:
    tau: float = 0.6
    max_similar_per_sentence: int = 3

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.max_similar_per_sentence < 0:
            raise ValueError("max_similar_per_sentence must be >= 0")


@dataclass(frozen=True)
class SkeletonAnnotation:
    doc_id: str
    spans: tuple[SkeletonSpan, ...]
    config: SkeletonConfig = SkeletonConfig()

    def in_sentence(self, sentence_index: int) -> list[SkeletonSpan]:
        return [s for s in self.spans if s.sentence_index == sentence_index]

    def items(self, doc: Document) -> set[SkeletonItem]:
        return {item_of(doc, s) for s in self.spans}


def span_norm(doc: Document, span: SkeletonSpan) -> str:
    return " ".join(t.norm for t in doc.tokens[span.token_start:span.token_end])


def span_chars(doc: Document, span: SkeletonSpan) -> tuple[int, int]:
    return doc.tokens[span.token_start].start, doc.tokens[span.token_end - 1].end


def span_text(doc: Document, span: SkeletonSpan) -> str:
    start, end = span_chars(doc, span)
    return doc.text[start:end]


def item_of(doc: Document, span: SkeletonSpan) -> SkeletonItem:
    return SkeletonItem(span.label, span_norm(doc, span), span.group_ref)


class PhraseTrie:
    """Token-sequence trie with longest-match-first, left-to-right scanning."""

    _END = object()

    def __init__(self, phrases: Iterable[tuple[Form, object]] = ()):
        self.root: dict = {}
        for form, payload in phrases:
            self.add(form, payload)

    def add(self, form: Form, payload: object = None) -> None:
        if not form:
            return
        node = self.root
        for tok in form:
            node = node.setdefault(tok, {})
        node.setdefault(self._END, payload)  # first payload registered for a form wins

    def scan(self, norms: Sequence[str]) -> list[tuple[int, int, object]]:
        out = []
        i, n = 0, len(norms)
        while i < n:
            node, best = self.root, None
            j = i
            while j < n and norms[j] in node:
                node = node[norms[j]]
                j += 1
                if self._END in node:
                    best = (j, node[self._END])
            if best is None:
                i += 1
            else:
                out.append((i, best[0], best[1]))
                i = best[0]
        return out


def _scan_doc(doc: Document, trie: PhraseTrie, label: Label) -> list[SkeletonSpan]:
    spans = []
    for sent in doc.sentences:
        norms = [t.norm for t in doc.sentence_tokens(sent.index)]
        for s, e, payload in trie.scan(norms):
            spans.append(SkeletonSpan(sent.index, sent.token_start + s, sent.token_start + e,
                                      label, 1.0, payload))
    return spans


def match_exact(doc: Document, eq: ExpandedQuery) -> list[SkeletonSpan]:
    # groups in order, so a form shared by two groups refers to the first
    trie = PhraseTrie((form, gi) for gi, g in enumerate(eq.groups) for form in g.sorted_forms())
    return _scan_doc(doc, trie, Label.EXACT)


def match_triggers(doc: Document, lexicon: Iterable[Form]) -> list[SkeletonSpan]:
    trie = PhraseTrie((form, None) for form in sorted(lexicon))
    return _scan_doc(doc, trie, Label.TRIGGER)


def _entity_vectors(eq: ExpandedQuery, emb: EmbeddingTable) -> tuple[list[int], np.ndarray]:
    """Unit vectors for every embeddable form, with the group each belongs to."""
    groups, rows = [], []
    for gi, group in enumerate(eq.groups):
        for form in group.sorted_forms():
            vec = emb.phrase_vector(form)
            if vec is not None and vec.any():
                groups.append(gi)
                rows.append(vec / np.linalg.norm(vec))
    return groups, np.array(rows)


def match_similar(
    doc: Document,
    eq: ExpandedQuery,
    emb: EmbeddingTable,
    cfg: SkeletonConfig = SkeletonConfig(),
    stopwords: frozenset[str] = frozenset(),
    exact: Sequence[SkeletonSpan] | None = None,
) -> list[SkeletonSpan]:
    """Single tokens whose vector has cosine >= tau with some entity form.

    A multi-word form is represented by the mean of its known token vectors.
    Tokens inside exact matches and stopwords are never candidates.
    """
    if not len(emb) or cfg.max_similar_per_sentence == 0:
        return []
    groups, targets = _entity_vectors(eq, emb)
    if not groups:
        return []
    if exact is None:
        exact = match_exact(doc, eq)
    owned = {i for s in exact for i in range(s.token_start, s.token_end)}

    best_for: dict[str, tuple[float, int] | None] = {}

    def best_match(norm: str) -> tuple[float, int] | None:
        if norm not in best_for:
            vec = emb.get(norm)
            size = 0.0 if vec is None else np.linalg.norm(vec)
            if size == 0.0:
                best_for[norm] = None
            else:
                sims = np.clip(targets @ vec / size, -1.0, 1.0)
                j = int(np.argmax(sims))  # first maximum, i.e. the lowest group
                best_for[norm] = (float(sims[j]), groups[j])
        return best_for[norm]

    spans: list[SkeletonSpan] = []
    for sent in doc.sentences:
        found = []
        for ti in range(sent.token_start, sent.token_end):
            norm = doc.tokens[ti].norm
            if ti in owned or norm in stopwords:
                continue
            m = best_match(norm)
            if m is not None and m[0] >= cfg.tau:
                found.append((m[0], ti, m[1]))
        found.sort(key=lambda f: (-f[0], f[1]))
        for score, ti, gi in sorted(found[: cfg.max_similar_per_sentence], key=lambda f: f[1]):
            spans.append(SkeletonSpan(sent.index, ti, ti + 1, Label.SIMILAR, score, gi))
    return spans


def resolve_overlaps(spans: Iterable[SkeletonSpan]) -> list[SkeletonSpan]:
    """Keep exact > trigger > similar, then the longer span, then the earlier start."""
    ranked = sorted(spans, key=lambda s: (PRIORITY[s.label], -s.width, s.sentence_index,
                                          s.token_start))
    taken: set[int] = set()
    kept = []
    for s in ranked:
        idx = range(s.token_start, s.token_end)
        if any(i in taken for i in idx):
            continue
        taken.update(idx)
        kept.append(s)
    kept.sort(key=lambda s: (s.sentence_index, s.token_start))
    return kept


def extract_skeleton(
    doc: Document,
    eq: ExpandedQuery,
    lexicon: Iterable[Form] = (),
    emb: EmbeddingTable | None = None,
    cfg: SkeletonConfig = SkeletonConfig(),
    stopwords: frozenset[str] = frozenset(),
) -> SkeletonAnnotation:
    exact = match_exact(doc, eq)
    spans = exact + match_triggers(doc, lexicon)
    if emb is not None:
        spans += match_similar(doc, eq, emb, cfg, stopwords, exact)
    return SkeletonAnnotation(doc.doc_id, tuple(resolve_overlaps(spans)), cfg)
