"""Inverted index, BM25 ranking and the conjunctive entity-group filter.

The index also keeps a forward array of term ids per document (sentences
separated by -1) so multi-word aliases can be verified as consecutive tokens,
and the raw title/abstract so hits can be re-segmented for skeleton extraction.
"""
from __future__ import annotations

import hashlib
import math
import os
import struct
import tempfile
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .corpus import Document, make_document
from .errors import CorruptIndex, DuplicateId, EmptyIndex, UnknownDocument
from .kb import ExpandedQuery, Form

MAGIC = b"BEGEIDX1"
_DIGEST = 32
_SEP = -1


class Posting(NamedTuple):
    doc_ordinal: int
    tf: int


class IndexStats(NamedTuple):
    N: int
    avgdl: float


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not self.k1 >= 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


class SearchHit(NamedTuple):
    doc_id: str
    score: float
    rank: int
    doc_ordinal: int


class InvertedIndex:
    def __init__(
        self,
        doc_ids: list[str],
        titles: list[str],
        bodies: list[str],
        doc_lengths: np.ndarray,
        terms: list[str],
        post_docs: list[np.ndarray],
        post_tfs: list[np.ndarray],
        fwd: np.ndarray,
        fwd_offsets: np.ndarray,
    ):
        self.doc_ids = doc_ids
        self.titles = titles
        self.bodies = bodies
        self.doc_lengths = doc_lengths
        self.terms = terms
        self.term_ids = {t: i for i, t in enumerate(terms)}
        self.post_docs = post_docs
        self.post_tfs = post_tfs
        self.fwd = fwd
        self.fwd_offsets = fwd_offsets
        self.ordinal_of = {d: i for i, d in enumerate(doc_ids)}
        n = len(doc_ids)
        self.stats = IndexStats(n, float(doc_lengths.sum()) / n if n else 0.0)
        self.document = lru_cache(maxsize=4096)(self._document)

    @property
    def N(self) -> int:
        return self.stats.N

    def _document(self, ordinal: int) -> Document:
        self._check_ordinal(ordinal)
        return make_document(self.doc_ids[ordinal], self.titles[ordinal], self.bodies[ordinal])

    def _check_ordinal(self, ordinal: int) -> None:
        if not 0 <= ordinal < self.N:
            raise UnknownDocument(ordinal)

    def df(self, term: str) -> int:
        tid = self.term_ids.get(term)
        return 0 if tid is None else len(self.post_docs[tid])

    def postings(self, term: str) -> list[Posting]:
        tid = self.term_ids.get(term)
        if tid is None:
            return []
        return [Posting(int(d), int(f)) for d, f in zip(self.post_docs[tid], self.post_tfs[tid])]

    def tf(self, term: str, ordinal: int) -> int:
        tid = self.term_ids.get(term)
        if tid is None:
            return 0
        docs = self.post_docs[tid]
        i = int(np.searchsorted(docs, ordinal))
        return int(self.post_tfs[tid][i]) if i < len(docs) and docs[i] == ordinal else 0

    def _tfs(self, term: str, ordinals: np.ndarray) -> np.ndarray:
        tid = self.term_ids.get(term)
        out = np.zeros(len(ordinals), dtype=np.float64)
        if tid is None or not len(ordinals):
            return out
        docs = self.post_docs[tid]
        pos = np.searchsorted(docs, ordinals)
        pos_c = np.minimum(pos, len(docs) - 1)
        hit = docs[pos_c] == ordinals
        out[hit] = self.post_tfs[tid][pos_c[hit]]
        return out

    def _form_docs(self, form: Form) -> np.ndarray:
        """Ordinals of documents containing ``form`` as consecutive tokens of one sentence."""
        ids = [self.term_ids.get(t) for t in form]
        if not ids or any(i is None for i in ids):
            return np.empty(0, dtype=np.uint32)
        cand = self.post_docs[ids[0]]
        for tid in ids[1:]:
            cand = np.intersect1d(cand, self.post_docs[tid], assume_unique=True)
        if len(ids) == 1:
            return cand
        pattern = np.asarray(ids, dtype=np.int32)
        keep = [d for d in cand if self._has_sequence(int(d), pattern)]
        return np.asarray(keep, dtype=np.uint32)

    def _has_sequence(self, ordinal: int, pattern: np.ndarray) -> bool:
        seq = self.fwd[self.fwd_offsets[ordinal]:self.fwd_offsets[ordinal + 1]]
        m = len(pattern)
        if len(seq) < m:
            return False
        for start in np.flatnonzero(seq[: len(seq) - m + 1] == pattern[0]):
            if np.array_equal(seq[start:start + m], pattern):
                return True
        return False

    def candidates(self, eq: ExpandedQuery) -> np.ndarray:
        """Documents holding at least one surface form of every entity group."""
        result: np.ndarray | None = None
        for group in eq.groups:
            found = np.empty(0, dtype=np.uint32)
            for form in group.sorted_forms():
                found = np.union1d(found, self._form_docs(form))
            result = found if result is None else np.intersect1d(result, found, assume_unique=True)
            if not len(result):
                break
        return np.empty(0, dtype=np.uint32) if result is None else result.astype(np.uint32)


def build_index(docs: Sequence[Document]) -> InvertedIndex:
    seen: set[str] = set()
    counts: list[Counter] = []
    for doc in docs:
        if doc.doc_id in seen:
            raise DuplicateId(doc.doc_id)
        seen.add(doc.doc_id)
        counts.append(Counter(t.norm for t in doc.tokens))

    terms = sorted({t for c in counts for t in c})
    term_ids = {t: i for i, t in enumerate(terms)}
    plist_docs: list[list[int]] = [[] for _ in terms]
    plist_tfs: list[list[int]] = [[] for _ in terms]
    for ordinal, c in enumerate(counts):
        for term, tf in c.items():
            tid = term_ids[term]
            plist_docs[tid].append(ordinal)
            plist_tfs[tid].append(tf)

    fwd: list[int] = []
    offsets = [0]
    for doc in docs:
        for s in doc.sentences:
            if s.index:
                fwd.append(_SEP)
            fwd.extend(term_ids[t.norm] for t in doc.sentence_tokens(s.index))
        offsets.append(len(fwd))

    return InvertedIndex(
        doc_ids=[d.doc_id for d in docs],
        titles=[d.title for d in docs],
        bodies=[d.body for d in docs],
        doc_lengths=np.array([len(d.tokens) for d in docs], dtype=np.uint32),
        terms=terms,
        post_docs=[np.array(p, dtype=np.uint32) for p in plist_docs],
        post_tfs=[np.array(p, dtype=np.uint32) for p in plist_tfs],
        fwd=np.array(fwd, dtype=np.int32),
        fwd_offsets=np.array(offsets, dtype=np.int64),
    )


def idf(index: InvertedIndex, term: str) -> float:
    """ln((N - df + 0.5) / (df + 0.5) + 1), positive even when df == N."""
    if index.N == 0:
        raise EmptyIndex()
    df = index.df(term)
    return math.log((index.N - df + 0.5) / (df + 0.5) + 1.0)


def _score_many(index: InvertedIndex, ordinals: np.ndarray, terms: list[str],
                params: BM25Params) -> np.ndarray:
    scores = np.zeros(len(ordinals), dtype=np.float64)
    if not len(ordinals) or index.stats.avgdl == 0:
        return scores
    dl = index.doc_lengths[ordinals].astype(np.float64)
    norm = params.k1 * (1.0 - params.b + params.b * dl / index.stats.avgdl)
    for term in terms:
        tf = index._tfs(term, ordinals)
        present = tf > 0
        if not present.any():
            continue
        w = idf(index, term)
        contrib = np.zeros_like(scores)
        contrib[present] = w * tf[present] * (params.k1 + 1.0) / (tf[present] + norm[present])
        scores += contrib
    return scores


def bm25_score(index: InvertedIndex, doc_ordinal: int, eq: ExpandedQuery,
               params: BM25Params = BM25Params()) -> float:
    if index.N == 0:
        raise EmptyIndex()
    index._check_ordinal(doc_ordinal)
    ords = np.array([doc_ordinal], dtype=np.uint32)
    return float(_score_many(index, ords, eq.terms(), params)[0])


def search(index: InvertedIndex, eq: ExpandedQuery, k: int,
           params: BM25Params = BM25Params()) -> list[SearchHit]:
    """Rank conjunctive candidates by BM25; ties go to the smaller doc_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.N == 0:
        return []
    cand = index.candidates(eq)
    scores = _score_many(index, cand, eq.terms(), params)
    order = sorted(range(len(cand)), key=lambda i: (-scores[i], index.doc_ids[cand[i]]))
    return [
        SearchHit(index.doc_ids[cand[i]], float(scores[i]), rank, int(cand[i]))
        for rank, i in enumerate(order[:k], start=1)
    ]


# -- persistence -------------------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def serialize_index(index: InvertedIndex) -> bytes:
    parts = [MAGIC, struct.pack("<III", index.N, len(index.terms), len(index.fwd))]
    for i in range(index.N):
        parts += [_pack_str(index.doc_ids[i]), _pack_str(index.titles[i]), _pack_str(index.bodies[i])]
    parts.append(index.doc_lengths.astype("<u4").tobytes())
    parts.extend(_pack_str(t) for t in index.terms)
    parts.append(np.array([len(p) for p in index.post_docs], dtype="<u4").tobytes())
    for docs, tfs in zip(index.post_docs, index.post_tfs):
        parts += [docs.astype("<u4").tobytes(), tfs.astype("<u4").tobytes()]
    parts.append(np.diff(index.fwd_offsets).astype("<u4").tobytes())
    parts.append(index.fwd.astype("<i4").tobytes())
    payload = b"".join(parts)
    return payload + hashlib.sha256(payload).digest()


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Write atomically: the file appears only once fully written."""
    path = Path(path)
    data = serialize_index(index)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise CorruptIndex("unexpected end of index data")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32s(self, n: int, dtype: str = "<u4") -> np.ndarray:
        return np.frombuffer(self.take(4 * n), dtype=dtype).copy()

    def string(self) -> str:
        (n,) = struct.unpack("<I", self.take(4))
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptIndex("invalid UTF-8 in index") from None


def deserialize_index(data: bytes) -> InvertedIndex:
    if len(data) < len(MAGIC) + _DIGEST or data[: len(MAGIC)] != MAGIC:
        raise CorruptIndex("bad magic bytes")
    payload, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptIndex("checksum mismatch")
    r = _Reader(payload)
    r.take(len(MAGIC))
    n, v, fwd_len = struct.unpack("<III", r.take(12))
    doc_ids, titles, bodies = [], [], []
    for _ in range(n):
        doc_ids.append(r.string())
        titles.append(r.string())
        bodies.append(r.string())
    doc_lengths = r.u32s(n)
    terms = [r.string() for _ in range(v)]
    dfs = r.u32s(v)
    post_docs, post_tfs = [], []
    for df in dfs:
        post_docs.append(r.u32s(int(df)))
        post_tfs.append(r.u32s(int(df)))
    fwd_lens = r.u32s(n).astype(np.int64)
    fwd = r.u32s(fwd_len, "<i4").astype(np.int32)
    if r.pos != len(payload) or int(fwd_lens.sum()) != fwd_len:
        raise CorruptIndex("inconsistent index layout")
    offsets = np.concatenate([[0], np.cumsum(fwd_lens)]).astype(np.int64)
    return InvertedIndex(doc_ids, titles, bodies, doc_lengths, terms, post_docs, post_tfs,
                         fwd, offsets)


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as fh:
        return deserialize_index(fh.read())
