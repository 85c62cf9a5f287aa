"""Abstract ingestion and deterministic segmentation.

Every downstream span (skeleton items, evidence sentences) is an offset into
``Document.text``, which is the NFC-normalized title, a newline, then the
abstract body. The title becomes a synthetic sentence 0 when it is non-empty.
"""
from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, NamedTuple

from .errors import CorpusError, DuplicateId, MalformedLine, MissingField

log = logging.getLogger(__name__)

# \w is isalnum() plus "_", so this is a maximal alphanumeric run
_TOKEN_RE = re.compile(r"[^\W_]+")
# a terminator, then either end of text or whitespace and the next visible char
_BOUNDARY_RE = re.compile(r"[.?!](?:(?=\s*\Z)|(?=\s+(\S)))")

REQUIRED_FIELDS = ("id", "title", "abstract")


class Token(NamedTuple):
    start: int
    end: int
    norm: str
    sentence_index: int = 0


class Sentence(NamedTuple):
    start: int
    end: int
    index: int
    token_start: int = 0
    token_end: int = 0
    is_title: bool = False


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    text: str
    sentences: tuple[Sentence, ...] = ()
    tokens: tuple[Token, ...] = field(default=(), repr=False)

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]

    def sentence_text(self, index: int) -> str:
        s = self.sentences[index]
        return self.text[s.start:s.end]

    def sentence_tokens(self, index: int) -> tuple[Token, ...]:
        s = self.sentences[index]
        return self.tokens[s.token_start:s.token_end]


def tokenize(text: str, offset: int = 0, sentence_index: int = 0) -> list[Token]:
    """Split ``text`` into lowercase alphanumeric runs with character offsets."""
    return [
        Token(m.start() + offset, m.end() + offset, m.group().lower(), sentence_index)
        for m in _TOKEN_RE.finditer(text)
    ]


def split_sentences(text: str) -> list[Sentence]:
    """Segment on '.', '?' or '!' followed by whitespace and an uppercase letter.

    A terminator at the end of text also closes a sentence, and a trailing
    fragment without one becomes the last sentence. Spans exclude surrounding
    whitespace. Abbreviations such as "e.g. The" over-split.
    """
    spans: list[tuple[int, int]] = []
    pos = 0
    for m in _BOUNDARY_RE.finditer(text):
        nxt = m.group(1)
        if nxt is not None and not nxt.isupper():
            continue
        _append_stripped(text, pos, m.end(), spans)
        pos = m.end()
    _append_stripped(text, pos, len(text), spans)
    return [Sentence(s, e, i) for i, (s, e) in enumerate(spans)]


def _append_stripped(text: str, start: int, end: int, out: list[tuple[int, int]]) -> None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start < end:
        out.append((start, end))


def make_document(doc_id: str, title: str, body: str) -> Document:
    """Normalize and segment one abstract."""
    title = unicodedata.normalize("NFC", title)
    body = unicodedata.normalize("NFC", body)
    has_title = bool(title.strip())
    if has_title and body:
        text = f"{title}\n{body}"
        body_offset = len(title) + 1
    elif has_title:
        text, body_offset = title, len(title)
    else:
        text, body_offset = body, 0

    raw: list[tuple[int, int, bool]] = []
    if has_title:
        spans: list[tuple[int, int]] = []
        _append_stripped(text, 0, len(title), spans)
        raw.extend((s, e, True) for s, e in spans)
    raw.extend(
        (s.start + body_offset, s.end + body_offset, False) for s in split_sentences(body)
    )

    sentences: list[Sentence] = []
    tokens: list[Token] = []
    for i, (s, e, is_title) in enumerate(raw):
        first = len(tokens)
        tokens.extend(tokenize(text[s:e], s, i))
        sentences.append(Sentence(s, e, i, first, len(tokens), is_title))
    return Document(doc_id, title, body, text, tuple(sentences), tuple(tokens))


def _decode_record(raw: bytes | str, line_no: int) -> Document | None:
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedLine(line_no, "invalid UTF-8") from exc
    if not raw.strip():
        return None
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedLine(line_no, exc.msg) from exc
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "not a JSON object")
    for name in REQUIRED_FIELDS:
        if not isinstance(obj.get(name), str):
            raise MissingField(line_no, name)
    if not obj["id"]:
        raise MissingField(line_no, "id")
    return make_document(obj["id"], obj["title"], obj["abstract"])


def parse_corpus(
    stream: IO[bytes] | Iterable[bytes | str],
    strict: bool = True,
    problems: list[CorpusError] | None = None,
) -> list[Document]:
    """Parse JSONL abstracts (fields id, title, abstract) in input order.

    Blank lines are ignored. In strict mode the first bad line raises; otherwise
    bad lines are skipped and the errors collected in ``problems``.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(stream, start=1):
        try:
            doc = _decode_record(raw, line_no)
            if doc is None:
                continue
            if doc.doc_id in seen:
                raise DuplicateId(doc.doc_id, line_no)
        except CorpusError as exc:
            if strict:
                raise
            log.warning("skipping %s", exc)
            if problems is not None:
                problems.append(exc)
            continue
        seen.add(doc.doc_id)
        docs.append(doc)
    return docs


def read_corpus(path: str | Path, strict: bool = True,
                problems: list[CorpusError] | None = None) -> list[Document]:
    with open(path, "rb") as fh:
        return parse_corpus(fh, strict=strict, problems=problems)
