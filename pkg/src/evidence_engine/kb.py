"""File-backed knowledge resources and query expansion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .corpus import tokenize
from .errors import (
    BadRow,
    DimensionMismatch,
    EmptyQuery,
    NonNumeric,
    UnknownEntityType,
    ZeroVector,
)

ETYPES = ("disease", "gene", "drug", "other")

Form = tuple[str, ...]


def norm_form(text: str) -> Form:
    return tuple(t.norm for t in tokenize(text))


class Entity(NamedTuple):
    surface: str
    etype: str = "other"


@dataclass(frozen=True)
class Query:
    entities: tuple[Entity, ...]

    def __post_init__(self):
        if not self.entities:
            raise EmptyQuery()
        for ent in self.entities:
            if ent.etype not in ETYPES:
                raise EmptyQuery(f"unknown entity type {ent.etype!r}")
            if not norm_form(ent.surface):
                raise EmptyQuery(f"entity {ent.surface!r} has no alphanumeric content")

    @classmethod
    def of(cls, *surfaces: str) -> "Query":
        return cls(tuple(Entity(s) for s in surfaces))


def parse_query(raw: str) -> Query:
    """Parse ``"disease:diabetes, drug:metformin"``; untyped entities are ``other``."""
    entities = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        etype, sep, rest = part.partition(":")
        if sep and etype.strip().lower() in ETYPES and rest.strip():
            entities.append(Entity(rest.strip(), etype.strip().lower()))
        else:
            entities.append(Entity(part))
    if not entities:
        raise EmptyQuery()
    return Query(tuple(entities))


class SynonymKB:
    """(etype, canonical) -> alias forms, each canonical included in its own set."""

    def __init__(self, entries: dict[tuple[str, str], frozenset[Form]] | None = None):
        self._entries = dict(entries or {})

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SynonymKB) and self._entries == other._entries

    def items(self) -> Iterator[tuple[tuple[str, str], frozenset[Form]]]:
        return iter(sorted(self._entries.items()))

    def get(self, etype: str, canonical: str) -> frozenset[Form] | None:
        return self._entries.get((etype, canonical))

    def lookup(self, entity: Entity) -> frozenset[Form] | None:
        key = " ".join(norm_form(entity.surface))
        if entity.etype != "other":
            return self.get(entity.etype, key)
        found = [forms for (et, canon), forms in self._entries.items() if canon == key]
        if not found:
            return None
        return frozenset().union(*found)


def load_synonym_kb(path: str | Path) -> SynonymKB:
    """Read ``etype<TAB>canonical<TAB>alias`` rows."""
    entries: dict[tuple[str, str], set[Form]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise BadRow(line_no)
            etype = cols[0].strip().lower()
            if etype not in ETYPES:
                raise UnknownEntityType(line_no, cols[0])
            canonical, alias = norm_form(cols[1]), norm_form(cols[2])
            if not canonical or not alias:
                raise BadRow(line_no, "empty canonical or alias")
            forms = entries.setdefault((etype, " ".join(canonical)), {canonical})
            forms.add(alias)
    return SynonymKB({k: frozenset(v) for k, v in entries.items()})


def dump_synonym_kb(kb: SynonymKB, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (etype, canonical), forms in kb.items():
            for form in sorted(forms):
                fh.write(f"{etype}\t{canonical}\t{' '.join(form)}\n")


class EntityGroup(NamedTuple):
    source: Entity
    forms: frozenset[Form]

    @property
    def source_form(self) -> Form:
        return norm_form(self.source.surface)

    def sorted_forms(self) -> list[Form]:
        return sorted(self.forms)


@dataclass(frozen=True)
class ExpandedQuery:
    groups: tuple[EntityGroup, ...]

    def terms(self) -> list[str]:
        """Distinct component tokens over every form of every group, sorted."""
        return sorted({tok for g in self.groups for form in g.forms for tok in form})


def expand_query(q: Query, kb: SynonymKB | None = None) -> ExpandedQuery:
    groups = []
    for ent in q.entities:
        own = norm_form(ent.surface)
        forms = kb.lookup(ent) if kb is not None else None
        groups.append(EntityGroup(ent, frozenset(forms or ()) | {own}))
    return ExpandedQuery(tuple(groups))


def _phrase_lines(path: str | Path) -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                yield line


def load_trigger_lexicon(path: str | Path) -> frozenset[Form]:
    """One claim-indicator phrase per line; '#' starts a comment line."""
    return frozenset(f for f in map(norm_form, _phrase_lines(path)) if f)


def _default_data(name: str) -> Path:
    return Path(str(resources.files("evidence_engine") / "data" / name))


def default_stopwords_path() -> Path:
    return _default_data("stopwords.txt")


def default_triggers_path() -> Path:
    return _default_data("triggers.txt")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    words: set[str] = set()
    for line in _phrase_lines(path or default_stopwords_path()):
        words.update(norm_form(line))
    return frozenset(words)


class EmbeddingTable:
    """Static word vectors of a single dimension."""

    def __init__(self, words: Sequence[str] = (), vectors: np.ndarray | None = None):
        self.words = list(words)
        self._row = {w: i for i, w in enumerate(self.words)}
        if vectors is None:
            vectors = np.zeros((0, 0))
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.dim: int | None = self.vectors.shape[1] if self.words else None

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._row

    def get(self, word: str) -> np.ndarray | None:
        row = self._row.get(word)
        return None if row is None else self.vectors[row]

    def phrase_vector(self, form: Iterable[str]) -> np.ndarray | None:
        """Mean of the known token vectors, or None if no token is known."""
        rows = [self._row[t] for t in form if t in self._row]
        if not rows:
            return None
        return self.vectors[rows].mean(axis=0)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read ``word v1 ... vd`` lines with an optional ``count dim`` header."""
    words: list[str] = []
    seen: set[str] = set()
    rows: list[list[float]] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError:
                raise NonNumeric(line_no) from None
            if not vec or not all(math.isfinite(x) for x in vec):
                raise NonNumeric(line_no)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DimensionMismatch(line_no, dim, len(vec))
            word = parts[0].lower()
            if word in seen:
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    return EmbeddingTable(words, np.array(rows, dtype=np.float64).reshape(len(rows), dim or 0))


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(None, u.size, v.size)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine of an all-zero vector is undefined")
    return float(min(1.0, max(-1.0, np.dot(u, v) / (nu * nv))))
