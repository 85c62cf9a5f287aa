"""Pipeline orchestration, configuration, JSON output and evaluation."""
from __future__ import annotations

import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, NamedTuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import Document, tokenize
from .errors import (
    ConfigError,
    EmptyIndex,
    EmptyReference,
    EngineError,
    GoldenFormat,
    NoEvidence,
)
from .kb import (
    EmbeddingTable,
    ExpandedQuery,
    Query,
    SynonymKB,
    default_triggers_path,
    expand_query,
    load_embeddings,
    load_stopwords,
    load_synonym_kb,
    load_trigger_lexicon,
    norm_form,
    parse_query,
)
from .retrieval import BM25Params, InvertedIndex, SearchHit, load_index, search
from .skeleton import SkeletonAnnotation, SkeletonConfig, extract_skeleton, span_chars, span_text
from .summarize import Evidence, SummaryConfig, generate_evidence

log = logging.getLogger(__name__)

PATH_KEYS = ("index", "synonyms", "triggers", "embeddings", "stopwords")


@dataclass(frozen=True)
class EngineConfig:
    index: Path | None = None
    synonyms: Path | None = None
    triggers: Path | None = None
    embeddings: Path | None = None
    stopwords: Path | None = None
    bm25: BM25Params = BM25Params()
    skeleton: SkeletonConfig = SkeletonConfig()
    summary: SummaryConfig = SummaryConfig()
    k: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    def with_overrides(self, **values: Any) -> "EngineConfig":
        """Apply flat ``key=value`` settings; ``None`` values are ignored."""
        values = {k: v for k, v in values.items() if v is not None}
        try:
            return replace(
                self,
                **{k: Path(values[k]) for k in PATH_KEYS if k in values},
                k=int(values.get("k", self.k)),
                bm25=BM25Params(float(values.get("k1", self.bm25.k1)),
                                float(values.get("b", self.bm25.b))),
                skeleton=SkeletonConfig(
                    float(values.get("tau", self.skeleton.tau)),
                    int(values.get("max_similar_per_sentence",
                                   self.skeleton.max_similar_per_sentence))),
                summary=SummaryConfig(
                    int(values.get("budget", self.summary.budget)),
                    bool(values.get("compression", self.summary.compression_enabled))),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


CONFIG_KEYS = set(PATH_KEYS) | {"k", "k1", "b", "tau", "max_similar_per_sentence",
                                "budget", "compression"}


def load_config(path: str | Path | None = None, **overrides: Any) -> EngineConfig:
    """Read a flat TOML file of ``key = value`` pairs; keyword overrides win.

    Relative resource paths are resolved against the config file's directory.
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                values = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        unknown = set(values) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        for key in PATH_KEYS:
            if key in values:
                p = Path(values[key])
                values[key] = p if p.is_absolute() else path.parent / p
    values.update({k: v for k, v in overrides.items() if v is not None})
    return EngineConfig().with_overrides(**values)


class ResultEntry(NamedTuple):
    hit: SearchHit
    document: Document
    skeleton: SkeletonAnnotation
    evidence: Evidence | None
    reason: str | None = None


@dataclass(frozen=True)
class EvidenceSet:
    query: str
    parsed: Query
    expanded: ExpandedQuery
    results: tuple[ResultEntry, ...] = field(default=())


class Engine:
    """Loaded resources plus the expand, search, skeleton, summarize pipeline.

    Immutable after construction, so one instance serves concurrent queries.
    """

    def __init__(self, cfg: EngineConfig, index: InvertedIndex | None = None):
        self.cfg = cfg
        for key in PATH_KEYS:
            p = getattr(cfg, key)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{key} file not found: {p}")
        if index is None:
            if cfg.index is None:
                raise ConfigError("no index configured")
            index = load_index(cfg.index)
        self.index = index
        self.kb = load_synonym_kb(cfg.synonyms) if cfg.synonyms else SynonymKB()
        self.lexicon = load_trigger_lexicon(cfg.triggers or default_triggers_path())
        self.embeddings = load_embeddings(cfg.embeddings) if cfg.embeddings else EmbeddingTable()
        self.stopwords = load_stopwords(cfg.stopwords)

    def run(self, raw_query: str, k: int | None = None) -> EvidenceSet:
        query = parse_query(raw_query)
        if self.index.N == 0:
            raise EmptyIndex()
        eq = expand_query(query, self.kb)
        hits = search(self.index, eq, k or self.cfg.k, self.cfg.bm25)
        results = []
        for hit in hits:
            doc = self.index.document(hit.doc_ordinal)
            ann = extract_skeleton(doc, eq, self.lexicon, self.embeddings,
                                   self.cfg.skeleton, self.stopwords)
            try:
                ev = generate_evidence(doc, ann, eq, self.cfg.summary, query)
                results.append(ResultEntry(hit, doc, ann, ev))
            except NoEvidence as exc:
                log.info("no evidence: %s", exc)
                results.append(ResultEntry(hit, doc, ann, None, exc.reason))
        return EvidenceSet(raw_query, query, eq, tuple(results))


def run_pipeline(raw_query: str, cfg: EngineConfig,
                 index: InvertedIndex | None = None) -> EvidenceSet:
    return Engine(cfg, index).run(raw_query)


# -- serialization -------------------------------------------------------------

def evidence_set_to_dict(es: EvidenceSet) -> dict[str, Any]:
    return {
        "query": es.query,
        "expanded_query": [
            {
                "entity": g.source.surface,
                "etype": g.source.etype,
                "forms": [" ".join(f) for f in g.sorted_forms()],
            }
            for g in es.expanded.groups
        ],
        "results": [_result_to_dict(r) for r in es.results],
    }


def _result_to_dict(r: ResultEntry) -> dict[str, Any]:
    doc = r.document
    skeleton = []
    for span in r.skeleton.spans:
        start, end = span_chars(doc, span)
        skeleton.append({
            "sentence": span.sentence_index,
            "start": start,
            "end": end,
            "label": span.label.value,
            "score": span.score,
            "text": span_text(doc, span),
        })
    evidence = None
    if r.evidence is not None:
        evidence = {
            "sentences": [{"index": s.index, "text": s.text} for s in r.evidence.sentences],
            "covered_items": [
                {"label": it.label.value, "text": it.text, "group": it.group_ref}
                for it in r.evidence.covered_items
            ],
        }
    return {
        "doc_id": r.hit.doc_id,
        "score": r.hit.score,
        "rank": r.hit.rank,
        "skeleton": skeleton,
        "evidence": evidence,
    }


def dumps(es: EvidenceSet) -> str:
    return json.dumps(evidence_set_to_dict(es), ensure_ascii=False, indent=2) + "\n"


# -- evaluation ------------------------------------------------------------------

def rouge1_recall(candidate: str, reference: str) -> float:
    """Clipped unigram overlap divided by the reference length."""
    ref = Counter(t.norm for t in tokenize(reference))
    if not ref:
        raise EmptyReference()
    cand = Counter(t.norm for t in tokenize(candidate))
    return sum((ref & cand).values()) / sum(ref.values())


class GoldenRecord(NamedTuple):
    query: str
    relevant_doc_ids: tuple[str, ...]
    skeleton_items: tuple[str, ...]
    reference_summary: str


def load_golden(path: str | Path) -> list[GoldenRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GoldenFormat(line_no, exc.msg) from exc
            if not isinstance(obj, dict):
                raise GoldenFormat(line_no, "not a JSON object")
            try:
                rec = GoldenRecord(
                    query=_expect(obj, "query", str),
                    relevant_doc_ids=tuple(_expect_list(obj, "relevant_doc_ids")),
                    skeleton_items=tuple(_expect_list(obj, "skeleton_items")),
                    reference_summary=_expect(obj, "reference_summary", str),
                )
            except (KeyError, TypeError) as exc:
                raise GoldenFormat(line_no, str(exc)) from exc
            if not tokenize(rec.reference_summary):
                raise GoldenFormat(line_no, "reference_summary has no tokens")
            records.append(rec)
    return records


def _expect(obj: dict, key: str, typ: type):
    if key not in obj:
        raise KeyError(f"missing {key!r}")
    if not isinstance(obj[key], typ):
        raise TypeError(f"{key!r} must be {typ.__name__}")
    return obj[key]


def _expect_list(obj: dict, key: str) -> list[str]:
    value = _expect(obj, key, list)
    if not all(isinstance(v, str) for v in value):
        raise TypeError(f"{key!r} must be a list of strings")
    return value


class QueryMetrics(NamedTuple):
    query: str
    precision_at_k: float
    skeleton_f1: float
    rouge1_recall: float


@dataclass(frozen=True)
class EvalReport:
    per_query: tuple[QueryMetrics, ...]

    @property
    def aggregates(self) -> dict[str, float]:
        n = len(self.per_query)
        return {
            name: (sum(getattr(m, name) for m in self.per_query) / n if n else 0.0)
            for name in ("precision_at_k", "skeleton_f1", "rouge1_recall")
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_query": [m._asdict() for m in self.per_query],
            "aggregates": self.aggregates,
        }


def _f1(predicted: set[str], gold: set[str]) -> float:
    if not predicted and not gold:
        return 1.0
    tp = len(predicted & gold)
    if not tp:
        return 0.0
    p, r = tp / len(predicted), tp / len(gold)
    return 2 * p * r / (p + r)


def score_query(es: EvidenceSet | None, gold: GoldenRecord) -> QueryMetrics:
    results = es.results if es is not None else ()
    relevant = set(gold.relevant_doc_ids)
    hits = [r.hit.doc_id for r in results]
    if hits:
        precision = sum(h in relevant for h in hits) / len(hits)
    else:
        precision = 0.0 if relevant else 1.0
    predicted = {
        " ".join(t.norm for t in r.document.tokens[s.token_start:s.token_end])
        for r in results for s in r.skeleton.spans
    }
    gold_items = {" ".join(norm_form(item)) for item in gold.skeleton_items}
    gold_items.discard("")
    candidate = next((r.evidence.text for r in results if r.evidence is not None), "")
    return QueryMetrics(gold.query, precision, _f1(predicted, gold_items),
                        rouge1_recall(candidate, gold.reference_summary))


def evaluate(outputs: Iterable[EvidenceSet],
             golden: str | Path | Iterable[GoldenRecord]) -> EvalReport:
    """Score pipeline outputs against golden records, matched by query string."""
    records = load_golden(golden) if isinstance(golden, (str, Path)) else list(golden)
    by_query = {es.query.strip(): es for es in outputs}
    return EvalReport(tuple(score_query(by_query.get(g.query.strip()), g) for g in records))


def run_evaluation(engine: Engine, golden: str | Path) -> EvalReport:
    records = load_golden(golden)
    outputs = []
    for rec in records:
        try:
            outputs.append(engine.run(rec.query))
        except EngineError as exc:
            log.warning("query %r failed: %s", rec.query, exc)
    return evaluate(outputs, records)
