"""Entity-query evidence generation over biomedical abstracts.

Pipeline: expand the query with synonym aliases, retrieve abstracts holding
every entity (BM25-ranked), mark skeleton spans, then emit extractive,
deletion-only evidence sentences with provenance.
"""
from .corpus import Document, Sentence, Token, make_document, parse_corpus, read_corpus, split_sentences, tokenize
from .engine import Engine, EngineConfig, EvidenceSet, evaluate, load_config, rouge1_recall, run_pipeline
from .kb import (
    EmbeddingTable,
    Entity,
    ExpandedQuery,
    Query,
    SynonymKB,
    cosine,
    expand_query,
    load_embeddings,
    load_synonym_kb,
    load_trigger_lexicon,
    parse_query,
)
from .retrieval import BM25Params, InvertedIndex, bm25_score, build_index, idf, load_index, save_index, search
from .skeleton import Label, SkeletonAnnotation, SkeletonConfig, SkeletonSpan, extract_skeleton
from .summarize import Evidence, SummaryConfig, generate_evidence

__version__ = "0.1.0"
