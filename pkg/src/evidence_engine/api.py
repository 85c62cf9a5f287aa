"""HTTP JSON service over a loaded :class:`Engine`."""
from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .engine import Engine, evidence_set_to_dict
from .errors import EmptyIndex, QueryError


class SkeletonSpanOut(BaseModel):
    sentence: int
    start: int
    end: int
    label: str
    score: float
    text: str


class EvidenceSentenceOut(BaseModel):
    index: int
    text: str


class CoveredItemOut(BaseModel):
    label: str
    text: str
    group: Optional[int]


class EvidenceOut(BaseModel):
    sentences: list[EvidenceSentenceOut]
    covered_items: list[CoveredItemOut]


class ResultOut(BaseModel):
    doc_id: str
    score: float
    rank: int
    skeleton: list[SkeletonSpanOut]
    evidence: Optional[EvidenceOut]


class EntityGroupOut(BaseModel):
    entity: str
    etype: str
    forms: list[str]


class EvidenceSetOut(BaseModel):
    query: str
    expanded_query: list[EntityGroupOut]
    results: list[ResultOut]


class Health(BaseModel):
    status: str


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="evidence-engine")

    @app.get("/v1/health", response_model=Health)
    def health():
        return {"status": "ok"}

    # sync handler: FastAPI runs it in a worker thread; the engine is read-only
    @app.get("/v1/evidence", response_model=EvidenceSetOut)
    def evidence(q: str = Query(..., description="comma-separated entities"),
                 k: Optional[int] = Query(None, ge=1)):
        try:
            es = engine.run(q, k)
        except QueryError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except EmptyIndex as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return evidence_set_to_dict(es)

    return app
