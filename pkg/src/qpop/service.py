"""Real-time scoring service: score, suggestions, what-if comparison, and
the add-details uplift recommendation over a loaded bundle.

Responses are pure functions of (request, bundle version); the bundle
version is echoed in every response. Bundle reload is an atomic swap, so
in-flight requests finish against the snapshot they started with.
"""

from __future__ import annotations

import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .bundle import ScoreBundle
from .corpus import Question
from .calibration import SUMMARY_CHAR_LIMIT
from .ensemble import predict as forest_predict
from .interventions import suggest as make_suggestions
from .interventions import whatif as run_whatif
from .textfeat import capitalization_flags, first_word_group


class QuestionPayload(BaseModel):
    summary: str = Field(min_length=1, max_length=SUMMARY_CHAR_LIMIT)
    details: Optional[str] = None
    week: int = Field(default=1, ge=1, le=53)
    platform: str = "online"
    product_version: str = "deluxe"

    def to_question(self, qid: str = "request") -> Question:
        details = self.details if self.details else None
        return Question(
            id=qid, summary=self.summary, details=details, week=self.week,
            platform=self.platform, product_version=self.product_version,
            answered=False, views=0,
        )


class TopicInfo(BaseModel):
    id: int
    keywords: list[str]


class ScoreResponse(BaseModel):
    probability: float
    percentile: float
    top_decile: bool
    feature_breakdown: dict[str, float]
    topic: TopicInfo
    coherency: float
    bundle_version: str


class SuggestRequest(BaseModel):
    question: QuestionPayload
    max_n: int = Field(default=5, ge=1, le=20)


class SuggestionPayload(BaseModel):
    kind: str
    summary: str
    details: Optional[str]
    score: float
    delta: float
    description: str


class SuggestResponse(BaseModel):
    base_probability: float
    suggestions: list[SuggestionPayload]
    bundle_version: str


class WhatIfRequest(BaseModel):
    original: QuestionPayload
    edited: QuestionPayload


class WhatIfResponse(BaseModel):
    score_before: float
    score_after: float
    delta: float
    feature_diff: dict[str, tuple]
    bundle_version: str


class UpliftResponse(BaseModel):
    uplift_score: float
    recommendation: str  # add_details | keep_as_is
    bundle_version: str


class HealthResponse(BaseModel):
    status: str
    bundle_version: str
    has_uplift: bool


class BundleHolder:
    """Atomic bundle snapshot for concurrent request handling."""

    def __init__(self, bundle: Optional[ScoreBundle] = None):
        self._lock = threading.Lock()
        self._bundle = bundle

    def get(self) -> ScoreBundle:
        bundle = self._bundle
        if bundle is None:
            raise HTTPException(status_code=503, detail="no bundle loaded")
        return bundle

    def swap(self, bundle: ScoreBundle) -> None:
        with self._lock:
            self._bundle = bundle


def uplift_row_for(bundle: ScoreBundle, question: Question) -> dict:
    fv, dist = bundle.features_for(question)
    proper, _ = capitalization_flags(question.summary)
    return {
        "topic": str(int(np.argmax(dist.probs))),
        "question_length": len(question.summary) + len(question.details or ""),
        "week": question.week,
        "first_word": first_word_group(question.summary),
        "proper_capitalization": proper,
        "question_mark": "?" in question.summary,
    }


def create_app(bundle: Optional[ScoreBundle] = None, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="qpop scoring service", version="1")
    holder = BundleHolder(bundle)
    app.state.bundle_holder = holder

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        snapshot = holder.get()
        return HealthResponse(
            status="ok",
            bundle_version=snapshot.version,
            has_uplift=snapshot.uplift_forest is not None,
        )

    @app.get("/v1/topics")
    def topics():
        snapshot = holder.get()
        keywords = snapshot.topic_model.top_keywords(5)
        return {
            "bundle_version": snapshot.version,
            "topics": [{"id": i, "keywords": kw} for i, kw in enumerate(keywords)],
        }

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(payload: QuestionPayload):
        snapshot = holder.get()
        result = snapshot.score_question(payload.to_question())
        return ScoreResponse(
            probability=result.probability,
            percentile=result.percentile,
            top_decile=result.top_decile,
            feature_breakdown=result.feature_breakdown,
            topic=TopicInfo(id=result.topic, keywords=result.topic_keywords),
            coherency=result.coherency,
            bundle_version=result.bundle_version,
        )

    @app.post("/v1/suggest", response_model=SuggestResponse)
    def suggest(payload: SuggestRequest):
        snapshot = holder.get()
        question = payload.question.to_question()
        base = snapshot.score_question(question).probability
        suggestions = make_suggestions(question, snapshot, max_n=payload.max_n)
        return SuggestResponse(
            base_probability=base,
            suggestions=[SuggestionPayload(**s.__dict__) for s in suggestions],
            bundle_version=snapshot.version,
        )

    @app.post("/v1/whatif", response_model=WhatIfResponse)
    def whatif(payload: WhatIfRequest):
        snapshot = holder.get()
        result = run_whatif(
            payload.original.to_question("original"),
            payload.edited.to_question("edited"),
            snapshot,
        )
        return WhatIfResponse(**result.__dict__)

    @app.post("/v1/uplift", response_model=UpliftResponse)
    def uplift(payload: QuestionPayload):
        snapshot = holder.get()
        if snapshot.uplift_forest is None:
            raise HTTPException(status_code=503, detail="bundle has no uplift forest")
        row = uplift_row_for(snapshot, payload.to_question())
        value = float(forest_predict(snapshot.uplift_forest, row))
        return UpliftResponse(
            uplift_score=value,
            recommendation="add_details" if value > 0 else "keep_as_is",
            bundle_version=snapshot.version,
        )

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
