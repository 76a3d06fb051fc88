"""Title fusion and the activity report.

Combines the image-side vote with the text-side vote into the final
activity, and owns the canonical JSON form of the scan report (sorted
keys, floats rounded to six decimals) so that independent runs produce
byte-identical documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import __version__
from .engine import Classification
from .keywords import Keyword, NlpTitle
from .taxonomy import CATEGORIES, Category

UNDETERMINED = "undetermined"
REPORT_SCHEMA_VERSION = 1


def round6(x: float) -> float:
    return round(float(x), 6)


def classification_title(classifications: list[Classification]) -> tuple[Category | None, float]:
    """Confidence-weighted vote over per-image classifications.

    score_c sums the confidence of images whose top class is c; the
    winner's confidence is its share of the total. Empty input gives
    (None, 0.0); argmax ties go to the lowest canonical index.
    """
    if not classifications:
        return None, 0.0
    scores = [0.0] * len(CATEGORIES)
    for c in classifications:
        scores[c.top.index] += c.confidence
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    total = sum(scores)
    conf = scores[best] / total if total > 0 else 0.0
    return CATEGORIES[best], conf


@dataclass(frozen=True)
class FusionResult:
    category: Category | None  # None = undetermined
    confidence: float
    source: str  # none | classification | nlp | both


def fuse(classification: tuple[Category | None, float],
         nlp: tuple[Category | None, float]) -> FusionResult:
    """Resolve the final activity from the two recommenders.

    Both absent -> undetermined; one absent -> the other; agreement ->
    that category at the larger confidence; disagreement -> the side
    with the higher normalized confidence, ties favoring the image side.
    """
    cls_cat, cls_conf = classification
    nlp_cat, nlp_conf = nlp
    if cls_cat is None and nlp_cat is None:
        return FusionResult(None, 0.0, "none")
    if nlp_cat is None:
        return FusionResult(cls_cat, cls_conf, "classification")
    if cls_cat is None:
        return FusionResult(nlp_cat, nlp_conf, "nlp")
    if cls_cat == nlp_cat:
        return FusionResult(cls_cat, max(cls_conf, nlp_conf), "both")
    if nlp_conf > cls_conf:
        return FusionResult(nlp_cat, nlp_conf, "nlp")
    return FusionResult(cls_cat, cls_conf, "classification")


@dataclass
class ImageResult:
    """One curated image and its classification."""

    source_url: str
    dhash: int
    result: Classification


@dataclass
class ActivityReport:
    """Everything a scan produced, ready for serialization."""

    url: str
    fusion: FusionResult
    classification: tuple[Category | None, float]
    nlp: NlpTitle
    keywords: list[Keyword]
    images: list[ImageResult]
    stats: dict = field(default_factory=dict)

    @property
    def activity(self) -> str:
        return self.fusion.category.canonical_id if self.fusion.category else UNDETERMINED

    def to_dict(self) -> dict:
        cls_cat, cls_conf = self.classification
        return {
            "url": self.url,
            "activity": self.activity,
            "activity_confidence": round6(self.fusion.confidence),
            "activity_source": self.fusion.source,
            "classification_title": {
                "category": cls_cat.canonical_id if cls_cat else None,
                "confidence": round6(cls_conf),
            },
            "nlp_title": {
                "category": self.nlp.category.canonical_id if self.nlp.category else None,
                "confidence": round6(self.nlp.confidence),
                "keywords": [
                    {
                        "surface": kw.surface,
                        "relevance": round6(kw.relevance),
                        "category": kw.assigned.canonical_id if kw.assigned else None,
                        "similarity": round6(kw.similarity),
                    }
                    for kw in self.keywords
                ],
            },
            "images": [
                {
                    "source_url": im.source_url,
                    "dhash": f"{im.dhash:016x}",
                    "top": im.result.top.canonical_id,
                    "scores": [round6(s) for s in im.result.scores.scores],
                }
                for im in self.images
            ],
            "stats": dict(self.stats),
            "versions": {
                "package": __version__,
                "report_schema": REPORT_SCHEMA_VERSION,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"
