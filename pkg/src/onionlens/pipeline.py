"""End-to-end scan orchestration plus the evaluate and dedupe tools.

scan() is the whole story of the system: crawl the onion site, curate
its images, classify each kept image, extract keywords from the page
text, and fuse the two signals into the activity report.
"""

from __future__ import annotations

import importlib.resources
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from . import curation, engine, fusion, harvester, keywords, metrics
from .config import PipelineConfig
from .errors import ValidationError
from .keywords import CategoryPrototypes, EmbeddingTable
from .model import ModelGraph, load_model
from .taxonomy import Category


@dataclass
class Artifacts:
    """Everything loaded from disk that a scan needs."""

    model: ModelGraph
    embeddings: EmbeddingTable
    stopwords: frozenset[str]
    prototypes: CategoryPrototypes


def default_data_path(name: str) -> str:
    """Path of a data file shipped inside the package."""
    return str(importlib.resources.files("onionlens") / "data" / name)


def load_artifacts(config: PipelineConfig) -> Artifacts:
    """Load model/embeddings/stopwords/prototypes from configured paths.

    Prototype seeds and stopwords fall back to the packaged defaults;
    the model and embedding files must be configured explicitly.
    """
    prototypes_path = config.prototypes_path or default_data_path("prototypes.yaml")
    stopwords_path = config.stopwords_path or default_data_path("stopwords.txt")
    for name, value in (
        ("model_path", config.model_path),
        ("embeddings_path", config.embeddings_path),
        ("prototypes_path", prototypes_path),
        ("stopwords_path", stopwords_path),
    ):
        if not value:
            raise ValidationError(name, "required path is not configured")
        if not os.path.isfile(value):
            raise ValidationError(name, f"file not found: {value}")
    model = load_model(config.model_path)
    table = keywords.load_embeddings(config.embeddings_path)
    stops = keywords.load_stopwords(stopwords_path)
    protos = keywords.load_prototypes(prototypes_path, table)
    return Artifacts(model=model, embeddings=table, stopwords=stops, prototypes=protos)


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def scan(url: str, config: PipelineConfig, artifacts: Artifacts,
         on_phase=None) -> fusion.ActivityReport:
    """Scan one onion URL and produce the activity report.

    Raises AllSeedsFailed when not a single page could be fetched;
    everything below that severity lands in the report's stats.
    on_phase, when given, is called with "crawling" and later
    "classifying" as the scan moves between its two long stretches.
    """
    started = _utcnow()
    if on_phase:
        on_phase("crawling")
    crawl_result = harvester.crawl([url], config)
    if on_phase:
        on_phase("classifying")

    # unique image URLs in discovery order, capped
    refs: dict[str, None] = {}
    for page in crawl_result.pages:
        for ref in page.image_refs:
            refs.setdefault(ref, None)
    image_urls = list(refs)[: config.max_images_per_scan]

    throttle = harvester.Throttle(config.per_host_delay_ms)
    records: list[curation.ImageRecord] = []
    errors = [f"{e['url']}: {e['error']}" for e in crawl_result.errors]
    with ThreadPoolExecutor(max_workers=config.crawl_workers) as pool:
        futures = [(u, pool.submit(harvester.download_image, u, config, throttle))
                   for u in image_urls]
        for u, fut in futures:
            try:
                data, ctype = fut.result()
            except Exception as exc:  # noqa: BLE001 - recorded, never fatal
                errors.append(f"{u}: {exc}")
                continue
            records.append(curation.ImageRecord(source_url=u, data=data, content_type=ctype))

    for rec in records:
        rec.decode(min_side=config.min_side)
    decoded = [r for r in records if r.ok]
    unusable = len(records) - len(decoded)
    kept, dropped = curation.dedupe(decoded, config.dedup_threshold)

    image_results: list[fusion.ImageResult] = []
    for rec in kept:
        cls = engine.classify(artifacts.model, rec.image)
        image_results.append(fusion.ImageResult(
            source_url=rec.source_url, dhash=rec.dhash, result=cls))

    text = " ".join(p.text for p in crawl_result.pages if p.text)
    kw_list = keywords.extract_keywords(
        text, artifacts.embeddings, artifacts.stopwords, artifacts.prototypes,
        k=config.keyword_k, ngram_max=config.ngram_max,
        lam=config.mmr_lambda, tau=config.min_similarity)

    nlp = keywords.nlp_title(kw_list)
    cls_title = fusion.classification_title([ir.result for ir in image_results])
    fused = fusion.fuse(cls_title, (nlp.category, nlp.confidence))

    stats = {
        "pages_fetched": crawl_result.pages_fetched,
        "pages_failed": len(crawl_result.errors),
        "images_found": len(refs),
        "images_downloaded": len(records),
        "images_unusable": unusable,
        "duplicates_dropped": len(dropped),
        "images_kept": len(kept),
        "keywords_extracted": len(kw_list),
        "errors": errors,
        "started_at": started,
        "finished_at": _utcnow(),
    }
    return fusion.ActivityReport(
        url=harvester.normalize_url(url),
        fusion=fused,
        classification=cls_title,
        nlp=nlp,
        keywords=kw_list,
        images=image_results,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvaluationResult:
    report: metrics.MetricsReport
    matrix: metrics.ConfusionMatrix
    skipped: list[str]


def evaluate(manifest_path: str, model: ModelGraph,
             config: PipelineConfig | None = None) -> EvaluationResult:
    """Classify every manifest entry and score against its label.

    Image paths resolve relative to the manifest file. Missing or
    undecodable files are listed in skipped; evaluation continues.
    """
    config = config or PipelineConfig()
    manifest = curation.load_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    pairs: list[tuple[Category, Category]] = []
    skipped: list[str] = []
    for entry in manifest.entries:
        path = os.path.join(base, entry.path)
        try:
            with open(path, "rb") as fh:
                data = fh.read()
        except OSError:
            skipped.append(f"{entry.path}: missing")
            continue
        decoded = curation.decode_and_validate(data, min_side=config.min_side)
        if isinstance(decoded, curation.Unusable):
            skipped.append(f"{entry.path}: {decoded.reason}")
            continue
        cls = engine.classify(model, decoded)
        pairs.append((entry.label, cls.top))
    cm = metrics.confusion(pairs)
    return EvaluationResult(report=metrics.metrics_report(cm), matrix=cm, skipped=skipped)


# ---------------------------------------------------------------------------
# directory dedupe
# ---------------------------------------------------------------------------

_IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".gif", ".webp")


@dataclass
class DedupeResult:
    manifest: curation.DatasetManifest
    kept: int
    dropped: int
    unusable: int
    skipped: list[str]


def dedupe_dir(in_dir: str, threshold: int, min_side: int = 64) -> DedupeResult:
    """Curate a directory tree of labeled images.

    Images live under one subdirectory per category (the subdirectory
    name must resolve as a category label); anything else is skipped and
    listed. Files are processed in sorted order so the greedy dedup is
    reproducible.
    """
    if not os.path.isdir(in_dir):
        raise ValidationError("in_dir", f"not a directory: {in_dir}")
    records: list[tuple[str, Category, curation.ImageRecord]] = []
    skipped: list[str] = []
    unusable = 0
    for sub in sorted(os.listdir(in_dir)):
        subpath = os.path.join(in_dir, sub)
        if not os.path.isdir(subpath):
            skipped.append(f"{sub}: not a category directory")
            continue
        try:
            label = curation.resolve_category(sub)
        except Exception:
            skipped.append(f"{sub}: unknown category directory")
            continue
        for fname in sorted(os.listdir(subpath)):
            rel = f"{sub}/{fname}"
            if not fname.lower().endswith(_IMAGE_EXTS):
                skipped.append(f"{rel}: not an image")
                continue
            with open(os.path.join(subpath, fname), "rb") as fh:
                data = fh.read()
            rec = curation.ImageRecord(source_url="", data=data).decode(min_side=min_side)
            if not rec.ok:
                unusable += 1
                skipped.append(f"{rel}: {rec.unusable}")
                continue
            records.append((rel, label, rec))

    kept, dropped = curation.dedupe([r for _, _, r in records], threshold)
    entries = [
        curation.ManifestEntry(path=rel, label=label, dhash=rec.dhash, split="train")
        for (rel, label, rec) in records if rec.kept
    ]
    return DedupeResult(
        manifest=curation.DatasetManifest(entries),
        kept=len(kept),
        dropped=len(dropped),
        unusable=unusable,
        skipped=skipped,
    )
