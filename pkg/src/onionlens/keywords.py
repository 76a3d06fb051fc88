"""Keyword extraction and category assignment for page text.

Candidates (unigrams and bigrams over the stopword-filtered token
stream) are embedded with a static word-vector table, ranked against the
document vector with maximal marginal relevance, and each ranked keyword
is assigned to the nearest category prototype when the cosine similarity
clears the threshold.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ParseError, SchemaError, UnknownLabel
from .taxonomy import CATEGORIES, Category, resolve_category

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; punctuation splits, digit-only tokens drop."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if not t.isdigit()]


@dataclass
class EmbeddingTable:
    dim: int
    vectors: np.ndarray  # (n, dim) float32
    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    def get(self, token: str) -> np.ndarray | None:
        row = self.index.get(token.lower())
        return None if row is None else self.vectors[row]

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.index


def load_embeddings(path: str) -> EmbeddingTable:
    """Read a GloVe-style text table: one line per token, token then D floats.

    The dimension comes from the first line; ragged or non-numeric lines
    are rejected. Tokens are lowercased; the first occurrence wins.
    """
    dim = None
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise ParseError(f"{path}:{lineno}: no vector components")
            elif len(parts) - 1 != dim:
                raise ParseError(
                    f"{path}:{lineno}: expected {dim} components, got {len(parts) - 1}")
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not all(math.isfinite(v) for v in vec):
                raise ParseError(f"{path}:{lineno}: non-finite vector component")
            token = parts[0].lower()
            if token not in index:
                index[token] = len(rows)
                rows.append(vec)
    if dim is None:
        raise ParseError(f"{path}: embedding file is empty")
    return EmbeddingTable(dim=dim, vectors=np.array(rows, dtype=np.float32), index=index)


def load_stopwords(path: str) -> frozenset[str]:
    """One token per line; blank lines ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip().lower()
            if token:
                words.add(token)
    return frozenset(words)


# ---------------------------------------------------------------------------
# candidates and embeddings
# ---------------------------------------------------------------------------

def filtered_tokens(text: str, stopwords: frozenset[str]) -> list[str]:
    """Token stream with stopwords removed (duplicates kept, order kept)."""
    return [t for t in tokenize(text) if t not in stopwords]


def extract_candidates(text: str, stopwords: frozenset[str],
                       ngram_max: int = 2) -> list[str]:
    """Unique candidate terms in deterministic order.

    Unigrams come first in first-occurrence order, then n-grams built
    from adjacency in the stopword-filtered stream (so "buy the best
    cocaine" yields the bigram "buy cocaine"). This order is the
    tie-break order used by ranking.
    """
    tokens = filtered_tokens(text, stopwords)
    seen: dict[str, None] = {}
    for t in tokens:
        seen.setdefault(t, None)
    for n in range(2, ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            seen.setdefault(" ".join(tokens[i:i + n]), None)
    return list(seen)


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not math.isfinite(norm):
        return np.zeros_like(vec)
    return vec / norm


def embed_term(term: str, table: EmbeddingTable) -> np.ndarray:
    """Mean of in-vocabulary token vectors, L2-normalized.

    All tokens out of vocabulary (or exact cancellation) gives the zero
    vector, which marks the term as unembeddable.
    """
    vecs = [table.get(t) for t in term.split()]
    vecs = [v for v in vecs if v is not None]
    if not vecs:
        return np.zeros(table.dim, dtype=np.float64)
    mean = np.mean(np.asarray(vecs, dtype=np.float64), axis=0)
    return _normalize(mean)


def embed_doc(tokens: list[str], table: EmbeddingTable) -> np.ndarray:
    """Document vector: normalized mean over in-vocabulary occurrences."""
    vecs = [table.get(t) for t in tokens]
    vecs = [v for v in vecs if v is not None]
    if not vecs:
        return np.zeros(table.dim, dtype=np.float64)
    mean = np.mean(np.asarray(vecs, dtype=np.float64), axis=0)
    return _normalize(mean)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero vectors compare as 0.0."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


# ---------------------------------------------------------------------------
# ranking and assignment
# ---------------------------------------------------------------------------

@dataclass
class Keyword:
    surface: str
    relevance: float  # cosine to the document vector
    assigned: Category | None = None
    similarity: float = 0.0  # cosine to the nearest prototype
    vector: np.ndarray | None = field(default=None, repr=False)


def rank_keywords(candidates: list[str], table: EmbeddingTable,
                  doc_vector: np.ndarray, k: int, lam: float) -> list[Keyword]:
    """Top-k keywords by maximal marginal relevance.

    The first pick maximizes cosine to the document; each later pick
    maximizes lam*cos(c, doc) - (1-lam)*max over selected of cos(c, s).
    Ties keep the earlier candidate. Unembeddable candidates are skipped
    since they carry no signal to rank or assign.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    seen: dict[str, None] = {}
    pool: list[Keyword] = []
    for term in candidates:
        if term in seen:
            continue
        seen[term] = None
        vec = embed_term(term, table)
        if not vec.any():
            continue
        pool.append(Keyword(surface=term, relevance=cosine(vec, doc_vector), vector=vec))

    selected: list[Keyword] = []
    remaining = list(pool)
    while remaining and len(selected) < k:
        if not selected:
            best = max(range(len(remaining)), key=lambda i: (remaining[i].relevance, -i))
        else:
            def mmr(i: int) -> float:
                kw = remaining[i]
                redundancy = max(cosine(kw.vector, s.vector) for s in selected)
                return lam * kw.relevance - (1.0 - lam) * redundancy
            best = max(range(len(remaining)), key=lambda i: (mmr(i), -i))
        selected.append(remaining.pop(best))
    return selected


@dataclass
class CategoryPrototypes:
    """Unit prototype vectors in canonical category order."""

    matrix: np.ndarray  # (5, dim) float64, unit rows
    seeds: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if self.matrix.shape[0] != len(CATEGORIES):
            raise ValueError(f"expected {len(CATEGORIES)} prototypes")
        norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("prototype vectors must have unit norm")


def load_prototypes(path: str, table: EmbeddingTable) -> CategoryPrototypes:
    """Build prototypes from a YAML mapping of category id -> seed terms.

    Each prototype is the L2-normalized mean of its seed-term embeddings
    (seeds embedded via embed_term, so multi-word seeds work). Every
    category needs at least one seed with vocabulary coverage.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: prototype config must be a mapping")

    seeds: dict[str, tuple[str, ...]] = {}
    rows: dict[int, np.ndarray] = {}
    for key, value in raw.items():
        try:
            cat = resolve_category(str(key))
        except UnknownLabel as exc:
            raise SchemaError(f"{path}: {exc}") from exc
        if cat.canonical_id in seeds:
            raise SchemaError(f"{path}: duplicate prototype for {cat.canonical_id!r}")
        if not isinstance(value, list) or not value or \
                not all(isinstance(s, str) and s.strip() for s in value):
            raise SchemaError(
                f"{path}: {cat.canonical_id!r} must map to a non-empty list of terms")
        terms = tuple(s.strip().lower() for s in value)
        vecs = [v for v in (embed_term(t, table) for t in terms) if v.any()]
        if not vecs:
            raise SchemaError(
                f"{path}: no seed term of {cat.canonical_id!r} is in the embedding vocabulary")
        proto = _normalize(np.mean(np.asarray(vecs), axis=0))
        if not proto.any():
            raise SchemaError(
                f"{path}: seed terms of {cat.canonical_id!r} cancel to the zero vector")
        seeds[cat.canonical_id] = terms
        rows[cat.index] = proto
    missing = [c.canonical_id for c in CATEGORIES if c.canonical_id not in seeds]
    if missing:
        raise SchemaError(f"{path}: missing prototypes for {missing}")
    matrix = np.stack([rows[i] for i in range(len(CATEGORIES))])
    return CategoryPrototypes(matrix=matrix, seeds=seeds)


def assign_category(vec: np.ndarray, prototypes: CategoryPrototypes,
                    tau: float) -> tuple[Category | None, float]:
    """Nearest prototype by cosine; below-threshold stays unassigned.

    Returns (category-or-None, best cosine). Argmax ties resolve to the
    lowest canonical index.
    """
    if not vec.any():
        return None, 0.0
    sims = [cosine(vec, prototypes.matrix[i]) for i in range(len(CATEGORIES))]
    best = 0
    for i in range(1, len(sims)):
        if sims[i] > sims[best]:
            best = i
    if sims[best] >= tau:
        return CATEGORIES[best], sims[best]
    return None, sims[best]


def extract_keywords(text: str, table: EmbeddingTable, stopwords: frozenset[str],
                     prototypes: CategoryPrototypes, *, k: int = 10,
                     ngram_max: int = 2, lam: float = 0.5,
                     tau: float = 0.15) -> list[Keyword]:
    """Full text pipeline: candidates -> rank -> assign."""
    candidates = extract_candidates(text, stopwords, ngram_max)
    doc = embed_doc(filtered_tokens(text, stopwords), table)
    ranked = rank_keywords(candidates, table, doc, k, lam)
    for kw in ranked:
        kw.assigned, kw.similarity = assign_category(kw.vector, prototypes, tau)
    return ranked


@dataclass
class NlpTitle:
    """Outcome of the text-side vote."""

    category: Category | None
    confidence: float
    scores: dict[str, float]  # per-category summed relevance


def nlp_title(keywords: list[Keyword]) -> NlpTitle:
    """Vote: per-category sum of relevance over assigned keywords.

    Winner is the highest score; ties go to the larger summed
    similarity, then the lowest canonical index. Confidence is the
    winner's share of the total positive score, clamped to [0, 1].
    """
    scores = [0.0] * len(CATEGORIES)
    sims = [0.0] * len(CATEGORIES)
    any_assigned = False
    for kw in keywords:
        if kw.assigned is None:
            continue
        any_assigned = True
        scores[kw.assigned.index] += kw.relevance
        sims[kw.assigned.index] += kw.similarity
    score_map = {c.canonical_id: scores[c.index] for c in CATEGORIES}
    if not any_assigned:
        return NlpTitle(category=None, confidence=0.0, scores=score_map)
    best = 0
    for i in range(1, len(CATEGORIES)):
        if (scores[i], sims[i]) > (scores[best], sims[best]):
            best = i
    total = sum(s for s in scores if s > 0)
    conf = scores[best] / total if total > 0 else 0.0
    conf = min(max(conf, 0.0), 1.0)
    return NlpTitle(category=CATEGORIES[best], confidence=conf, scores=score_map)
