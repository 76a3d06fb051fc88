"""The closed five-way category taxonomy and score carriers.

Canonical order is fixed and used everywhere an index is needed: model
output vectors, keyword vote tallies, confusion matrix axes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownLabel


@dataclass(frozen=True)
class Category:
    canonical_id: str
    display_name: str
    aliases: tuple[str, ...]
    index: int

    def __str__(self) -> str:
        return self.canonical_id


CATEGORIES: tuple[Category, ...] = (
    Category("drugs", "Drugs", ("drug", "drugs market", "drug market"), 0),
    Category("weapons", "Weapons", ("weapon", "weapons market", "firearms"), 1),
    Category("bank_cards", "Bank Cards", ("bank card", "bank cards", "bank-cards", "stolen bank cards", "cards"), 2),
    Category(
        "identity_documents",
        "Identity Documents",
        ("passport", "passports", "identity document", "fake ids", "fake id", "id documents", "ids"),
        3,
    ),
    Category(
        "illegal_currencies",
        "Illegal Currencies",
        ("illegal currency", "illegal currencies", "counterfeit currency", "counterfeit currencies", "currencies"),
        4,
    ),
)

CATEGORY_IDS: tuple[str, ...] = tuple(c.canonical_id for c in CATEGORIES)

_LOOKUP: dict[str, Category] = {}
for _cat in CATEGORIES:
    _LOOKUP[_cat.canonical_id.lower()] = _cat
    _LOOKUP[_cat.display_name.lower()] = _cat
    for _alias in _cat.aliases:
        _LOOKUP[_alias.lower()] = _cat


def resolve_category(label: str) -> Category:
    """Map any known spelling of a category to its canonical Category.

    Matching is case-insensitive over canonical ids, display names and
    aliases. Raises UnknownLabel for anything else.
    """
    cat = _LOOKUP.get(str(label).strip().lower())
    if cat is None:
        raise UnknownLabel(f"unknown category label: {label!r}")
    return cat


def category_by_index(i: int) -> Category:
    return CATEGORIES[i]


@dataclass
class CategoryScores:
    """Five non-negative reals in canonical category order."""

    scores: tuple[float, float, float, float, float]
    normalized: bool = False

    def __post_init__(self):
        if len(self.scores) != len(CATEGORIES):
            raise ValueError(f"expected {len(CATEGORIES)} scores, got {len(self.scores)}")
        self.scores = tuple(float(s) for s in self.scores)
        if any(s < 0 for s in self.scores):
            raise ValueError("scores must be non-negative")
        if self.normalized and abs(sum(self.scores) - 1.0) > 1e-6:
            raise ValueError(f"normalized scores must sum to 1, got {sum(self.scores)}")

    def argmax(self) -> Category:
        # ties resolve to the lowest canonical index
        best = 0
        for i in range(1, len(self.scores)):
            if self.scores[i] > self.scores[best]:
                best = i
        return CATEGORIES[best]

    def top_value(self) -> float:
        return max(self.scores)

    def as_dict(self) -> dict[str, float]:
        return {c.canonical_id: s for c, s in zip(CATEGORIES, self.scores)}
