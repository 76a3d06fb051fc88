"""Onion-service activity titling toolkit."""

__version__ = "0.1.0"

from .taxonomy import CATEGORIES, CATEGORY_IDS, Category, CategoryScores, resolve_category

__all__ = [
    "__version__",
    "CATEGORIES",
    "CATEGORY_IDS",
    "Category",
    "CategoryScores",
    "resolve_category",
]
