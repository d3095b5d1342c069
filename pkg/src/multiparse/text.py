"""Comparison normalization shared by the splitter, tree memoization and scoring."""

from __future__ import annotations

import string

COMPARISON_PUNCTUATION = frozenset(string.punctuation)


def normalize_for_comparison(text: str, punctuation=COMPARISON_PUNCTUATION) -> str:
    """Lowercase, drop punctuation characters and collapse whitespace.

    >>> normalize_for_comparison("  Book me a Flight, ")
    'book me a flight'
    """
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if ch not in punctuation)
    return " ".join(stripped.split())
