"""Shared exception types.

Every error raised by the library derives from RankplanError so the CLI can
catch one base class and exit with a diagnostic.
"""

from __future__ import annotations


class RankplanError(Exception):
    """Base class for all library errors."""


class LayoutMismatch(RankplanError):
    """A feature vector or model was used with an incompatible feature layout."""
