"""Exception hierarchy shared by all pfmodel modules.

Every error raised by the library derives from :class:`PFModelError`, so
callers (notably the CLI) can distinguish "bad input" from genuine bugs.
"""

from __future__ import annotations


class PFModelError(Exception):
    """Base class for all pfmodel errors."""


# --- taxonomy structure ------------------------------------------------------

class MultipleRootsError(PFModelError):
    """More than one category has no parent."""


class CycleDetectedError(PFModelError):
    """The covering relation contains a cycle (or a self-loop)."""


class DuplicateEdgeError(PFModelError):
    """The same (child, parent) covering edge was given twice."""


class UnknownCategoryError(PFModelError, KeyError):
    """A category name does not exist in the taxonomy."""


class UnreachableCategoryError(PFModelError):
    """A category cannot be reached from the root via covering edges."""


class UnknownInstanceError(PFModelError, KeyError):
    """An instance id does not exist in the labeling."""


# --- probabilistic data ------------------------------------------------------

class OutOfRangeProbabilityError(PFModelError, ValueError):
    """A probability is outside [0, 1] or a row/total normalization fails."""


class MissingEdgeProbabilityError(PFModelError):
    """A probabilistic query touched a covering edge that carries no f value."""


class MissingGammaError(PFModelError, KeyError):
    """No normalized confusion matrix is resolvable for a classifier."""


class RootProfileForbiddenError(PFModelError):
    """A confusion profile was supplied for the root, whose behavior is fixed."""


# --- analysis ----------------------------------------------------------------

class DegenerateBoundError(PFModelError):
    """The precision-constraint bound is undefined (no accumulated
    false-positive leakage, e.g. all f = 1 so far)."""


class InfeasibleTargetError(PFModelError, ValueError):
    """An imbalance sweep target cannot be realized on the given pipeline."""


# --- parsing -----------------------------------------------------------------

class ParseError(PFModelError, ValueError):
    """An input file is malformed.  Carries a human-readable location."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)
