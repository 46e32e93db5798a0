"""
Error hierarchy for the social dynamics package.

Likelihood routines report impossible events through return values
(see ``core.statistics.LogDensity``); the exceptions below are reserved for
invalid input and for failures that leave no usable result.
"""

from typing import Any, Dict, Optional


class SocialDynamicsError(Exception):
    """Base class for all package errors."""


class InvalidRateError(SocialDynamicsError, ValueError):
    """A sampling distribution received a non-positive rate or horizon."""


class InvalidModelError(SocialDynamicsError, ValueError):
    """Malformed model definition, effect specification or state."""


class EvidenceError(SocialDynamicsError, ValueError):
    """Evidence items are out of range or contradict each other."""


class StateSpaceTooLargeError(SocialDynamicsError):
    """The joint state space exceeds the exact-oracle cap."""


class DegenerateSampleSetError(SocialDynamicsError):
    """Every sample in a weighted set has weight zero (log weight -inf)."""


class EstimationError(SocialDynamicsError):
    """
    Parameter estimation could not produce a result.

    Args:
        message: Human-readable description
        diagnostics: Iteration trace and sampler diagnostics collected so far
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataFormatError(SocialDynamicsError, ValueError):
    """
    A data or model file could not be parsed.

    Args:
        message: What went wrong
        path: File being read
        line: 1-based line number, when known
        field: Offending field name, when known
    """

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        full = f"{message} ({', '.join(location)})" if location else message
        super().__init__(full)
        self.path = path
        self.line = line
        self.field = field


class UsageError(SocialDynamicsError):
    """The command line request is inconsistent with the supplied data."""
