"""Exception hierarchy shared by every module."""

from __future__ import annotations


class HybridSearchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HybridSearchError, ValueError):
    """A document or configuration value failed validation."""


class EmptyId(ValidationError):
    pass


class BadFieldValue(ValidationError):
    pass


class DuplicateDocId(HybridSearchError):
    pass


class UnknownDoc(HybridSearchError, KeyError):
    pass


class DimMismatch(HybridSearchError, ValueError):
    pass


class ZeroVector(HybridSearchError, ValueError):
    pass


class ProviderUnavailable(HybridSearchError):
    """Network, HTTP or timeout failure talking to a remote provider."""


class MalformedResponse(HybridSearchError):
    """A remote provider answered with a payload we cannot interpret."""


class MalformedJson(HybridSearchError, ValueError):
    pass


class UnknownOperator(HybridSearchError, ValueError):
    pass


class NonNumericComparison(HybridSearchError, ValueError):
    pass


class InvalidQuery(HybridSearchError, ValueError):
    """A structured query violates its construction invariants."""


class NotReady(HybridSearchError):
    pass


class UnknownMode(HybridSearchError, ValueError):
    pass


class UnknownDocInCases(HybridSearchError):
    pass


class FormatVersionError(HybridSearchError):
    """An on-disk artifact has a missing or unsupported format version."""
