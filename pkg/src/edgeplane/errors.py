"""Exception types shared across the package.

Grouped by subsystem so callers can catch a family (CodecError,
RetrievalError, ...) or a precise condition (EmptyCodebook, OversizeText).
"""


class EdgeplaneError(Exception):
    """Base class for all package errors."""


# -- codec ------------------------------------------------------------------

class CodecError(EdgeplaneError):
    pass


class NonFiniteInput(CodecError):
    pass


class ShapeMismatch(CodecError):
    pass


class DimensionMismatch(CodecError):
    pass


class EmptyCodebook(CodecError):
    pass


class IndexOutOfRange(CodecError):
    pass


class EmptyPool(CodecError):
    pass


class InsufficientUsage(CodecError):
    pass


class NonFiniteResult(CodecError):
    pass


class OversizeSketch(CodecError):
    pass


# -- retrieval --------------------------------------------------------------

class RetrievalError(EdgeplaneError):
    pass


class DuplicateDocId(RetrievalError):
    pass


class OversizeText(RetrievalError):
    pass


class InvalidEmbedding(RetrievalError):
    pass


class EmptyIndex(RetrievalError):
    pass


class InvalidK(RetrievalError):
    pass


# -- decision ---------------------------------------------------------------

class DecisionError(EdgeplaneError):
    pass


class NotADistribution(DecisionError):
    pass


class DegenerateLabels(DecisionError):
    pass


class EmptyGrid(DecisionError):
    pass


class EmptySamples(DecisionError):
    pass


class InsufficientData(DecisionError):
    pass


# -- secure -----------------------------------------------------------------

class SecureError(EdgeplaneError):
    pass


class ChecksumMismatch(SecureError):
    pass


# -- runtime ----------------------------------------------------------------

class RuntimePathError(EdgeplaneError):
    pass


class TokenCapExceeded(RuntimePathError):
    pass


class RedactionNotApplied(RuntimePathError):
    pass


class LinkDown(RuntimePathError):
    pass


# -- sim / config -----------------------------------------------------------

class ConfigError(EdgeplaneError):
    pass


class InvalidSpec(EdgeplaneError):
    pass


class TraceCorrupt(EdgeplaneError):
    pass
