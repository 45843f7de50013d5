"""Exception types shared across the package."""


class CtxAttrError(Exception):
    """Base class for all package errors."""


class EmptyText(CtxAttrError):
    """Input text is empty or whitespace-only."""


class OutOfBounds(CtxAttrError):
    """A character or token range falls outside the target text."""


class DimensionMismatch(CtxAttrError):
    """An ablation vector's length does not match the partition's source count."""


class BadTemplate(CtxAttrError):
    """A prompt template is missing (or repeats) a required placeholder."""


class ProviderUnavailable(CtxAttrError):
    """The scoring provider could not be reached or returned a server error."""


class ContextTooLong(CtxAttrError):
    """The provider reported a token-limit overflow for the rendered prompt."""


class TokenizationMismatch(CtxAttrError):
    """The provider could not force (or echo back) the exact requested tokens."""


class AbortedAfterRetries(CtxAttrError):
    """Dataset collection gave up on one ablation after exhausting retries."""

    def __init__(self, vector_index: int, cause: Exception):
        super().__init__(f"ablation {vector_index} failed after retries: {cause}")
        self.vector_index = vector_index
        self.cause = cause


class NonFinite(CtxAttrError):
    """A numeric input was NaN or infinite where a finite value is required."""


class DegenerateRanks(CtxAttrError):
    """Rank correlation is undefined because one input vector is constant."""


class UndefinedWeight(CtxAttrError):
    """The similarity-kernel weight is undefined for all-zero or all-one vectors."""


class EmptySelection(CtxAttrError):
    """An operation requires at least one selected source (k >= 1)."""
