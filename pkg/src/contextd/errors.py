"""Typed errors shared across the engine."""


class ContextdError(Exception):
    """Base class for all engine errors."""


class UnknownPathError(ContextdError):
    pass


class UnknownNodeError(ContextdError):
    pass


class DuplicateNodeError(ContextdError):
    pass


class PlaceholderEditError(ContextdError):
    pass


class InvalidBoundsError(ContextdError):
    pass


class DanglingChainError(ContextdError):
    pass


class JournalError(ContextdError):
    pass


class DecisionParseError(ContextdError):
    pass


class ExtractionError(ContextdError):
    pass


class ReviewStateError(ContextdError):
    pass


class SuggestionStateError(ContextdError):
    pass


class BackendError(ContextdError):
    pass


class MockScriptError(BackendError):
    pass


class StoreError(ContextdError):
    pass


class LoadError(StoreError):
    pass


class ReplayError(ContextdError):
    pass
