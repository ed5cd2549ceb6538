"""Exception and warning classes raised by context_fuse."""


class ContextFuseError(ValueError):
    """Base class for all input and validation errors."""


class InvalidInput(ContextFuseError):
    pass


class DimensionMismatch(ContextFuseError):
    pass


class ContextValidationError(ContextFuseError):
    """A context model's mu or sigma is not well formed."""


class NotPositiveDefinite(ContextValidationError):
    pass


class AsymmetricSigma(ContextValidationError):
    pass


class BadDiagonal(ContextValidationError):
    pass


class NegativeFrequency(ContextValidationError):
    pass


class UnnormalizedMu(ContextValidationError):
    pass


class InvalidLatent(ContextFuseError):
    pass


class InfeasibleEta(ContextFuseError):
    pass


class EmptyCorpus(ContextFuseError):
    pass


class NoObjects(ContextFuseError):
    pass


class ParseError(ContextFuseError):
    pass


class UnknownSupercategory(ContextFuseError):
    pass


class SeriesTooShort(ContextFuseError):
    pass


class WrongCount(ContextFuseError):
    pass


class EvidenceUnseen(ContextFuseError):
    pass


class NoContexts(ContextFuseError):
    pass


class AllLikelihoodsZero(ContextFuseError):
    pass


class NotConvergedWarning(UserWarning):
    """The Geweke rule did not declare the chain converged."""
