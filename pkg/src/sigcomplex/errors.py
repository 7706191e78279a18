"""Exception hierarchy shared by all modules."""


class SigComplexError(Exception):
    """Base class for every error raised by this package."""


# -- signal io -------------------------------------------------------------

class SignatureFormatError(SigComplexError, ValueError):
    """A signature file could not be parsed. ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(SignatureFormatError):
    pass


class NonMonotonicTime(SignatureFormatError):
    pass


class SampleCountMismatch(SignatureFormatError):
    pass


class ValueOutOfRange(SignatureFormatError):
    pass


class ManifestError(SigComplexError):
    pass


class MissingManifestFile(ManifestError, FileNotFoundError):
    pass


class DanglingReference(ManifestError):
    pass


class DuplicateUserId(ManifestError):
    pass


# -- preprocessing / features ----------------------------------------------

class TooFewSamples(SigComplexError, ValueError):
    pass


class SignatureTooShort(SigComplexError, ValueError):
    pass


class IndexOutOfRange(SigComplexError, ValueError):
    pass


class EmptySubset(IndexOutOfRange):
    pass


# -- lognormal -------------------------------------------------------------

class ProfileTooShort(SigComplexError, ValueError):
    pass


class EmptyStrokeList(SigComplexError, ValueError):
    pass


# -- complexity / matching -------------------------------------------------

class EmptyEnrollment(SigComplexError, ValueError):
    pass


class ChannelMismatch(SigComplexError, ValueError):
    pass


class EmptySequence(SigComplexError, ValueError):
    pass


class SubsetMismatch(ChannelMismatch):
    pass


class ProfileMismatch(SigComplexError, ValueError):
    pass


class TemplateFormatError(SigComplexError, ValueError):
    pass


# -- selection / evaluation ------------------------------------------------

class EvaluatorFailure(SigComplexError):
    def __init__(self, subset, cause):
        self.subset = tuple(subset)
        self.cause = cause
        super().__init__(f"evaluator failed on subset {list(self.subset)}: {cause!r}")


class EmptyScoreList(SigComplexError, ValueError):
    pass


class InsufficientEnrollment(SigComplexError):
    pass


class EmptyEvaluationSplit(SigComplexError):
    pass


class MissingLevel(SigComplexError, KeyError):
    pass
