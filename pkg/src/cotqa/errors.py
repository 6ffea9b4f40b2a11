"""Exception types raised across the toolkit.

Kept in one place so the CLI can map every toolkit failure to exit code 2
without enumerating modules.
"""


class CotqaError(Exception):
    """Base class for all toolkit errors."""


# --- ingest: OK-VQA ---------------------------------------------------------
class EmptyAnswerList(CotqaError):
    pass


class QuestionAnnotationMismatch(CotqaError):
    pass


class MalformedRecord(CotqaError):
    pass


# --- ingest: A-OKVQA --------------------------------------------------------
class ChoiceIndexOutOfRange(CotqaError):
    pass


class EmptyChoices(CotqaError):
    pass


# --- ingest: ChartQA --------------------------------------------------------
class MalformedTable(CotqaError):
    pass


class NoUsableTemplate(CotqaError):
    pass


# --- prompting --------------------------------------------------------------
class TooManyChoices(CotqaError):
    pass


# --- extraction -------------------------------------------------------------
class NoLetterFound(CotqaError):
    pass


class EmptyExtraction(CotqaError):
    pass


class NoNumberFound(CotqaError):
    pass


# --- metrics ----------------------------------------------------------------
class DimensionMismatch(CotqaError):
    pass


class ZeroVector(CotqaError):
    pass


class EmptyReport(CotqaError):
    pass


# --- fusion kernel ----------------------------------------------------------
class ShapeMismatch(CotqaError):
    pass


class TapeMismatch(CotqaError):
    pass


# --- training utilities -----------------------------------------------------
class StepOutOfRange(CotqaError):
    pass


class NonMonotonicStep(CotqaError):
    pass
