"""Exception types shared across the pipeline."""


class CalcioError(Exception):
    """Base class for all library errors."""


# --- ingest ---------------------------------------------------------------


class MalformedRecord(CalcioError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownMatchId(CalcioError):
    pass


class DuplicateEventKey(CalcioError):
    pass


class MissingLineup(CalcioError):
    pass


# --- panel / features -----------------------------------------------------


class NoLineup(CalcioError):
    pass


class EmptyMatch(CalcioError):
    pass


class InvalidFormation(CalcioError):
    pass


class MissingCardedRole(CalcioError):
    pass


class MissingStandings(CalcioError):
    pass


# --- estimation -----------------------------------------------------------


class InvalidDesign(CalcioError):
    pass


class RankDeficient(CalcioError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {self.columns}")


class Separation(CalcioError):
    pass


class NonConvergence(CalcioError):
    pass


class LeverageOne(CalcioError):
    pass


class TooManyFailures(CalcioError):
    pass


class LabelMismatch(CalcioError):
    pass


# --- diagnostics ----------------------------------------------------------


class TooFewObservations(CalcioError):
    pass


class SampleSizeOutOfRange(CalcioError):
    pass


class DegenerateVariance(CalcioError):
    pass


class CollinearAugmentation(CalcioError):
    pass


class EmptyGroup(CalcioError):
    pass


class DegenerateCategories(CalcioError):
    pass


class NullFitFailure(CalcioError):
    pass


# --- inference / search ---------------------------------------------------


class DegenerateDf(CalcioError):
    pass


class AllReplicatesEqual(CalcioError):
    pass


class BudgetExceeded(CalcioError):
    pass


# --- synth ----------------------------------------------------------------


class InvalidConfig(CalcioError):
    pass
