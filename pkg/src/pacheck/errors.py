"""Exception hierarchy shared by every pacheck module."""


class PacheckError(Exception):
    """Base class for all errors raised by pacheck."""


class ParameterError(PacheckError, ValueError):
    """An argument is outside its documented domain."""


class UndefinedEstimateError(PacheckError, ValueError):
    """An estimate or interval was requested from an empty tally (n = 0)."""


class CountOverflowError(PacheckError, OverflowError):
    """A trial count does not fit the representable count range."""


class InsufficientDataError(PacheckError, ValueError):
    """A diagnostic was given too few observations to be defined."""


class CannotVerifyError(PacheckError, ValueError):
    """Patch verification is impossible because the bug was never observed."""


class CheckpointError(PacheckError):
    """A snapshot is corrupted, from another version, or from another configuration."""


class TraceParseError(PacheckError, ValueError):
    """A trace file line could not be parsed."""

    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TrialInfrastructureError(PacheckError, RuntimeError):
    """A trial failed for reasons outside the property semantics.

    ``trial_index`` identifies the failing trial. ``partial`` holds the
    outcomes of the trials of the failing batch that completed before it,
    and ``ledger`` is attached by the engine once those have been committed.
    """

    def __init__(self, message, trial_index, partial=None):
        super().__init__(f"trial {trial_index}: {message}")
        self.trial_index = trial_index
        self.partial = partial or {}
        self.ledger = None


class InsufficientTrialsError(TrialInfrastructureError):
    """A finite source ran out of trials before the requested count."""

    @property
    def tallies(self):
        return None if self.ledger is None else self.ledger.tallies
