"""Exception types raised across the package.

Every error derives from :class:`BellrankError` so callers (the CLI in
particular) can catch package failures without swallowing real bugs.
"""

from __future__ import annotations


class BellrankError(Exception):
    """Base class for all package errors."""


class SchemaViolation(BellrankError, ValueError):
    """Input file does not follow the documented CSV schema."""


class InvalidBehavior(BellrankError, ValueError):
    """A probability table violates normalization or sign constraints."""


class EmptyBlock(BellrankError, ValueError):
    def __init__(self, x: int, y: int):
        self.x, self.y = x, y
        super().__init__(f"setting pair (x={x}, y={y}) has no trials")


class MissingSettingWeights(BellrankError, ValueError):
    """Model has no setting-dependent hidden-variable weights."""


class SignallingInput(BellrankError, ValueError):
    """Behavior is signalling beyond tolerance; local decomposition is ill-posed."""


class IndexOutOfRange(BellrankError, IndexError):
    pass


class VisibilityOutOfRange(BellrankError, ValueError):
    pass


class DegenerateResamples(BellrankError, RuntimeError):
    pass


class NoEligibleParticipants(BellrankError, ValueError):
    pass


class ZeroVariance(BellrankError, ValueError):
    pass


class TooFewSamples(BellrankError, ValueError):
    pass


class ResponderFailure(BellrankError, RuntimeError):
    """A responder raised or returned an invalid outcome.

    ``partial_counts`` and ``partial_log`` hold everything tallied before
    the failing trial.
    """

    def __init__(self, role: str, trial: int, partial_counts=None, partial_log=None,
                 cause: BaseException | None = None):
        self.role = role
        self.trial = trial
        self.partial_counts = partial_counts
        self.partial_log = partial_log or []
        self.cause = cause
        msg = f"responder {role!r} failed on trial {trial}"
        if cause is not None:
            msg += f": {cause!r}"
        super().__init__(msg)


class ParamOutOfDomain(BellrankError, ValueError):
    pass


class RankOutOfSupport(BellrankError, ValueError):
    pass


class OptimizationFailed(BellrankError, RuntimeError):
    pass


class NonPositiveLevel(BellrankError, ValueError):
    pass


class TooFewLevels(BellrankError, ValueError):
    pass


class DegenerateSplit(BellrankError, ValueError):
    pass
