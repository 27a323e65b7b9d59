"""Exception hierarchy shared by the solvers, experiments and the CLI."""


class LabError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(LabError):
    exit_code = 2

    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}" if key else reason)


class PreconditionError(LabError, ValueError):
    exit_code = 3


class UsageError(PreconditionError):
    """Wrong field side, wrong grid kind and similar caller mistakes."""


class ResolutionError(PreconditionError):
    """A grid cannot represent what was asked of it."""


class CapacityError(PreconditionError):
    """A requested computation does not fit a desk-scale grid."""


class NumericalGuardError(LabError, RuntimeError):
    exit_code = 4


class AcceptanceFailure(LabError):
    exit_code = 5
