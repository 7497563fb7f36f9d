"""Exception hierarchy shared by all modules."""


class SeaImpedanceError(Exception):
    """Base class for every error raised by the package."""


class ImproperSystem(SeaImpedanceError):
    """A transfer function with deg(num) > deg(den) was asked for a realization."""


class AlgebraicLoop(SeaImpedanceError):
    """The feedthrough loop of an interconnection is singular."""


class UnwiredInput(SeaImpedanceError):
    """A subsystem input is not driven by any signal."""


class UnwiredOutput(SeaImpedanceError):
    """A referenced output signal does not exist."""


class DimensionMismatch(SeaImpedanceError):
    pass


class NotHurwitz(SeaImpedanceError):
    pass


class InfiniteH2Norm(SeaImpedanceError):
    pass


class SingularResolvent(SeaImpedanceError):
    """jw coincides (numerically) with an eigenvalue of A."""


class Infeasible(SeaImpedanceError):
    def __init__(self, message, bounds=None):
        super().__init__(message)
        self.bounds = bounds


class RecoveryFailure(SeaImpedanceError):
    """Controller matrices could not be recovered from the LMI solution."""


class VerificationFailure(SeaImpedanceError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnstableClosedLoop(SeaImpedanceError):
    pass


class StepTooLarge(SeaImpedanceError):
    pass


class GridTooSparse(SeaImpedanceError):
    pass


class ConfigError(SeaImpedanceError):
    """Invalid experiment configuration or controller file."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
