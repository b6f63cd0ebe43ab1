"""Exception hierarchy. CLI exit codes hang off these classes."""


class AnnulusActionError(Exception):
    exit_code = 1


class ParseError(AnnulusActionError):
    exit_code = 2

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)


class ValidationError(ParseError):
    pass


class AreaPreservationError(ValidationError):
    pass


class NotRigidNearBoundary(AnnulusActionError):
    exit_code = 3


class NonConvergence(AnnulusActionError):
    exit_code = 4


class IntegratorFailure(NonConvergence):
    pass


class ChartViolation(AnnulusActionError):
    exit_code = 4


class AmbiguousLift(AnnulusActionError):
    exit_code = 4
