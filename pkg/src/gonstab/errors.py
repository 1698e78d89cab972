"""Exception types raised by gonstab."""


class GonstabError(Exception):
    pass


class DomainError(GonstabError, ValueError):
    """An argument lies outside the domain of the operation."""


class CollisionError(GonstabError, ValueError):
    pass


class VerificationFailure(GonstabError):
    """A numerical identity failed its tolerance.

    ``residual`` and ``block`` identify the worst offender.
    """

    def __init__(self, message, residual=None, block=None):
        super().__init__(message)
        self.residual = residual
        self.block = block


class IntegrationFailure(GonstabError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class ConvergenceFailure(GonstabError):
    pass


class PropertyViolation(GonstabError):
    def __init__(self, message, counterexample=None):
        super().__init__(message)
        self.counterexample = counterexample


class GoldenMismatch(GonstabError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation
