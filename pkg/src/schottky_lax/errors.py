"""Exception hierarchy shared by all modules."""


class SchottkyLaxError(Exception):
    """Base class for every error raised by this package."""


class PoleAtZ(SchottkyLaxError):
    pass


class ParabolicOrIdentity(SchottkyLaxError):
    pass


class NotLoxodromic(SchottkyLaxError):
    pass


class CapacityExceeded(SchottkyLaxError):
    pass


class SingularGroupElement(SchottkyLaxError):
    pass


class DerivativeUnavailable(SchottkyLaxError):
    pass


class ConvergenceCriterionViolated(SchottkyLaxError):
    """The contraction factor of the phase point is not below 1."""


class TailNotMet(SchottkyLaxError):
    """Word capacity ran out before the requested tail estimate was reached."""


class NearPole(SchottkyLaxError):
    pass


class QuadratureNotConverged(SchottkyLaxError):
    pass


class LeavesFundamentalDomain(SchottkyLaxError):
    pass


class PoleCollision(SchottkyLaxError):
    pass


class ConfigParseError(SchottkyLaxError):
    pass


class IndexOutOfRange(SchottkyLaxError, IndexError):
    pass


NotConverged = QuadratureNotConverged
