"""Exception hierarchy.

Every error carries a human-readable message naming the violated contract;
errors raised on hypothesis checks also carry a ``witness`` mapping.
"""


class SobocompError(Exception):
    exit_code = 2

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = dict(witness or {})


class ConfigError(SobocompError, ValueError):
    """Malformed configuration, empty grids, unreadable inputs."""

    exit_code = 3


class PreconditionError(SobocompError, ValueError):
    """An operation was called outside its documented domain."""

    exit_code = 1


class UnsupportedConfiguration(PreconditionError):
    pass


class ZeroMeasureError(PreconditionError):
    pass


class SingularWeightError(PreconditionError):
    pass


class InvalidWeightError(PreconditionError):
    pass


class QuasimetricAxiomError(PreconditionError):
    pass


class PSDError(PreconditionError):
    pass


class StencilError(PreconditionError):
    pass


class SupportError(PreconditionError):
    pass


class CoverageError(PreconditionError):
    pass


class GeometryError(PreconditionError):
    pass


class ExponentRangeError(PreconditionError):
    """Exponent outside the range where a formula is stated."""


class AssemblyError(PreconditionError):
    pass


class HypothesisViolation(SobocompError):
    """A theorem hypothesis failed numerical verification."""

    exit_code = 1


class CertificateError(HypothesisViolation):
    """A family is not bounded by its declared certificate."""


class InvariantFailure(SobocompError):
    """A post-condition that should hold by construction did not."""

    exit_code = 2
