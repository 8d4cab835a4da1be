"""Exception hierarchy shared by every qudcomp module."""


class QudcompError(Exception):
    """Base class for all errors raised by qudcomp."""


class DimensionError(QudcompError, ValueError):
    """A dimension is invalid or two dimensions disagree."""


class NotUnitaryError(QudcompError, ValueError):
    """A matrix that must be unitary is not (within tolerance)."""


class NumericalError(QudcompError, ArithmeticError):
    """A numerical contract (residual, norm, convergence) was violated."""


class BranchCutError(NumericalError):
    """An eigenphase sits on the branch cut of the principal logarithm."""


class LinearityError(QudcompError):
    """A qudit handle was reused after being consumed (no-cloning violation)."""


class MeasuredQuditError(QudcompError):
    """An operation targeted a qudit that has already been measured."""


class SizeGuardError(QudcompError, ValueError):
    """A requested object would exceed a configured size limit."""


class SKConvergenceError(NumericalError):
    """Solovay-Kitaev refinement could not proceed from the current approximation.

    Attributes:
        trace: distances of the successive approximations computed so far.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)


class SchemaError(QudcompError, ValueError):
    """Serialized input does not match the expected JSON schema."""
