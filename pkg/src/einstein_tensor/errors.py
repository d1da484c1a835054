"""Exception hierarchy shared by all modules."""


class TensorError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(TensorError, ValueError):
    pass


class InvalidOrder(TensorError, ValueError):
    pass


class OddOrder(InvalidOrder):
    """Raised where only even-order tensors make sense (transpose, inverse, ...)."""


class WrongOrder(InvalidOrder):
    pass


class UnsupportedOrder(InvalidOrder):
    pass


class NonSquare(TensorError, ValueError):
    pass


class IndexOutOfRange(TensorError, IndexError):
    pass


class SingularTensor(TensorError, ArithmeticError):
    pass


class SingularNormal(SingularTensor):
    """The Gram operator of a least-squares problem is numerically singular."""


class NotSymmetric(TensorError, ValueError):
    pass


class RankOneViolation(TensorError, ValueError):
    """Some singular/eigen matrices are not rank-one, so no CP form exists.

    ``offending`` lists the flattened term indices ``r`` that failed.
    """

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


class SeparabilityViolation(TensorError, ValueError):
    pass


class ZeroDiagonal(TensorError, ArithmeticError):
    pass


class Diverged(TensorError, ArithmeticError):
    """Jacobi residual blew up; the partial report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvalidSize(TensorError, ValueError):
    pass


class InvalidSpec(TensorError, ValueError):
    pass


class UnsupportedLayout(TensorError, ValueError):
    pass
