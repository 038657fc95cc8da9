"""Exception hierarchy shared by all modules."""


class FdhError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(FdhError, ValueError):
    """An argument violates a documented precondition."""


class NumericalError(FdhError, ArithmeticError):
    """A numerical evaluation broke down (e.g. evaluation at a pole)."""


class DesignError(FdhError):
    """A filter design problem is degenerate and has no unique solution."""


class ConvergenceError(DesignError):
    """An iterative designer ran out of iterations.

    The best iterate found so far is kept on ``best`` so callers can still
    inspect (or use) it.
    """

    def __init__(self, message, best=None, objective=None):
        super().__init__(message)
        self.best = best
        self.objective = objective
