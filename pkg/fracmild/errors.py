"""
Exceptions raised by fracmild.

Everything derives from FracMildError so callers can catch the whole family,
while the builtin base classes keep the usual ``except ValueError`` style working.
"""


class FracMildError(Exception):
    ...


class ParameterError(FracMildError, ValueError):
    ...


class PoleError(ParameterError):
    ...


class DomainError(ParameterError):
    ...


class GridError(ParameterError):
    ...


class DimensionError(ParameterError):
    ...


class HorizonMismatchError(ParameterError):
    ...


class ProblemFileError(ParameterError):
    ...


class GammaOverflowError(FracMildError, OverflowError):
    ...


class AccuracyLossError(FracMildError, ArithmeticError):
    ...


class DelayCausalityError(FracMildError):
    ...


class NonConvergenceError(FracMildError, RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        iterations: int,
        last_ratio: float,
        inconsistent: bool = False,
    ):
        super().__init__(message)
        self.iterations = iterations
        self.last_ratio = last_ratio
        self.inconsistent = inconsistent


class InnerIterationError(NonConvergenceError):
    ...
