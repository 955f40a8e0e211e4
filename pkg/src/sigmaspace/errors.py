"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class SigmaSpaceError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SigmaSpaceError, ValueError):
    """A function was evaluated outside its domain (log of a negative, 0**-a, ...)."""


class ExprError(SigmaSpaceError):
    pass


class ParseError(ExprError, ValueError):
    """Syntax error in expression text.

    ``offset`` is a byte offset into the UTF-8 encoded source.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownVariable(ParseError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown variable {name!r}", offset)


class UnknownFunction(ParseError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown function {name!r}", offset)


class ArityError(ParseError):
    def __init__(self, name: str, got: int, want: int, offset: int):
        self.name = name
        super().__init__(f"{name}() takes {want} argument(s), got {got}", offset)


class MissingBinding(ExprError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"no value bound for variable {self.name!r}"


# metric
class NoBracket(SigmaSpaceError):
    pass


class NotOnSigma(SigmaSpaceError):
    pass


class RankError(SigmaSpaceError):
    pass


class NearSingular(SigmaSpaceError):
    pass


class ZeroGradient(SigmaSpaceError):
    pass


# quadrature and probing
class PositivityError(SigmaSpaceError, ValueError):
    pass


class QuadratureError(SigmaSpaceError):
    pass


class EvaluationError(SigmaSpaceError):
    pass


# flows and geodesics
class DomainExit(SigmaSpaceError):
    def __init__(self, t: float, point):
        self.t = float(t)
        self.point = np.asarray(point, dtype=float)
        super().__init__(f"trajectory left the domain at t={self.t:.6g}, x={self.point.tolist()}")


class StepFailure(SigmaSpaceError):
    pass


class NotTransverse(SigmaSpaceError):
    def __init__(self, point, detail: str = ""):
        self.point = np.asarray(point, dtype=float)
        msg = f"field is tangent to the hypersurface at {self.point.tolist()}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class FoldDetected(SigmaSpaceError):
    pass


# normal coordinates
class SignError(SigmaSpaceError):
    pass


class NotSimpleEquation(SigmaSpaceError):
    pass


class NonPositivePsi(SigmaSpaceError):
    pass


class NotGeodesicField(SigmaSpaceError):
    pass


class NotRadical(NotGeodesicField):
    """The field is not in the kernel of the metric on the hypersurface."""


# catalog
class UnknownSpace(SigmaSpaceError, KeyError):
    def __str__(self) -> str:
        return f"unknown space {self.args[0]!r}"


class BadParams(SigmaSpaceError, ValueError):
    pass
