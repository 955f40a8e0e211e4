"""Sign function and signed powers ``t^[a] = eps(t) |t|^a``.

Scalar versions are exact on the identities the rest of the package leans
on (``spow(t, 1) == t``, ``spow(+-1, a) == +-1``); the ``*_array`` variants
are vectorized and used inside compiled expressions.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = ["eps", "spow", "spow_derivative", "eps_array", "spow_array"]


def eps(t: float) -> int:
    """Sign of ``t`` with ``eps(0) == 0``."""
    if t > 0:
        return 1
    if t < 0:
        return -1
    if t == 0:
        return 0
    raise DomainError("eps of NaN")


def spow(t: float, alpha: float) -> float:
    """Signed power ``eps(t) * |t| ** alpha``.

    Raises DomainError for ``alpha == 0`` (use :func:`eps`) and for
    ``t == 0`` with a non-positive exponent.
    """
    if alpha == 0:
        raise DomainError("spow with alpha == 0 is eps(t); call eps directly")
    if t == 0:
        if alpha < 0:
            raise DomainError(f"spow(0, {alpha}) diverges")
        return 0.0
    if alpha == 1:
        return float(t)
    a = abs(t)
    if a == 1:
        return math.copysign(1.0, t)
    return math.copysign(a**alpha, t)


def spow_derivative(t: float, alpha: float) -> float:
    """d/dt spow(t, alpha) = alpha |t|^(alpha-1)."""
    if alpha == 0:
        raise DomainError("spow with alpha == 0 is not differentiable here")
    if t == 0:
        if alpha > 1:
            return 0.0
        raise DomainError(f"spow(., {alpha}) is not differentiable at 0")
    if alpha == 1:
        return 1.0
    return alpha * abs(t) ** (alpha - 1)


def eps_array(t):
    return np.sign(t)


def spow_array(t, alpha: float):
    """Vectorized signed power; ``0 ** negative`` comes out as inf and is
    left to the caller to reject."""
    t = np.asarray(t, dtype=float)
    if alpha == 1:
        return t
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sign(t) * np.abs(t) ** alpha
