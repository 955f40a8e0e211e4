"""Finite-difference stencils and Richardson extrapolation."""

from __future__ import annotations

from math import comb
from typing import Callable, Sequence

import numpy as np

__all__ = ["richardson_limit", "one_sided_difference", "central_derivative"]


def richardson_limit(
    values: Sequence[float],
    ratio: float = 2.0,
    powers: Sequence[float] | None = None,
    max_columns: int = 6,
) -> tuple[float, float]:
    """Extrapolate ``values[i] = A(h0 / ratio**i)`` to ``h -> 0``.

    Assumes ``A(h) = A + c1 h^p1 + c2 h^p2 + ...`` with ``powers`` defaulting
    to ``1, 2, 3, ...``. Returns ``(estimate, error)`` from the tableau entry
    with the smallest error estimate (Ridders' selection rule), stopping once
    the diagonal starts to deteriorate.
    """
    vals = [float(v) for v in values]
    n = len(vals)
    if n < 2:
        raise ValueError("need at least two values to extrapolate")
    if powers is None:
        powers = range(1, max_columns + 1)
    powers = list(powers)[:max_columns]

    best, best_err = vals[-1], abs(vals[-1] - vals[-2])
    prev_row = [vals[0]]
    for i in range(1, n):
        row = [vals[i]]
        for j in range(1, min(i, len(powers)) + 1):
            f = ratio ** powers[j - 1]
            row.append((f * row[j - 1] - prev_row[j - 1]) / (f - 1.0))
            err = max(abs(row[j] - row[j - 1]), abs(row[j] - prev_row[j - 1]))
            if err <= best_err:
                best, best_err = row[j], err
        if i > 2 and abs(row[-1] - prev_row[-1]) >= 2.0 * best_err:
            break
        prev_row = row
    return best, best_err


def one_sided_difference(f: Callable[[float], float], t0: float, order: int, h: float, side: int) -> float:
    """k-th forward (``side=+1``) or backward (``side=-1``) difference quotient."""
    step = side * h
    total = 0.0
    for j in range(order + 1):
        total += (-1) ** (order - j) * comb(order, j) * f(t0 + j * step)
    return total / step**order


def central_derivative(f: Callable, x, h: float = 1e-3):
    """Fourth-order central first derivative; ``f`` may return arrays."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def polyfit_at_zero(ts: np.ndarray, ys: np.ndarray, degree: int = 3) -> float:
    """Least-squares polynomial through ``(ts, ys)`` evaluated at 0."""
    coeffs = np.polynomial.polynomial.polyfit(ts, ys, degree)
    return float(coeffs[0])
