"""Singular quadrature, the function F(lam, t) = eps(t)|int_0^t |x|^r psi|^(1/(r+1)),
and numerical smoothness probing at a point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .config import Ladder, ProbeConfig
from .errors import DomainError, EvaluationError, PositivityError, QuadratureError
from .expr import Expression, compile_expr, parse
from .numerics import one_sided_difference, richardson_limit
from .signed_power import eps, spow

__all__ = [
    "BaldomeroSpec",
    "OrderEstimate",
    "SmoothnessReport",
    "singular_integral",
    "baldomero_F",
    "f_prime_zero_formula",
    "smoothness_probe",
    "hadamard_quotient",
    "lambda_names",
]

PsiLike = Expression | Callable[[Sequence[float], float], float]


def lambda_names(n: int) -> list[str]:
    return [f"l{i + 1}" for i in range(n)]


def _psi_callable(psi: PsiLike, n_lambda: int) -> Callable[[Sequence[float], float], float]:
    if not isinstance(psi, Expression):
        return psi
    fn = compile_expr(psi, [*lambda_names(n_lambda), "x"])
    return lambda lam, x: float(fn(*lam, x))


def singular_integral(r: float, psi: PsiLike, lam: Sequence[float], t: float,
                      epsrel: float = 1e-12) -> float:
    """``int_0^t |x|^r psi(lam, x) dx`` for ``r > -1``.

    The substitution ``u = |x|^(r+1)`` turns the weight into a constant and
    leaves the bounded integrand ``psi(lam, sgn(t) u^(1/(r+1))) / (r+1)``
    on ``[0, |t|^(r+1)]``, which adaptive Gauss-Kronrod handles directly.
    """
    if not r > -1:
        raise DomainError(f"integral diverges at 0 for r={r} (need r > -1)")
    if t == 0:
        return 0.0
    lam = tuple(lam)
    f = _psi_callable(psi, len(lam))
    sign = 1.0 if t > 0 else -1.0
    beta = 1.0 / (r + 1.0)
    upper = abs(t) ** (r + 1.0)

    def integrand(u):
        return f(lam, sign * u**beta)

    val, err, info, *rest = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=epsrel,
                                 limit=200, full_output=1)
    if not math.isfinite(val) or err > max(1e-8 * abs(val), 1e-13 * upper):
        raise QuadratureError(
            f"quadrature did not converge (r={r}, t={t}): estimate {val}, error {err}")
    return sign * val / (r + 1.0)


@dataclass(frozen=True)
class BaldomeroSpec:
    """Exponent ``r > -1`` and a positive integrand ``psi(l1..ln, x)``."""

    r: float
    psi: Expression
    lambda_domain: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.r > -1:
            raise DomainError(f"r must exceed -1, got {self.r}")
        for lam in self.lambda_samples():
            if not self.psi_at(lam, 0.0) > 0:
                raise PositivityError(f"psi(lambda={list(lam)}, 0) must be positive")

    @classmethod
    def from_text(cls, r: float, psi: str, lambda_domain=()) -> "BaldomeroSpec":
        dom = tuple((float(a), float(b)) for a, b in lambda_domain)
        return cls(float(r), parse(psi, [*lambda_names(len(dom)), "x"]), dom)

    @property
    def n_lambda(self) -> int:
        return len(self.lambda_domain)

    def lambda_samples(self, per_axis: int = 3) -> list[tuple[float, ...]]:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.lambda_domain]
        return [tuple(map(float, p)) for p in itertools.product(*axes)]

    def psi_at(self, lam: Sequence[float], x: float) -> float:
        return _psi_callable(self.psi, self.n_lambda)(tuple(lam), x)


def baldomero_F(spec: BaldomeroSpec, lam: Sequence[float], t: float) -> float:
    if t == 0:
        return 0.0
    integral = singular_integral(spec.r, spec.psi, lam, t)
    return eps(t) * abs(integral) ** (1.0 / (spec.r + 1.0))


def f_prime_zero_formula(spec: BaldomeroSpec, lam: Sequence[float]) -> float:
    """Closed-form ``F'(lam, 0) = (r+1)^(-1/(r+1)) psi(lam, 0)^(1/(r+1))``."""
    p0 = spec.psi_at(lam, 0.0)
    if not p0 > 0:
        raise PositivityError(f"psi(lambda, 0) = {p0} is not positive")
    beta = 1.0 / (spec.r + 1.0)
    return (spec.r + 1.0) ** (-beta) * p0**beta


# ---------------------------------------------------------------- probing

@dataclass(frozen=True)
class OrderEstimate:
    order: int
    left: float
    right: float
    left_error: float
    right_error: float
    agree: bool

    @property
    def richardson_error(self) -> float:
        return max(self.left_error, self.right_error)


@dataclass(frozen=True)
class SmoothnessReport:
    """Per-order one-sided derivative estimates at ``t0``.

    ``verdict`` is the largest q such that orders 0..q all agree; -1 means the
    one-sided limits of f itself disagree.
    """

    t0: float
    orders: list[OrderEstimate] = field(default_factory=list)

    @property
    def verdict(self) -> int:
        q = -1
        for est in self.orders:
            if not est.agree:
                break
            q = est.order
        return q

    def estimate(self, order: int) -> OrderEstimate:
        return next(o for o in self.orders if o.order == order)


def _close(a: float, b: float, cfg: ProbeConfig) -> bool:
    return abs(a - b) <= max(cfg.rel_tol * 0.5 * abs(a + b), cfg.abs_floor)


def _converged(value: float, err: float, cfg: ProbeConfig) -> bool:
    return math.isfinite(value) and err <= max(cfg.rel_tol * abs(value), cfg.abs_floor)


def smoothness_probe(f: Callable[[float], float], t0: float = 0.0, max_order: int = 3,
                     ladder: Ladder | None = None, config: ProbeConfig | None = None) -> SmoothnessReport:
    """Estimate one-sided derivatives of ``f`` at ``t0`` up to ``max_order``.

    Order k uses the k-th forward/backward difference quotient on each step
    of the ladder, extrapolated to h -> 0. An order agrees when both sides
    converge and match within ``max(rel_tol * |mean|, abs_floor)``. Order 0
    is continuity: the gap ``|f(t0 +- h) - f(t0)|`` must shrink geometrically
    along the ladder on both sides.

    Difference noise grows like ``eps / h^k``; at order 4 a derivative that
    vanishes at t0 needs ``abs_floor`` near 1e-5 rather than the default.
    """
    config = config or ProbeConfig()
    if ladder is not None:
        config = ProbeConfig(ladder, config.rel_tol, config.abs_floor)
    if not 0 <= max_order <= 4:
        raise ValueError("max_order must lie in 0..4")
    steps = config.ladder.steps()
    cache: dict[float, float] = {}

    def g(t: float) -> float:
        if t not in cache:
            try:
                v = float(f(t))
            except Exception as exc:  # noqa: BLE001 - rewrapped with the sample point
                raise EvaluationError(f"f({t!r}) failed: {exc}") from exc
            if not math.isfinite(v):
                raise EvaluationError(f"f({t!r}) = {v}")
            cache[t] = v
        return cache[t]

    report = SmoothnessReport(t0)
    f0 = g(t0)
    report.orders.append(_continuity(g, t0, f0, steps, config))
    for k in range(1, max_order + 1):
        sides = []
        for side in (-1, +1):
            seq = [one_sided_difference(g, t0, k, h, side) for h in steps]
            sides.append(richardson_limit(seq, config.ladder.ratio))
        (left, lerr), (right, rerr) = sides
        agree = (_converged(left, lerr, config) and _converged(right, rerr, config)
                 and _close(left, right, config))
        report.orders.append(OrderEstimate(k, left, right, lerr, rerr, agree))
    return report


def _continuity(g, t0: float, f0: float, steps: list[float], config: ProbeConfig) -> OrderEstimate:
    # Limits of f may approach f(t0) like a fractional power of h, which
    # integer-power extrapolation cannot model; require geometric decay of
    # the gap instead.
    limits, gaps, ok = [], [], True
    for side in (-1, +1):
        d = [abs(g(t0 + side * h) - f0) for h in steps]
        limits.append(g(t0 + side * steps[-1]))
        gaps.append(d[-1])
        tail = d[-4:]
        decaying = all(b <= 0.9 * a or b <= config.abs_floor for a, b in zip(tail, tail[1:]))
        ok = ok and (d[-1] <= config.abs_floor or decaying)
    return OrderEstimate(0, limits[0], limits[1], gaps[0], gaps[1], ok)


# ---------------------------------------------------------------- Hadamard

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def hadamard_quotient(f: Callable[[float], float], t: float, h: float = 1e-3) -> float:
    """``g(t) = int_0^1 f'(s t) ds`` so that ``f(t) - f(0) = t g(t)``.

    ``f'`` comes from a fourth-order central difference; the s-integral uses
    24-point Gauss-Legendre. At ``t = 0`` this returns the estimate of f'(0).
    """
    s = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * _GL_WEIGHTS
    total = 0.0
    for si, wi in zip(s, w):
        x = si * t
        d = (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)
        total += wi * d
    if not math.isfinite(total):
        raise EvaluationError(f"non-finite quotient at t={t}")
    return float(total)


def signed_root(value: float, r: float) -> float:
    """``spow(value, 1/(r+1))`` with the F(0) = 0 convention."""
    return 0.0 if value == 0 else spow(value, 1.0 / (r + 1.0))
