"""Degenerate metric fields: evaluation, the singular hypersurface, radical
directions, alpha-transversality, Christoffel symbols and the field
``G = grad(sigma) / <grad(sigma), grad(sigma)>``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import TransversalityConfig
from .errors import (
    DomainError,
    NearSingular,
    NoBracket,
    NotOnSigma,
    RankError,
    ZeroGradient,
)
from .expr import Expression, compile_expr, differentiate, parse
from .numerics import richardson_limit
from .signed_power import spow

__all__ = [
    "MetricField", "VectorField", "SigmaPatch", "TransversalityReport",
    "GradSigmaField", "ExtensionReport",
    "default_coords", "eval_metric", "det_at", "locate_sigma", "radical_direction",
    "is_transverse", "transversality_report", "christoffel", "inner",
    "grad_sigma_field", "signature_at", "signature_mismatches",
]


def default_coords(m: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(m))


def _det(a: np.ndarray) -> float:
    m = a.shape[0]
    if m == 1:
        return float(a[0, 0])
    if m == 2:
        return float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
    if m == 3:
        return float(a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
                     - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
                     + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]))
    if m == 4:
        total = 0.0
        for j in range(4):
            minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
            total += (-1) ** j * a[0, j] * _det(minor)
        return total
    return float(np.linalg.det(a))


@dataclass(frozen=True)
class MetricField:
    """Symmetric matrix of expressions ``g_ab(x)`` on an axis-aligned box."""

    alpha: float
    entries: tuple[tuple[Expression, ...], ...]
    domain: tuple[tuple[float, float], ...]
    coords: tuple[str, ...] = ()
    sigma_hint: Expression | None = None

    def __post_init__(self):
        m = len(self.entries)
        if not self.coords:
            object.__setattr__(self, "coords", default_coords(m))
        if m < 2:
            raise ValueError("metric dimension must be at least 2")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if any(len(row) != m for row in self.entries):
            raise ValueError("metric entries must form a square matrix")
        if len(self.domain) != m or len(self.coords) != m:
            raise ValueError("domain and coordinate list must match the dimension")
        for a in range(m):
            for b in range(a + 1, m):
                if self.entries[a][b] != self.entries[b][a]:
                    raise ValueError(f"metric is not symmetric at ({a + 1}, {b + 1})")
        known = set(self.coords)
        for row in self.entries:
            for e in row:
                extra = e.variables() - known
                if extra:
                    raise ValueError(f"metric entry uses undeclared variables {sorted(extra)}")

    @classmethod
    def from_text(cls, entries: Sequence[Sequence[str]], alpha: float,
                  domain: Sequence[Sequence[float]], coords: Sequence[str] | None = None,
                  sigma: str | None = None) -> "MetricField":
        m = len(entries)
        coords = tuple(coords) if coords else default_coords(m)
        parsed = tuple(tuple(parse(s, coords) for s in row) for row in entries)
        dom = tuple((float(lo), float(hi)) for lo, hi in domain)
        hint = parse(sigma, coords) if sigma else None
        return cls(float(alpha), parsed, dom, coords, hint)

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def scale(self) -> float:
        return max(hi - lo for lo, hi in self.domain)

    @property
    def det_floor(self) -> float:
        return 1e-8 * self.scale

    def in_domain(self, x, pad: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return all(lo - pad <= xi <= hi + pad for xi, (lo, hi) in zip(x, self.domain))

    @cached_property
    def _entry_fns(self):
        return [[compile_expr(e, self.coords) for e in row] for row in self.entries]

    @cached_property
    def _deriv_fns(self):
        # [c][a][b] -> d g_ab / d x_c
        return [[[compile_expr(differentiate(self.entries[a][b], v), self.coords)
                  for b in range(self.dim)] for a in range(self.dim)] for v in self.coords]

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = self.dim
        out = np.empty((m, m))
        for a in range(m):
            for b in range(a, m):
                out[a, b] = out[b, a] = self._entry_fns[a][b](*x)
        return out

    def matrices(self, xs) -> np.ndarray:
        """Vectorized over a leading axis: ``xs`` has shape (..., m)."""
        xs = np.asarray(xs, dtype=float)
        cols = [xs[..., i] for i in range(self.dim)]
        m = self.dim
        out = np.empty(xs.shape[:-1] + (m, m))
        for a in range(m):
            for b in range(a, m):
                out[..., a, b] = out[..., b, a] = self._entry_fns[a][b](*cols)
        return out

    def metric_derivatives(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = self.dim
        out = np.empty((m, m, m))
        for c in range(m):
            for a in range(m):
                for b in range(a, m):
                    out[c, a, b] = out[c, b, a] = self._deriv_fns[c][a][b](*x)
        return out


@dataclass(frozen=True)
class VectorField:
    """Vector field with expression components in the metric's coordinates."""

    components: tuple[Expression, ...]
    coords: tuple[str, ...]

    @classmethod
    def from_text(cls, components: Sequence[str], coords: Sequence[str]) -> "VectorField":
        coords = tuple(coords)
        return cls(tuple(parse(c, coords) for c in components), coords)

    @classmethod
    def basis(cls, coords: Sequence[str], index: int) -> "VectorField":
        coords = tuple(coords)
        return cls.from_text(["1" if i == index else "0" for i in range(len(coords))], coords)

    @cached_property
    def _fns(self):
        return [compile_expr(c, self.coords) for c in self.components]

    @cached_property
    def _jac_fns(self):
        return [[compile_expr(differentiate(c, v), self.coords) for v in self.coords]
                for c in self.components]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([float(f(*x)) for f in self._fns])

    def values(self, xs) -> np.ndarray:
        """Field at each row of ``xs``, shape (N, m)."""
        xs = np.asarray(xs, dtype=float)
        cols = [np.broadcast_to(f(*xs.T), xs.shape[:1]) for f in self._fns]
        return np.stack(cols, axis=-1).astype(float)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([[float(f(*x)) for f in row] for row in self._jac_fns])

    def scaled(self, factor: Expression) -> "VectorField":
        return VectorField(tuple(factor * c for c in self.components), self.coords)

    def to_text(self) -> list[str]:
        return [str(c) for c in self.components]


def eval_metric(M: MetricField, x) -> np.ndarray:
    return M.matrix(x)


def det_at(M: MetricField, x) -> float:
    return _det(M.matrix(x))


def inner(M: MetricField, x, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return float(u @ M.matrix(x) @ v)


def locate_sigma(M: MetricField, seed, direction, tol: float | None = None) -> np.ndarray:
    """Point where ``det`` vanishes on the segment ``seed + s*direction``, |s| <= 1.

    The root closest to the seed wins. Raises NoBracket if det keeps its
    sign on both halves of the segment.
    """
    seed = np.asarray(seed, dtype=float)
    direction = np.asarray(direction, dtype=float)
    tol = 1e-12 * M.scale if tol is None else tol

    def f(s: float) -> float:
        return det_at(M, seed + s * direction)

    f0 = f(0.0)
    if abs(f0) <= tol:
        return seed.copy()
    roots = []
    for a, b in ((-1.0, 0.0), (0.0, 1.0)):
        fa, fb = f(a), f(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-16, rtol=1e-15, maxiter=500))
    if not roots:
        raise NoBracket(f"det does not change sign on seed +- direction from {seed.tolist()}")
    s = min(roots, key=abs)
    return seed + s * direction


def _sigma_tolerance(M: MetricField, g: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(g)))) ** M.dim


def is_transverse(M: MetricField, p, v, h: float | None = None) -> bool:
    """True if det changes sign across the hypersurface along ``v``."""
    h = 1e-6 * M.scale if h is None else h
    p = np.asarray(p, dtype=float)
    return det_at(M, p + h * np.asarray(v)) * det_at(M, p - h * np.asarray(v)) < 0


def radical_direction(M: MetricField, p) -> np.ndarray:
    """Unit kernel vector of the degenerate ``g_p``.

    The sign is fixed so the last significant component is positive.
    Raises NotOnSigma off the hypersurface and RankError when the kernel is
    not one-dimensional.
    """
    p = np.asarray(p, dtype=float)
    g = M.matrix(p)
    if abs(_det(g)) > _sigma_tolerance(M, g):
        raise NotOnSigma(f"det(g) = {_det(g):.3e} at {p.tolist()} is not zero")
    w, vecs = np.linalg.eigh(g)
    order = np.argsort(np.abs(w))
    smallest, second = abs(w[order[0]]), abs(w[order[1]])
    if second <= 1e3 * smallest:
        raise RankError(f"metric at {p.tolist()} degenerates in more than one direction")
    v = vecs[:, order[0]]
    v = v / np.linalg.norm(v)
    significant = np.nonzero(np.abs(v) > 1e-12)[0]
    if v[significant[-1]] < 0:
        v = -v
    v = v + 0.0  # normalise -0.0
    if not is_transverse(M, p, v):
        warnings.warn(f"radical direction at {p.tolist()} is not transverse to the hypersurface",
                      stacklevel=2)
    return v


@dataclass(frozen=True)
class TransversalityReport:
    point: np.ndarray
    direction: np.ndarray
    det_value: float
    one_sided_derivatives: tuple[float, float]
    extrapolation_errors: tuple[float, float]
    extension_c1: bool
    differential_nonzero: bool
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.extension_c1 and self.differential_nonzero

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else f"fail({self.reason})"

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "direction": self.direction.tolist(),
            "det_value": self.det_value,
            "left_derivative": self.one_sided_derivatives[0],
            "right_derivative": self.one_sided_derivatives[1],
            "extension_c1": self.extension_c1,
            "differential_nonzero": self.differential_nonzero,
            "verdict": self.verdict,
        }


def transversality_report(M: MetricField, p, alpha: float | None = None,
                          config: TransversalityConfig | None = None) -> TransversalityReport:
    """Probe ``t -> spow(det(p + t n), alpha)`` along the radical direction n.

    Passes when both one-sided derivatives at 0 exist, agree, and are nonzero.
    ``alpha`` defaults to the metric's own exponent; passing another value
    tests whether the declared exponent is the right one.
    """
    config = config or TransversalityConfig()
    alpha = M.alpha if alpha is None else alpha
    p = np.asarray(p, dtype=float)
    n = radical_direction(M, p)

    def f(t: float) -> float:
        d = det_at(M, p + t * n)
        return 0.0 if d == 0 else spow(d, alpha)

    f0 = f(0.0)
    steps = config.ladder.steps()
    right = richardson_limit([(f(h) - f0) / h for h in steps], config.ladder.ratio)
    left = richardson_limit([(f0 - f(-h)) / h for h in steps], config.ladder.ratio)

    def exists(est):
        value, err = est
        return math.isfinite(value) and err <= max(config.rel_tol * abs(value), config.abs_floor)

    (lv, le), (rv, re) = left, right
    both = exists(left) and exists(right)
    agree = abs(lv - rv) <= max(config.rel_tol * max(abs(lv), abs(rv)), config.abs_floor)
    c1 = both and agree
    nonzero = c1 and abs(0.5 * (lv + rv)) > config.nonzero_floor * M.scale
    if not both:
        reason = "one-sided derivative does not exist"
    elif not agree:
        reason = "extension not C1"
    elif not nonzero:
        reason = "vanishing differential"
    else:
        reason = ""
    return TransversalityReport(p, n, det_at(M, p), (lv, rv), (le, re), c1, nonzero, reason)


def christoffel(M: MetricField, x, det_floor: float | None = None) -> np.ndarray:
    """``Gamma[a, b, c]`` of the Levi-Civita connection, off the hypersurface only."""
    x = np.asarray(x, dtype=float)
    floor = M.det_floor if det_floor is None else det_floor
    g = M.matrix(x)
    if abs(_det(g)) <= floor:
        raise NearSingular(f"|det g| <= {floor:.1e} at {x.tolist()}")
    dg = M.metric_derivatives(x)  # dg[c, a, b] = d_c g_ab
    # lower[d, b, c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    lower = 0.5 * (np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg)
    m = M.dim
    return np.linalg.solve(g, lower.reshape(m, m * m)).reshape(m, m, m)


# ---------------------------------------------------------------- G^sigma

@dataclass(frozen=True)
class ExtensionReport:
    point: np.ndarray
    left: np.ndarray
    right: np.ndarray
    converged: bool
    agree: bool
    differential_nonzero: bool

    @property
    def passed(self) -> bool:
        return self.converged and self.agree and self.differential_nonzero


class GradSigmaField:
    """``G = g^{-1} dsigma / (dsigma . g^{-1} dsigma)`` with a probe for its
    extension across the singular hypersurface."""

    def __init__(self, M: MetricField, sigma: Expression, config: TransversalityConfig | None = None):
        self.M = M
        self.sigma = sigma
        self.config = config or TransversalityConfig()
        self._sigma_fn = compile_expr(sigma, M.coords)
        self._grad_fns = [compile_expr(differentiate(sigma, v), M.coords) for v in M.coords]

    def sigma_at(self, x) -> float:
        return float(self._sigma_fn(*np.asarray(x, dtype=float)))

    def dsigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([float(f(*x)) for f in self._grad_fns])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self.M.matrix(x)
        if abs(_det(g)) <= self.M.det_floor:
            raise NearSingular(f"G^sigma requested on the hypersurface at {x.tolist()}")
        ds = self.dsigma(x)
        raised = np.linalg.solve(g, ds)
        denom = float(ds @ raised)
        if denom == 0.0 or not np.any(ds):
            raise ZeroGradient(f"<grad sigma, grad sigma> vanishes at {x.tolist()}")
        return raised / denom

    def _probe_direction(self, x) -> np.ndarray:
        ds = self.dsigma(x)
        norm = np.linalg.norm(ds)
        if norm == 0:
            raise ZeroGradient(f"d sigma vanishes at {x.tolist()}")
        return ds / norm

    def extension_check(self, p) -> ExtensionReport:
        """One-sided limits of G along a transversal ladder at ``p``."""
        p = np.asarray(p, dtype=float)
        cfg = self.config
        nonzero = bool(np.linalg.norm(self.dsigma(p)) > 1e-12)
        n = radical_direction(self.M, p)
        floor = self.M.det_floor
        # G is undefined inside the det guard band; stop the ladder there
        steps = [h for h in cfg.ladder.steps()
                 if min(abs(det_at(self.M, p + h * n)), abs(det_at(self.M, p - h * n))) > 10 * floor]
        if len(steps) < 3:
            raise NearSingular(f"no usable probe steps outside the det guard at {p.tolist()}")
        sides, errs = [], []
        for s in (-1.0, 1.0):
            samples = np.array([self(p + s * h * n) for h in steps])
            limits = [richardson_limit(samples[:, i], cfg.ladder.ratio) for i in range(self.M.dim)]
            sides.append(np.array([v for v, _ in limits]))
            errs.append(max(e for _, e in limits))
        left, right = sides
        size = max(np.max(np.abs(left)), np.max(np.abs(right)))
        converged = all(np.all(np.isfinite(v)) for v in sides) and \
            max(errs) <= max(cfg.rel_tol * size, cfg.abs_floor)
        agree = float(np.max(np.abs(left - right))) <= max(cfg.rel_tol * size, cfg.abs_floor)
        return ExtensionReport(p, left, right, converged, agree, nonzero)

    def extended(self, x, h: float | None = None) -> np.ndarray:
        """G off the hypersurface, its two-sided limit on it."""
        x = np.asarray(x, dtype=float)
        if abs(det_at(self.M, x)) > self.M.det_floor:
            return self(x)
        h = 1e-3 * self.M.scale if h is None else h
        n = self._probe_direction(x)
        total = np.zeros(self.M.dim)
        for s in (-1.0, 1.0):
            total += 2.0 * self(x + s * 0.5 * h * n) - self(x + s * h * n)
        return 0.5 * total


def grad_sigma_field(M: MetricField, sigma: Expression | str,
                     config: TransversalityConfig | None = None) -> GradSigmaField:
    if isinstance(sigma, str):
        sigma = parse(sigma, M.coords)
    return GradSigmaField(M, sigma, config)


# ---------------------------------------------------------------- signature

def signature_at(M: MetricField, x, rel_tol: float = 1e-10) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of g(x)."""
    w = np.linalg.eigvalsh(M.matrix(x))
    cut = rel_tol * max(1.0, float(np.max(np.abs(w))))
    return int(np.sum(w > cut)), int(np.sum(w < -cut)), int(np.sum(np.abs(w) <= cut))


def signature_mismatches(M: MetricField, per_axis: int = 10) -> list[np.ndarray]:
    """Grid points where det's sign disagrees with the eigenvalue signature.

    Lorentz (one negative eigenvalue) is expected where det < 0 and
    Riemannian where det > 0. Points on or next to the hypersurface are skipped.
    """
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in M.domain]
    bad = []
    for pt in itertools.product(*axes):
        x = np.array(pt)
        try:
            d = det_at(M, x)
        except DomainError:
            continue
        if abs(d) <= M.det_floor:
            continue
        pos, negc, zero = signature_at(M, x)
        expected = (M.dim - 1, 1, 0) if d < 0 else (M.dim, 0, 0)
        if (pos, negc, zero) != expected:
            bad.append(x)
    return bad


# ---------------------------------------------------------------- patches

@dataclass(frozen=True)
class SigmaPatch:
    """Parameterization ``u -> p(u)`` of a piece of the singular hypersurface
    over a box ``lo <= u <= hi`` in R^(m-1), sampled ``n`` times per axis."""

    embed: Callable[[np.ndarray], np.ndarray]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: int = 5
    description: str = field(default="", compare=False)

    @classmethod
    def hyperplane(cls, m: int, lo: Sequence[float], hi: Sequence[float], n: int = 5) -> "SigmaPatch":
        """The hyperplane ``x_m = 0`` with ``u = (x_1, ..., x_{m-1})``."""
        return cls(lambda u: np.append(np.asarray(u, dtype=float), 0.0),
                   tuple(map(float, lo)), tuple(map(float, hi)), n, "hyperplane x_m = 0")

    @classmethod
    def located(cls, M: MetricField, lo: Sequence[float], hi: Sequence[float], n: int = 5) -> "SigmaPatch":
        """Root-find det = 0 along the last axis from seeds ``(u, mid)``."""
        a, b = M.domain[-1]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        e_m = np.zeros(M.dim)
        e_m[-1] = half

        def embed(u):
            seed = np.append(np.asarray(u, dtype=float), mid)
            return locate_sigma(M, seed, e_m)

        return cls(embed, tuple(map(float, lo)), tuple(map(float, hi)), n, "located det = 0")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def grid(self) -> list[np.ndarray]:
        axes = [np.linspace(a, b, self.n) for a, b in zip(self.lo, self.hi)]
        return [np.array(u) for u in itertools.product(*axes)]

    def point(self, u) -> np.ndarray:
        return np.asarray(self.embed(np.asarray(u, dtype=float)), dtype=float)

    def tangents(self, u, h: float = 1e-5) -> np.ndarray:
        """Columns are d p / d u_i (central differences)."""
        u = np.asarray(u, dtype=float)
        cols = []
        for i in range(self.dim):
            du = np.zeros(self.dim)
            du[i] = h
            cols.append((self.point(u + du) - self.point(u - du)) / (2 * h))
        return np.column_stack(cols)


def induced_metric(M: MetricField, patch: SigmaPatch, u) -> np.ndarray:
    T = patch.tangents(u)
    return T.T @ M.matrix(patch.point(u)) @ T
