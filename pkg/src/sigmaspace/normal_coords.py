"""Normal coordinates around the singular hypersurface.

Given a radical field rho whose integral lines are geodesic lines, the
pipeline flows rho out of a patch of the hypersurface, reparameterizes each
line so that its speed squared becomes ``spow(s, 1/alpha)``, and uses
``(u, s)`` as new coordinates. Along a line with flow parameter t,

    <rho, rho> = eps(t) |t|^(2r) psi(t)^2,        r = 1/(2 alpha),
    s(t) = spow((1 + r) int_0^t |tau|^r psi(tau) dtau, 1/(1 + r)),

so ``ds/dt = (|t| / |s|)^r psi(t)`` and ``<rho, rho> / (ds/dt)^2 = spow(s, 1/alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .config import ChartConfig
from .errors import (NonPositivePsi, NotGeodesicField, NotRadical, NotSimpleEquation, SignError)
from .expr import Expression, Num
from .geodesic import FlowChart, FlowLine, GeodesicTrace, flow_chart, flow_line, pregeodesic_residual
from .metric import MetricField, SigmaPatch, VectorField, det_at, grad_sigma_field
from .quad_smooth import singular_integral
from .signed_power import spow, spow_array

__all__ = [
    "PsiLine", "ChartTransform", "NormalChartReport", "SyncReport",
    "arclength_reparam", "extract_psi", "alpha_parameterize", "psi_line",
    "build_normal_chart", "verify_normal_chart", "synchronization_check",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_PANEL = 0.05


def arclength_reparam(M: MetricField, trace: GeodesicTrace) -> np.ndarray:
    """Cumulative ``int sqrt|<v, v>| dt`` from ``trace.params[0]`` at each sample.

    The trace must stay on one side of the hypersurface: a sign change of
    ``<v, v>`` raises SignError.
    """
    if trace.velocity_at is None or trace.point_at is None:
        raise ValueError("trace carries no dense output")

    def speed2(t):
        v = np.asarray(trace.velocity_at(t), dtype=float)
        return float(v @ M.matrix(trace.point_at(t)) @ v)

    s2 = np.array([speed2(t) for t in trace.params])
    scale = max(np.max(np.abs(s2)), 1e-300)
    big = s2[np.abs(s2) > 1e-12 * scale]
    if np.any(big > 0) and np.any(big < 0):
        raise SignError("speed squared changes sign along the trace")
    out = [0.0]
    for a, b in zip(trace.params[:-1], trace.params[1:]):
        val, _ = quad(lambda t: math.sqrt(abs(speed2(t))), a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        out.append(out[-1] + abs(val))
    return np.array(out)


# ---------------------------------------------------------------- psi

@dataclass
class PsiLine:
    """psi and the alpha-parameter s along one flow line of rho.

    Away from the hypersurface psi comes straight from ``<rho, rho>``; for
    ``|t| < window`` it is a cubic fitted to samples on both sides, since
    the speed there is too small to divide out accurately.
    """

    line: FlowLine
    rho: VectorField
    M: MetricField
    alpha: float
    window: float
    coeffs: np.ndarray = field(default=None)

    @property
    def r(self) -> float:
        return 1.0 / (2.0 * self.alpha)

    def speed2(self, ts) -> np.ndarray:
        pts = self.line(np.atleast_1d(ts))
        v = self.rho.values(pts)
        return np.einsum("ka,kab,kb->k", v, self.M.matrices(pts), v)

    def weighted(self, ts) -> np.ndarray:
        """``|t|^r psi(t) = sqrt(eps(t) <rho, rho>)``; requires the right sign."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        signed = np.sign(ts) * self.speed2(ts)
        if np.any(signed <= 0):
            bad = ts[signed <= 0][0]
            raise NonPositivePsi(f"eps(t)<rho, rho> is not positive at t={bad:.6g}")
        return np.sqrt(signed)

    def direct(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return self.weighted(ts) * np.abs(ts) ** (-self.r)

    def __call__(self, ts) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty(len(ts))
        near = np.abs(ts) < self.window
        out[near] = np.polynomial.polynomial.polyval(ts[near], self.coeffs)
        if np.any(~near):
            out[~near] = self.direct(ts[~near])
        return out

    @property
    def psi0(self) -> float:
        return float(self.coeffs[0])

    def integral(self, ts) -> np.ndarray:
        """``int_0^t |tau|^r psi(tau) dtau`` for each t (signed like t)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        r, w = self.r, self.window
        k = np.arange(len(self.coeffs))

        def moments(t):
            a = abs(t)
            return float(np.sum(self.coeffs * np.sign(t) ** (k + 1) * a ** (r + k + 1) / (r + k + 1)))

        out = np.empty(len(ts))
        nodes, weights, owners = [], [], []
        for j, t in enumerate(ts):
            if abs(t) <= w:
                out[j] = moments(t) if t != 0 else 0.0
                continue
            sgn = math.copysign(1.0, t)
            out[j] = moments(sgn * w)
            n_pan = max(1, math.ceil((abs(t) - w) / _PANEL))
            edges = np.linspace(sgn * w, t, n_pan + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                half = 0.5 * (b - a)
                nodes.append(0.5 * (a + b) + half * _GL_X)
                weights.append(half * _GL_W)
                owners.append(np.full(len(_GL_X), j))
        if nodes:
            x = np.concatenate(nodes)
            contrib = np.concatenate(weights) * self.weighted(x)
            np.add.at(out, np.concatenate(owners), contrib)
        return out

    def s(self, ts) -> np.ndarray:
        r = self.r
        return spow_array((1.0 + r) * self.integral(ts), 1.0 / (1.0 + r))

    def ds_dt(self, ts, s=None) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        s = self.s(ts) if s is None else s
        out = np.empty(len(ts))
        zero = ts == 0
        out[zero] = self.psi0 ** (1.0 / (1.0 + self.r))
        nz = ~zero
        if np.any(nz):
            t, sv = ts[nz], s[nz]
            out[nz] = (np.abs(t) / np.abs(sv)) ** self.r * self(t)
        return out


def psi_line(M: MetricField, rho: VectorField, line: FlowLine, alpha: float,
             window: float = 0.01, check: bool = True) -> PsiLine:
    """Fit psi near the hypersurface; with ``check`` also test simplicity.

    The simplicity test looks at ``phi(t) / t`` with ``phi = spow(<rho, rho>, alpha)``:
    it must settle to one positive value from both sides as t -> 0, which
    fails when rho is paired with the wrong alpha or is not transverse.
    """
    pl = PsiLine(line, rho, M, float(alpha), float(window))
    if check:
        probe = window * 2.0 ** -np.arange(4)
        ratios = []
        for side in (1.0, -1.0):
            q = pl.speed2(side * probe)
            ratios.append(spow_array(q, alpha) / (side * probe))
        ratios = np.array(ratios)
        if np.any(ratios <= 0):
            raise NotSimpleEquation("spow(<rho, rho>, alpha) does not change sign with t")
        drift = ratios[:, 1:] / ratios[:, :-1]
        if np.any(np.abs(np.log(drift)) > math.log(1.25)) or \
                abs(math.log(ratios[0, -1] / ratios[1, -1])) > math.log(1.25):
            raise NotSimpleEquation(
                f"spow(<rho, rho>, alpha)/t does not settle near t = 0 "
                f"(ratios {ratios[:, -1].tolist()}); check alpha")
    fit_t = np.linspace(window, 3.0 * window, 8)
    fit_t = np.concatenate([-fit_t[::-1], fit_t])
    pl.coeffs = np.polynomial.polynomial.polyfit(fit_t, pl.direct(fit_t), 3)
    if not pl.psi0 > 0:
        raise NonPositivePsi(f"psi(0) = {pl.psi0}")
    return pl


def extract_psi(M: MetricField, rho: VectorField, chart: FlowChart, u, t_ladder,
                alpha: float | None = None, window: float = 0.01) -> np.ndarray:
    """psi at each t of ``t_ladder`` along the rho-line through ``p(u)``."""
    line = flow_line(rho, chart.patch.point(u), chart.epsilon, chart.config)
    pl = psi_line(M, rho, line, M.alpha if alpha is None else alpha, window)
    return pl(np.asarray(t_ladder, dtype=float))


def alpha_parameterize(psi, alpha: float, t: float) -> float:
    """alpha-parameter s(t) from psi given as a callable or as ``(ts, values)``.

    Reference implementation through adaptive singular quadrature; the chart
    pipeline uses the faster cumulative rule in PsiLine.
    """
    if t == 0:
        return 0.0
    if isinstance(psi, tuple):
        psi = CubicSpline(*psi)
    r = 1.0 / (2.0 * alpha)
    integral = singular_integral(r, lambda lam, x: float(psi(x)), (), t)
    return spow((1.0 + r) * integral, 1.0 / (1.0 + r))


# ---------------------------------------------------------------- chart

@dataclass
class ChartTransform:
    """The map ``(u, s) -> x`` built from the flow chart of rho.

    ``s_samples[i, k]`` is s on grid line i at ``t_grid[k]``; ``ds_dt``
    matches. ``neighbors[i]`` holds the lines at ``u +- du e_j`` used for
    u-derivatives.
    """

    base_chart: FlowChart
    rho: VectorField
    alpha: float
    config: ChartConfig
    lines: list[PsiLine]
    neighbors: list[list[tuple[PsiLine, PsiLine]]]
    psi_samples: np.ndarray
    s_samples: np.ndarray
    ds_dt: np.ndarray
    flipped: bool = False

    @property
    def u_grid(self) -> np.ndarray:
        return self.base_chart.u_grid

    @property
    def t_grid(self) -> np.ndarray:
        return self.base_chart.t_grid

    def s_of_t(self, i: int, t) -> np.ndarray:
        return self.lines[i].s(t)

    def t_of_s(self, i: int, s: float) -> float:
        eps_ = self.base_chart.epsilon
        pl = self.lines[i]
        return brentq(lambda t: pl.s(t)[0] - s, -eps_, eps_, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def pullback(self, i: int, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(s, x, g_new)`` on line i at flow parameters ``ts``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        pl = self.lines[i]
        M = pl.M
        x = pl.line(ts)
        rho = self.rho.values(x)
        s = pl.s(ts)
        st = pl.ds_dt(ts, s)
        du = self.base_chart.du
        cols = []
        for plus, minus in self.neighbors[i]:
            dpsi = (plus.line(ts) - minus.line(ts)) / (2 * du)
            ds = (plus.s(ts) - minus.s(ts)) / (2 * du)
            cols.append(dpsi - rho * (ds / st)[:, None])
        cols.append(rho / st[:, None])
        D = np.stack(cols, axis=-1)
        g = np.einsum("kac,kab,kbd->kcd", D, M.matrices(x), D)
        return s, x, g

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.base_chart.epsilon,
            "rho": self.rho.to_text(),
            "rho_flipped": self.flipped,
            "u_grid": self.u_grid.tolist(),
            "t_grid": self.t_grid.tolist(),
            "psi": self.psi_samples.tolist(),
            "s": self.s_samples.tolist(),
            "ds_dt": self.ds_dt.tolist(),
        }


def _orient(M: MetricField, rho: VectorField, p: np.ndarray) -> tuple[VectorField, bool]:
    # the positive flow direction should enter the side where <rho, rho> > 0
    v = rho(p)
    h = 0.01 * M.scale / max(np.linalg.norm(v), 1e-300)
    q = v @ M.matrix(p + h * v) @ v
    if q < 0:
        return rho.scaled(Num(-1.0)), True
    return rho, False


def _check_radical(M: MetricField, rho: VectorField, p: np.ndarray, rel: float = 1e-6):
    g = M.matrix(p)
    v = rho(p)
    gv = np.linalg.norm(g @ v)
    if gv > rel * np.linalg.norm(v) * max(np.max(np.abs(g)), 1.0):
        raise NotRadical(f"|g(rho, .)| = {gv:.3e} at {p.tolist()}")


def _check_geodesic(M: MetricField, rho: VectorField, line: FlowLine, ts: np.ndarray, tol: float):
    pts = line(ts)
    vel = rho.values(pts)
    acc = np.array([rho.jacobian(p) @ v for p, v in zip(pts, vel)])
    trace = GeodesicTrace(ts, pts, vel, acc)
    res = pregeodesic_residual(M, trace, det_floor=0.0) / np.einsum("ka,ka->k", vel, vel)
    worst = float(np.max(res))
    if worst > tol:
        k = int(np.argmax(res))
        raise NotGeodesicField(f"pregeodesic residual {worst:.3e} at {pts[k].tolist()}")
    return worst


def build_normal_chart(M: MetricField, rho: VectorField, patch: SigmaPatch,
                       config: ChartConfig | None = None, alpha: float | None = None) -> ChartTransform:
    cfg = config or ChartConfig()
    alpha = M.alpha if alpha is None else float(alpha)
    us = patch.grid()
    rho, flipped = _orient(M, rho, patch.point(us[0]))
    for u in us:
        _check_radical(M, rho, patch.point(u))
    chart = flow_chart(rho, patch, cfg.epsilon, cfg.n_t, cfg.flow, cfg.du)
    ts = chart.t_grid
    check_t = ts[np.abs(ts) >= cfg.band_floor * M.scale]
    lines, neighbors = [], []
    for i, u in enumerate(us):
        _check_geodesic(M, rho, chart.lines[i], check_t, cfg.geodesic_tol)
        lines.append(psi_line(M, rho, chart.lines[i], alpha, cfg.psi_window))
        neighbors.append([(psi_line(M, rho, a, alpha, cfg.psi_window, check=False),
                           psi_line(M, rho, b, alpha, cfg.psi_window, check=False))
                          for a, b in chart.neighbors[i]])
    psi = np.array([pl(ts) for pl in lines])
    s = np.array([pl.s(ts) for pl in lines])
    st = np.array([pl.ds_dt(ts, sv) for pl, sv in zip(lines, s)])
    return ChartTransform(chart, rho, alpha, cfg, lines, neighbors, psi, s, st, flipped)


# ---------------------------------------------------------------- verification

@dataclass
class NormalChartReport:
    grid: list[list[float]]
    gmm_error: float
    gim_error: float
    sigma_gim_error: float
    gij_posdef: bool
    tol: float
    alpha: float

    @property
    def passed(self) -> bool:
        return (self.gmm_error <= self.tol and self.gim_error <= self.tol
                and self.sigma_gim_error <= self.tol and self.gij_posdef)

    @property
    def verdict(self) -> str:
        if self.passed:
            return "pass"
        bad = []
        if not self.gmm_error <= self.tol:
            bad.append(f"gmm_error={self.gmm_error:.3e}")
        if not self.gim_error <= self.tol:
            bad.append(f"gim_error={self.gim_error:.3e}")
        if not self.sigma_gim_error <= self.tol:
            bad.append(f"sigma_gim_error={self.sigma_gim_error:.3e}")
        if not self.gij_posdef:
            bad.append("g_ij not positive definite on the hypersurface")
        return f"fail({', '.join(bad)})"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "gmm_error": self.gmm_error,
            "gim_error": self.gim_error,
            "sigma_gim_error": self.sigma_gim_error,
            "gij_posdef": self.gij_posdef,
            "tol": self.tol,
            "alpha": self.alpha,
            "n_points": len(self.grid),
        }


def verify_normal_chart(ct: ChartTransform, tol: float | None = None, band_floor: float | None = None,
                        alpha: float | None = None) -> NormalChartReport:
    """Compare the pulled-back metric with ``diag(g_ij, spow(s, 1/alpha))``.

    Off the band ``|s| < band_floor * scale`` (scale = widest domain side)
    the check is pointwise on the chart grid. On the hypersurface, g_im is checked through one-sided cubic
    extrapolation and g_ij through its eigenvalues at s = 0.
    """
    cfg = ct.config
    tol = cfg.tol if tol is None else tol
    band = (cfg.band_floor if band_floor is None else band_floor) * ct.lines[0].M.scale
    alpha = ct.alpha if alpha is None else alpha
    m = ct.lines[0].M.dim
    gmm_err = gim_err = sigma_err = 0.0
    posdef = True
    grid = []
    lim_t = band * np.linspace(1.0, 3.0, 7)
    for i, u in enumerate(ct.u_grid):
        s, _, g = ct.pullback(i, ct.t_grid)
        keep = np.abs(s) >= band
        for sv in s[keep]:
            grid.append([*map(float, u), float(sv)])
        if np.any(keep):
            gmm_err = max(gmm_err, float(np.max(np.abs(g[keep, -1, -1] - spow_array(s[keep], 1.0 / alpha)))))
            gim_err = max(gim_err, float(np.max(np.abs(g[keep, :-1, -1]))))
        for side in (1.0, -1.0):
            _, _, gl = ct.pullback(i, side * lim_t)
            for j in range(m - 1):
                c = np.polynomial.polynomial.polyfit(side * lim_t, gl[:, j, -1], 3)
                sigma_err = max(sigma_err, abs(float(c[0])))
        _, _, g0 = ct.pullback(i, [0.0])
        if m > 1 and not np.all(np.linalg.eigvalsh(g0[0, :-1, :-1]) > 0):
            posdef = False
    return NormalChartReport(grid, gmm_err, gim_err, sigma_err, posdef, tol, alpha)


# ---------------------------------------------------------------- synchronization

@dataclass
class SyncReport:
    max_deviation: float
    samples: list[tuple[list[float], float, float]]

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "n_samples": len(self.samples)}


def synchronization_check(M: MetricField, sigma: Expression | str, patch: SigmaPatch,
                          t_ladder: Sequence[float], config: ChartConfig | None = None) -> SyncReport:
    """Flow the extended gradient-like field of sigma from the patch and
    compare ``sigma(flow_t(p))`` with t."""
    cfg = config or ChartConfig()
    G = grad_sigma_field(M, sigma)
    ts = np.asarray(t_ladder, dtype=float)
    reach = float(np.max(np.abs(ts)))
    samples = []
    worst = 0.0
    for u in patch.grid():
        p = patch.point(u)
        # only points on the hypersurface need the extension across it
        if abs(det_at(M, p)) <= M.det_floor and not G.extension_check(p).passed:
            raise NotSimpleEquation(f"the field does not extend across the hypersurface at {p.tolist()}")
        line = flow_line(G.extended, p, reach, cfg.flow)
        pts = line(ts)
        for t, x in zip(ts, pts):
            dev = abs(G.sigma_at(x) - t)
            worst = max(worst, dev)
            samples.append((p.tolist(), float(t), float(dev)))
    return SyncReport(worst, samples)
