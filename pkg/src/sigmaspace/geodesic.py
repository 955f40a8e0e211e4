"""Flows of vector fields, flow-box charts, geodesics off the singular
hypersurface, and parameterization-invariant geodesic residuals."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .config import FlowConfig
from .errors import DomainExit, FoldDetected, NearSingular, NotTransverse, StepFailure
from .metric import MetricField, SigmaPatch, _det, christoffel

__all__ = [
    "GeodesicTrace", "FlowLine", "FlowChart", "integrate_flow", "flow_line", "flow_chart",
    "integrate_geodesic", "pregeodesic_residual", "field_jacobian",
]

Field = Callable[[np.ndarray], np.ndarray]


@dataclass
class GeodesicTrace:
    params: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray | None = None
    speed2: np.ndarray | None = None
    residuals: np.ndarray | None = None
    status: str = "ok"
    halt_param: float | None = None
    halt_point: np.ndarray | None = None
    point_at: Callable | None = field(default=None, repr=False)
    velocity_at: Callable | None = field(default=None, repr=False)

    @property
    def halted(self) -> bool:
        return self.status != "ok"

    def columns(self) -> list[str]:
        m = self.points.shape[1]
        return (["param"] + [f"x{i + 1}" for i in range(m)] + [f"v{i + 1}" for i in range(m)]
                + ["speed2", "residual"])

    def rows(self) -> list[list[float]]:
        n = len(self.params)
        s2 = self.speed2 if self.speed2 is not None else np.full(n, np.nan)
        res = self.residuals if self.residuals is not None else np.full(n, np.nan)
        return [[float(self.params[k]), *map(float, self.points[k]), *map(float, self.velocities[k]),
                 float(s2[k]), float(res[k])] for k in range(n)]


def field_jacobian(X: Field, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Jacobian of X at x; exact when X carries a symbolic ``jacobian``."""
    if hasattr(X, "jacobian"):
        return X.jacobian(x)
    m = len(x)
    cols = []
    for i in range(m):
        dx = np.zeros(m)
        dx[i] = h
        cols.append((X(x + dx) - X(x - dx)) / (2 * h))
    return np.column_stack(cols)


def _domain_events(domain, offset: int = 0):
    events = []
    for i, (lo, hi) in enumerate(domain):
        # reaching the boundary itself is allowed
        pad = 1e-12 * (hi - lo)
        for bound, sign in ((lo, 1.0), (hi, -1.0)):
            def ev(t, y, i=i, bound=bound, sign=sign):
                return sign * (y[offset + i] - bound) + pad
            ev.terminal = True
            ev.direction = -1
            events.append(ev)
    return events


def _solve(rhs, t_span, y0, cfg: FlowConfig, events):
    sol = solve_ivp(rhs, t_span, y0, method=cfg.method, rtol=cfg.rtol, atol=cfg.atol,
                    dense_output=True, events=events or None, max_step=cfg.max_step)
    if sol.status == -1:
        raise StepFailure(sol.message)
    return sol


def integrate_flow(X: Field, p0, t_span: Sequence[float], tol: float | None = None,
                   samples: int | Sequence[float] = 101, M: MetricField | None = None,
                   domain=None, config: FlowConfig | None = None) -> GeodesicTrace:
    """Integral curve of ``X`` through ``p0`` with dense output.

    Raises DomainExit if the curve leaves ``domain`` (default: the box of ``M``
    when given) before the end of ``t_span``.
    """
    cfg = config or FlowConfig()
    if tol is not None:
        cfg = FlowConfig(rtol=tol, atol=tol * 1e-2, method=cfg.method, max_step=cfg.max_step)
    p0 = np.asarray(p0, dtype=float)
    t0, t1 = map(float, t_span)
    if domain is None and M is not None:
        domain = M.domain
    events = _domain_events(domain) if domain is not None else []
    sol = _solve(lambda t, y: X(y), (t0, t1), p0, cfg, events)
    if sol.status == 1:
        raise DomainExit(sol.t[-1], sol.y[:, -1])
    ts = np.linspace(t0, t1, samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    pts = sol.sol(ts).T
    vel = np.array([X(p) for p in pts])
    acc = np.array([field_jacobian(X, p) @ v for p, v in zip(pts, vel)])
    trace = GeodesicTrace(ts, pts, vel, acc, point_at=sol.sol, velocity_at=lambda t: X(sol.sol(t)))
    if M is not None:
        trace.speed2 = np.einsum("ka,kab,kb->k", vel, M.matrices(pts), vel)
    return trace


@dataclass
class FlowLine:
    """Integral curve of X through a point of the hypersurface, both ways."""

    origin: np.ndarray
    epsilon: float
    forward: Callable
    backward: Callable

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty((len(t), len(self.origin)))
        pos = t >= 0
        if np.any(pos):
            out[pos] = self.forward(t[pos]).T
        if np.any(~pos):
            out[~pos] = self.backward(t[~pos]).T
        return out[0] if scalar else out


def flow_line(X: Field, p, epsilon: float, config: FlowConfig | None = None, domain=None) -> FlowLine:
    cfg = config or FlowConfig()
    p = np.asarray(p, dtype=float)
    events = _domain_events(domain) if domain is not None else []
    parts = []
    for end in (epsilon, -epsilon):
        sol = _solve(lambda t, y: X(y), (0.0, end), p, cfg, events)
        if sol.status == 1:
            raise DomainExit(sol.t[-1], sol.y[:, -1])
        parts.append(sol.sol)
    return FlowLine(p, float(epsilon), parts[0], parts[1])


@dataclass
class FlowChart:
    """Samples of ``Psi(u, t)``: flow of X for time t from the patch point p(u)."""

    vector_field: Field = field(repr=False)
    patch: SigmaPatch = field(repr=False)
    epsilon: float
    u_grid: np.ndarray
    t_grid: np.ndarray
    map: np.ndarray
    jacobians: np.ndarray
    config: FlowConfig = field(default_factory=FlowConfig, repr=False)
    du: float = 1e-4
    lines: list[FlowLine] = field(default_factory=list, repr=False)
    neighbors: list[list[tuple[FlowLine, FlowLine]]] = field(default_factory=list, repr=False)

    def line(self, u) -> FlowLine:
        return flow_line(self.vector_field, self.patch.point(u), self.epsilon, self.config)

    def psi(self, u, t: float) -> np.ndarray:
        """Psi at an arbitrary (u, t); integrates a fresh flow line."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return self.line(u)(t)

    def _jacobian(self, u, t) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        cols = []
        for i in range(len(u)):
            d = np.zeros(len(u))
            d[i] = self.du
            cols.append((self.psi(u + d, t) - self.psi(u - d, t)) / (2 * self.du))
        cols.append(self.vector_field(self.psi(u, t)))
        return np.column_stack(cols)

    def inverse(self, x, tol: float = 1e-13, max_iter: int = 30) -> tuple[np.ndarray, float]:
        """Chart coordinates (u, t) of x: nearest sample, then Newton."""
        x = np.asarray(x, dtype=float)
        flat = self.map.reshape(-1, self.map.shape[-1])
        k = int(np.argmin(np.linalg.norm(flat - x, axis=1)))
        iu, it = divmod(k, len(self.t_grid))
        z = np.append(self.u_grid[iu], self.t_grid[it])
        for _ in range(max_iter):
            u, t = z[:-1], z[-1]
            r = self.psi(u, t) - x
            if np.linalg.norm(r) <= tol:
                break
            step = np.linalg.solve(self._jacobian(u, t), r)
            z = z - step
            if np.linalg.norm(step) <= tol:
                break
        return z[:-1], float(z[-1])


def flow_chart(X: Field, patch: SigmaPatch, epsilon: float, n_t: int = 11,
               config: FlowConfig | None = None, du: float = 1e-4,
               transverse_tol: float = 1e-6) -> FlowChart:
    """Sample the flow-box map ``(u, t) -> Psi(u, t)`` over the patch grid.

    Checks that X is transverse to the patch and that the Jacobian
    determinant keeps one sign (no fold) on the sampled grid.
    """
    cfg = config or FlowConfig()
    us = patch.grid()
    ts = np.linspace(-epsilon, epsilon, 2 * n_t + 1)
    m = len(patch.point(us[0]))
    maps = np.empty((len(us), len(ts), m))
    jacs = np.empty((len(us), len(ts), m, m))
    lines, neighbors = [], []
    for iu, u in enumerate(us):
        p = patch.point(u)
        T = patch.tangents(u)
        xv = X(p)
        coef, *_ = np.linalg.lstsq(T, xv, rcond=None)
        normal_part = np.linalg.norm(xv - T @ coef)
        if normal_part <= transverse_tol * max(np.linalg.norm(xv), 1e-300):
            raise NotTransverse(p, f"normal component {normal_part:.2e}")
        line = flow_line(X, p, epsilon, cfg)
        lines.append(line)
        maps[iu] = line(ts)
        cols, pairs = [], []
        for i in range(patch.dim):
            d = np.zeros(patch.dim)
            d[i] = du
            plus = flow_line(X, patch.point(u + d), epsilon, cfg)
            minus = flow_line(X, patch.point(u - d), epsilon, cfg)
            pairs.append((plus, minus))
            cols.append((plus(ts) - minus(ts)) / (2 * du))
        neighbors.append(pairs)
        vel = np.array([X(q) for q in maps[iu]])
        jacs[iu] = np.stack(cols + [vel], axis=-1)
    dets = np.array([_det(j) for j in jacs.reshape(-1, m, m)])
    if np.any(dets > 0) and np.any(dets < 0):
        raise FoldDetected("flow-box Jacobian changes sign; reduce epsilon")
    if np.any(dets == 0):
        raise FoldDetected("flow-box Jacobian is singular on the grid")
    flat = maps.reshape(-1, m)
    for a, b in itertools.combinations(range(len(flat)), 2):
        if np.array_equal(flat[a], flat[b]):
            raise FoldDetected("two grid samples map to the same point")
    return FlowChart(X, patch, float(epsilon), np.array(us), ts, maps, jacs, cfg, du, lines, neighbors)


# ---------------------------------------------------------------- geodesics

def _dense_acceleration(sol, ts, m: int, t_lo: float, t_hi: float) -> np.ndarray:
    h = 1e-5 * max(abs(t_hi - t_lo), 1e-12)
    out = []
    for t in ts:
        a, b = max(t - h, min(t_lo, t_hi)), min(t + h, max(t_lo, t_hi))
        out.append((sol(b)[m:] - sol(a)[m:]) / (b - a))
    return np.array(out)


def integrate_geodesic(M: MetricField, x0, v0, t_span: Sequence[float], tol: float = 1e-10,
                       samples: int = 101, det_floor: float | None = None) -> GeodesicTrace:
    """Solve the geodesic equation until ``t_span[1]`` or the det guard.

    Reaching ``|det g| <= det_floor`` stops the integration and returns a
    trace with ``status == "halted_near_sigma"``; leaving the domain raises
    DomainExit.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    floor = M.det_floor if det_floor is None else det_floor
    m = M.dim
    t0, t1 = map(float, t_span)
    if abs(_det(M.matrix(x0))) <= floor:
        return GeodesicTrace(np.array([t0]), x0[None, :], v0[None, :], None,
                             np.array([v0 @ M.matrix(x0) @ v0]), np.array([np.nan]),
                             "halted_near_sigma", t0, x0.copy())

    def rhs(t, y):
        x, v = y[:m], y[m:]
        gamma = christoffel(M, x, det_floor=0.0)
        return np.concatenate([v, -np.einsum("abc,b,c->a", gamma, v, v)])

    def guard(t, y):
        return abs(_det(M.matrix(y[:m]))) - floor
    guard.terminal = True
    guard.direction = -1

    cfg = FlowConfig(rtol=tol, atol=tol * 1e-2)
    sol = _solve(rhs, (t0, t1), np.concatenate([x0, v0]), cfg, [guard] + _domain_events(M.domain))
    status, halt_t, halt_x = "ok", None, None
    t_end = t1
    if sol.status == 1:
        if len(sol.t_events[0]):
            status = "halted_near_sigma"
            halt_t = float(sol.t_events[0][0])
            halt_x = sol.y_events[0][0][:m].copy()
            t_end = halt_t
        else:
            raise DomainExit(sol.t[-1], sol.y[:m, -1])
    ts = np.linspace(t0, t_end, samples)
    y = sol.sol(ts)
    pts, vel = y[:m].T, y[m:].T
    acc = _dense_acceleration(sol.sol, ts, m, t0, t_end)
    trace = GeodesicTrace(ts, pts, vel, acc, status=status, halt_param=halt_t, halt_point=halt_x,
                          point_at=lambda t: sol.sol(t)[:m], velocity_at=lambda t: sol.sol(t)[m:])
    trace.speed2 = np.einsum("ka,kab,kb->k", vel, M.matrices(pts), vel)
    trace.residuals = pregeodesic_residual(M, trace, det_floor=floor, skip_guarded=True)
    return trace


def pregeodesic_residual(M: MetricField, trace: GeodesicTrace, det_floor: float | None = None,
                         skip_guarded: bool = False) -> np.ndarray:
    """Norm of ``a + Gamma(v, v)`` with its component along v removed.

    Zero exactly when the traced image is a geodesic line under some
    reparameterization. Samples inside the det guard raise NearSingular, or
    come back as NaN with ``skip_guarded``.
    """
    floor = M.det_floor if det_floor is None else det_floor
    acc = trace.accelerations
    if acc is None:
        acc = np.gradient(trace.velocities, trace.params, axis=0, edge_order=2)
    out = np.empty(len(trace.params))
    for k, (x, v, a) in enumerate(zip(trace.points, trace.velocities, acc)):
        if abs(_det(M.matrix(x))) <= floor:
            if skip_guarded:
                out[k] = np.nan
                continue
            raise NearSingular(f"residual requested inside the det guard at {x.tolist()}")
        r = a + np.einsum("abc,b,c->a", christoffel(M, x, det_floor=floor), v, v)
        vv = float(v @ v)
        if vv > 0:
            r = r - (r @ v / vv) * v
        out[k] = float(np.linalg.norm(r))
    return out
