"""Built-in example spaces.

``distorted_normal`` takes the normal form ``diag(1, ..., 1, spow(y_m, 1/alpha))``
in coordinates y and rewrites it in coordinates x related by a seeded
triangular diffeomorphism

    y_i = x_i + a_i sin(f x_m + phase_i),
    y_m = x_m (1 + b sin(f (x_1 + ... + x_{m-1}) + phase_m)),

with |a_i|, |b| <= amplitude. The Jacobian determinant stays positive on
[-1, 1]^m for amplitude <= 0.2 and frequency <= 1.5, and ``x_m = 0`` is
still the singular hypersurface. Metric entries and the pushed radical
field are built symbolically, so every downstream derivative is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BadParams, UnknownSpace
from .expr import Expression, Num, SPow, Var, call, differentiate, num, parse, substitute
from .metric import MetricField, VectorField, _det, default_coords

__all__ = ["SpaceDescriptor", "builtin_space", "pushforward_space", "BUILTIN_NAMES"]


@dataclass(frozen=True)
class SpaceDescriptor:
    name: str
    metric: MetricField
    fields: Mapping[str, VectorField] = field(default_factory=dict)
    sigma: Expression | None = None
    notes: str = ""

    def to_json(self) -> dict:
        """Serialize to the space-file schema read by the CLI."""
        M = self.metric
        doc = {
            "name": self.name,
            "dim": M.dim,
            "alpha": M.alpha,
            "coords": list(M.coords),
            "domain": [list(d) for d in M.domain],
            "metric": [[str(e) for e in row] for row in M.entries],
            "fields": {k: v.to_text() for k, v in self.fields.items()},
        }
        if self.sigma is not None:
            doc["sigma"] = str(self.sigma)
        if self.notes:
            doc["notes"] = self.notes
        return doc


def _box(m: int, half: float = 1.0):
    return tuple((-half, half) for _ in range(m))


def _unit_field(coords, index) -> VectorField:
    return VectorField.basis(coords, index)


def _check_common(m: int, alpha: float):
    if int(m) != m or m < 2:
        raise BadParams(f"dimension must be an integer >= 2, got {m}")
    if not alpha > 0:
        raise BadParams(f"alpha must be positive, got {alpha}")


def _diag_entries(diag: Sequence[Expression]):
    m = len(diag)
    return tuple(tuple(diag[a] if a == b else Num(0.0) for b in range(m)) for a in range(m))


def euclidean(m: int = 2) -> SpaceDescriptor:
    _check_common(m, 1.0)
    coords = default_coords(m)
    M = MetricField(1.0, _diag_entries([Num(1.0)] * m), _box(m), coords)
    return SpaceDescriptor("euclidean", M, {"e_m": _unit_field(coords, m - 1)},
                           Var(coords[-1]), "flat metric; no singular hypersurface")


def kossowski(m: int = 2) -> SpaceDescriptor:
    _check_common(m, 1.0)
    coords = default_coords(m)
    diag = [Num(1.0)] * (m - 1) + [parse(f"-{coords[-1]}", coords)]
    M = MetricField(1.0, _diag_entries(diag), _box(m), coords, Var(coords[-1]))
    return SpaceDescriptor("kossowski", M, {"rho": _unit_field(coords, m - 1)},
                           Var(coords[-1]), "g = sum dx_i^2 - x_m dx_m^2")


def normal_form(m: int = 2, alpha: float = 1.0) -> SpaceDescriptor:
    _check_common(m, alpha)
    coords = default_coords(m)
    diag = [Num(1.0)] * (m - 1) + [SPow(Var(coords[-1]), 1.0 / alpha)]
    M = MetricField(float(alpha), _diag_entries(diag), _box(m), coords, Var(coords[-1]))
    return SpaceDescriptor("normal_form", M, {"rho": _unit_field(coords, m - 1)},
                           Var(coords[-1]), "g = sum dx_i^2 + spow(x_m, 1/alpha) dx_m^2")


def _esp_block(coords) -> list[list[Expression]]:
    """Positive definite g_ij on [-1, 1]^m, depending on every coordinate."""
    m = len(coords)
    xm = coords[-1]
    block = []
    for i in range(m - 1):
        row = []
        for j in range(m - 1):
            if i == j:
                row.append(parse(f"1 + 0.25*{coords[i]}^2 + 0.1*{xm}", coords))
            else:
                a, b = sorted((i, j))
                row.append(parse(f"0.1*{coords[a]}*{coords[b]}", coords))
        block.append(row)
    return block


def esp(m: int = 2, alpha: float = 1.0, hbar: str | None = None) -> SpaceDescriptor:
    """Block-diagonal special form ``diag(g_ij, hbar * spow(x_m, 1/alpha))``."""
    _check_common(m, alpha)
    coords = default_coords(m)
    hbar_expr = parse(hbar if hbar is not None else f"1 + 0.25*{coords[0]}^2", coords)
    block = _esp_block(coords)
    entries = []
    for a in range(m):
        row = []
        for b in range(m):
            if a < m - 1 and b < m - 1:
                row.append(block[a][b])
            elif a == b:
                row.append(hbar_expr * SPow(Var(coords[-1]), 1.0 / alpha))
            else:
                row.append(Num(0.0))
        entries.append(tuple(row))
    M = MetricField(float(alpha), tuple(entries), _box(m), coords, Var(coords[-1]))
    return SpaceDescriptor("esp", M, {"rho": _unit_field(coords, m - 1)}, Var(coords[-1]),
                           f"special form with hbar = {hbar_expr}")


def discussion1() -> SpaceDescriptor:
    coords = default_coords(2)
    M = MetricField.from_text([["1", "spow(x2, 0.5)"], ["spow(x2, 0.5)", "2*x2"]], 1.0,
                              _box(2), coords, "x2")
    return SpaceDescriptor(
        "discussion1", M, {"rho": _unit_field(coords, 1)}, Var("x2"),
        "det computes to 2*x2 - abs(x2), not x2; the extension of det is not C1 at x2 = 0")


def pushforward_space(base: SpaceDescriptor, y_of_x: Sequence[Expression], name: str,
                      scale_field: Expression | None = None, notes: str = "") -> SpaceDescriptor:
    """Rewrite ``base`` (coordinates y) in coordinates x given ``y = y(x)``.

    ``g_x = J^T g_y(y(x)) J`` with ``J = dy/dx``, and each named field is
    pushed as ``J^{-1} v(y(x))`` (adjugate over determinant). ``scale_field``
    adds a copy of ``rho`` multiplied by ``exp(scale_field)``.
    """
    My = base.metric
    m = My.dim
    coords = My.coords
    ymap = {coords[a]: y_of_x[a] for a in range(m)}
    J = [[differentiate(y_of_x[a], coords[c]) for c in range(m)] for a in range(m)]
    gy = [[substitute(My.entries[a][b], ymap) for b in range(m)] for a in range(m)]

    entries = []
    for c in range(m):
        row = []
        for d in range(m):
            total: Expression = Num(0.0)
            for a in range(m):
                for b in range(m):
                    if isinstance(gy[a][b], Num) and gy[a][b].value == 0:
                        continue
                    total = total + J[a][c] * gy[a][b] * J[b][d]
            row.append(total)
        entries.append(row)
    for c in range(m):
        for d in range(c):
            entries[c][d] = entries[d][c]
    M = MetricField(My.alpha, tuple(tuple(r) for r in entries), My.domain, coords,
                    substitute(base.sigma, ymap) if base.sigma is not None else None)

    det_J = _symbolic_det(J)
    adj = _symbolic_adjugate(J)
    fields = {}
    for key, v in base.fields.items():
        vy = [substitute(comp, ymap) for comp in v.components]
        comps = []
        for c in range(m):
            acc: Expression = Num(0.0)
            for a in range(m):
                acc = acc + adj[c][a] * vy[a]
            comps.append(acc / det_J)
        fields[key] = VectorField(tuple(comps), coords)
    if scale_field is not None and "rho" in fields:
        fields["rho_scaled"] = fields["rho"].scaled(call("exp", scale_field))
    sigma = substitute(base.sigma, ymap) if base.sigma is not None else None
    return SpaceDescriptor(name, M, fields, sigma, notes)


def _symbolic_det(A) -> Expression:
    m = len(A)
    if m == 1:
        return A[0][0]
    total: Expression = Num(0.0)
    for j in range(m):
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * _symbolic_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _symbolic_adjugate(A):
    m = len(A)
    adj = [[Num(0.0)] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(A) if k != i]
            cof = _symbolic_det(minor) if minor else Num(1.0)
            adj[j][i] = cof if (i + j) % 2 == 0 else -cof
    return adj


def distortion_map(m: int, amplitude: float, frequency: float, seed: int) -> list[Expression]:
    """y(x) for the seeded triangular diffeomorphism described in the module docstring."""
    if not 0 <= amplitude <= 0.2:
        raise BadParams("amplitude must lie in [0, 0.2]")
    if not 0 < frequency <= 1.5:
        raise BadParams("frequency must lie in (0, 1.5]")
    rng = np.random.default_rng(seed)
    coeffs = amplitude * rng.uniform(0.5, 1.0, size=m) * rng.choice([-1.0, 1.0], size=m)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=m)
    coords = default_coords(m)
    xm = Var(coords[-1])
    f = num(round(frequency, 12))
    ys = []
    for i in range(m - 1):
        ys.append(Var(coords[i]) + num(coeffs[i]) * call("sin", f * xm + num(phases[i])))
    tangential: Expression = Var(coords[0])
    for i in range(1, m - 1):
        tangential = tangential + Var(coords[i])
    ys.append(xm * (Num(1.0) + num(coeffs[-1]) * call("sin", f * tangential + num(phases[-1]))))
    return ys


def distorted_normal(m: int = 2, alpha: float = 1.0, amplitude: float = 0.15,
                     frequency: float = 1.0, seed: int = 0) -> SpaceDescriptor:
    _check_common(m, alpha)
    base = normal_form(m, alpha)
    ys = distortion_map(m, amplitude, frequency, seed)
    coords = default_coords(m)
    # smooth, bounded rescaling used for the e^phi rho variant
    phi = parse(f"0.3*sin({coords[0]} + 2*{coords[-1]}) + 0.2*{coords[-1]}", coords)
    return pushforward_space(base, ys, "distorted_normal", scale_field=phi,
                             notes=f"normal form pushed through seed={seed}, amplitude={amplitude}, "
                                   f"frequency={frequency}")


_BUILDERS = {
    "euclidean": euclidean,
    "kossowski": kossowski,
    "esp": esp,
    "discussion1": discussion1,
    "normal_form": normal_form,
    "distorted_normal": distorted_normal,
}
BUILTIN_NAMES = tuple(_BUILDERS)


def builtin_space(name: str, params: Mapping | None = None, **kwargs) -> SpaceDescriptor:
    """Construct a named example space; ``params`` and keywords are merged."""
    if name not in _BUILDERS:
        raise UnknownSpace(name)
    merged = dict(params or {})
    merged.update(kwargs)
    if "m" in merged:
        merged["m"] = int(merged["m"])
    try:
        return _BUILDERS[name](**merged)
    except TypeError as exc:
        raise BadParams(f"bad parameters for {name!r}: {exc}") from None
