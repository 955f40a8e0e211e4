"""Numerical tolerances and step ladders, gathered in one place.

None of these values come from theory; they are working defaults chosen so
that the built-in spaces resolve cleanly in double precision. Every CLI
command can override them.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Ladder:
    """Geometric step schedule ``h0 * ratio**-j`` for ``j < levels``."""

    h0: float = 0.05
    levels: int = 8
    ratio: float = 2.0

    def steps(self) -> list[float]:
        return [self.h0 / self.ratio**j for j in range(self.levels)]


@dataclass(frozen=True)
class ProbeConfig:
    ladder: Ladder = field(default_factory=Ladder)
    rel_tol: float = 1e-3
    abs_floor: float = 1e-7


@dataclass(frozen=True)
class TransversalityConfig:
    ladder: Ladder = field(default_factory=lambda: Ladder(h0=1e-2, levels=11))
    rel_tol: float = 1e-3
    abs_floor: float = 1e-7
    nonzero_floor: float = 1e-6


@dataclass(frozen=True)
class FlowConfig:
    rtol: float = 1e-11
    atol: float = 1e-13
    method: str = "DOP853"
    max_step: float = float("inf")


@dataclass(frozen=True)
class ChartConfig:
    """Settings for the normal-coordinate pipeline.

    ``epsilon`` is the half-length of the flow lines, ``n_t`` the number of
    samples per side of each line, ``band_floor`` the excluded band around
    the singular hypersurface during verification, as a fraction of the
    widest domain side, and ``psi_window`` the half-width where psi comes
    from a fitted cubic instead of the metric.
    """

    epsilon: float = 0.5
    n_t: int = 12
    du: float = 1e-4
    band_floor: float = 0.05
    tol: float = 1e-4
    geodesic_tol: float = 1e-6
    psi_window: float = 0.01
    flow: FlowConfig = field(default_factory=FlowConfig)
