"""Numerical toolkit for metrics that degenerate on a hypersurface: signed
powers, a small expression language, transversality diagnostics, singular
quadrature with smoothness probing, geodesics, and normal coordinates."""

from .catalog import BUILTIN_NAMES, SpaceDescriptor, builtin_space
from .config import ChartConfig, FlowConfig, Ladder, ProbeConfig, TransversalityConfig
from .errors import SigmaSpaceError
from .expr import Expression, compile_expr, differentiate, evaluate, parse, to_text
from .geodesic import (FlowChart, GeodesicTrace, flow_chart, integrate_flow, integrate_geodesic,
                       pregeodesic_residual)
from .metric import (GradSigmaField, MetricField, SigmaPatch, VectorField, christoffel, det_at,
                     eval_metric, grad_sigma_field, locate_sigma, radical_direction,
                     transversality_report)
from .normal_coords import (ChartTransform, NormalChartReport, alpha_parameterize, arclength_reparam,
                            build_normal_chart, extract_psi, synchronization_check, verify_normal_chart)
from .quad_smooth import (BaldomeroSpec, baldomero_F, f_prime_zero_formula, hadamard_quotient,
                          singular_integral, smoothness_probe)
from .signed_power import eps, spow, spow_derivative

__version__ = "0.1.0"
