"""Command-line entry point: ``sigmaspace {check,baldomero,geodesic,normalize,export}``.

Exit codes: 0 when every verdict passes, 1 when an analytic verdict fails,
2 for usage, parse and schema errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import BUILTIN_NAMES, SpaceDescriptor, builtin_space
from .config import ChartConfig, TransversalityConfig
from .errors import (BadParams, DomainError, DomainExit, NoBracket, NotGeodesicField, NonPositivePsi,
                     NotSimpleEquation, NotTransverse, FoldDetected, ParseError, SigmaSpaceError,
                     UnknownSpace)
from .expr import parse
from .geodesic import integrate_geodesic
from .metric import MetricField, SigmaPatch, VectorField, default_coords, signature_mismatches, \
    transversality_report
from .normal_coords import build_normal_chart, verify_normal_chart
from .numerics import central_derivative
from .quad_smooth import BaldomeroSpec, baldomero_F, f_prime_zero_formula, lambda_names, smoothness_probe

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or a malformed input file; maps to exit code 2."""


# ---------------------------------------------------------------- I/O helpers

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _floats(text: str, n: int | None = None, name: str = "value") -> list[float]:
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{name}: expected {n} numbers, got {len(vals)}")
    return vals


def load_space(path: str | Path) -> SpaceDescriptor:
    """Read a space file (JSON) into a descriptor; any defect is a UsageError."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: top level must be an object")
    for key in ("dim", "alpha", "domain", "metric"):
        if key not in doc:
            raise UsageError(f"{path}: missing key {key!r}")
    try:
        m = int(doc["dim"])
        coords = tuple(doc.get("coords") or default_coords(m))
        if len(coords) != m:
            raise UsageError(f"{path}: {len(coords)} coords for dim {m}")
        domain = tuple((float(a), float(b)) for a, b in doc["domain"])
        rows = doc["metric"]
        if len(rows) != m or any(len(r) != m for r in rows):
            raise UsageError(f"{path}: metric must be {m}x{m}")
        entries = []
        for a, row in enumerate(rows):
            parsed = []
            for b, text in enumerate(row):
                try:
                    parsed.append(parse(str(text), coords))
                except ParseError as exc:
                    raise UsageError(f"{path}: metric[{a}][{b}]: {exc}") from None
            entries.append(tuple(parsed))
        sigma = parse(doc["sigma"], coords) if doc.get("sigma") else None
        M = MetricField(float(doc["alpha"]), tuple(entries), domain, coords, sigma)
        fields = {}
        for name, comps in (doc.get("fields") or {}).items():
            if len(comps) != m:
                raise UsageError(f"{path}: field {name!r} needs {m} components")
            try:
                fields[name] = VectorField.from_text([str(c) for c in comps], coords)
            except ParseError as exc:
                raise UsageError(f"{path}: field {name!r}: {exc}") from None
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except (TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    return SpaceDescriptor(str(doc.get("name", Path(path).stem)), M, fields, sigma, str(doc.get("notes", "")))


def _patch(M: MetricField, text: str | None, n: int) -> SigmaPatch:
    m = M.dim
    if text:
        lo_hi = _floats(text, 2, "--patch")
        lo, hi = [lo_hi[0]] * (m - 1), [lo_hi[1]] * (m - 1)
    else:
        lo = [a + 0.25 * (b - a) for a, b in M.domain[:-1]]
        hi = [b - 0.25 * (b - a) for a, b in M.domain[:-1]]
    return SigmaPatch.located(M, lo, hi, n)


def _emit(args, doc: dict, lines: list[str]) -> None:
    text = dumps(doc)
    if getattr(args, "out", None) and args.command in ("check", "normalize"):
        Path(args.out).write_text(text + "\n")
    if args.json:
        print(text)
    else:
        print("\n".join(lines))


# ---------------------------------------------------------------- commands

def cmd_check(args) -> int:
    space = load_space(args.space)
    M = space.metric
    try:
        patch = _patch(M, args.patch, args.grid)
        points = [patch.point(u) for u in patch.grid()]
    except NoBracket as exc:
        doc = {"space": space.name, "verdict": "fail(no singular points found)", "detail": str(exc),
               "samples": []}
        _emit(args, doc, [f"{space.name}: fail(no singular points found)"])
        return EXIT_FAIL
    cfg = TransversalityConfig(rel_tol=args.tol) if args.tol is not None else TransversalityConfig()
    samples, lines = [], []
    for p in points:
        try:
            rep = transversality_report(M, p, config=cfg)
            entry = rep.to_dict()
        except SigmaSpaceError as exc:
            entry = {"point": p.tolist(), "verdict": f"fail({type(exc).__name__}: {exc})"}
        samples.append(entry)
        d = entry.get("left_derivative"), entry.get("right_derivative")
        extra = "" if d[0] is None else f"  d-/d+ = {d[0]:.9g} / {d[1]:.9g}"
        lines.append(f"  at {np.round(p, 6).tolist()}: {entry['verdict']}{extra}")
    mismatches = signature_mismatches(M)
    ok = all(e["verdict"] == "pass" for e in samples) and not mismatches
    verdict = "pass" if ok else "fail"
    doc = {"space": space.name, "alpha": M.alpha, "verdict": verdict, "samples": samples,
           "signature_mismatches": [x.tolist() for x in mismatches]}
    lines.insert(0, f"{space.name} (alpha={M.alpha:g}): {verdict}")
    lines.append(f"  signature mismatches: {len(mismatches)}")
    _emit(args, doc, lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_baldomero(args) -> int:
    if not args.r > -1:
        raise UsageError(f"--r must exceed -1, got {args.r}")
    lam = _floats(args.lam, name="--lambda") if args.lam else []
    try:
        spec = BaldomeroSpec(args.r, parse(args.psi, [*lambda_names(len(lam)), "x"]),
                             tuple((v, v) for v in lam))
    except ParseError as exc:
        raise UsageError(f"--psi: {exc}") from None
    except (DomainError, SigmaSpaceError) as exc:
        raise UsageError(str(exc)) from None
    if not 1 <= args.orders <= 4:
        raise UsageError("--orders must lie in 1..4")

    def F(t):
        return baldomero_F(spec, lam, t)

    report = smoothness_probe(F, 0.0, args.orders)
    d1 = report.estimate(1)
    estimate = 0.5 * (d1.left + d1.right)
    formula = f_prime_zero_formula(spec, lam)
    rel = abs(estimate - formula) / abs(formula)
    tol = 1e-5 if args.tol is None else args.tol
    ok = report.verdict >= args.orders and rel <= tol

    ts = np.linspace(-args.tmax, args.tmax, args.samples)
    h = 1e-4 * args.tmax
    rows = []
    for t in ts:
        dF = formula if t == 0 else central_derivative(F, float(t), min(h, 0.25 * abs(t)))
        rows.append([t, F(float(t)), dF])
    order_rows = [[o.order, o.left, o.right, o.richardson_error, int(o.agree)] for o in report.orders]
    if args.out:
        out = Path(args.out)
        write_csv(out, ["t", "F", "dF"], rows)
        write_csv(out.with_name(out.stem + "_orders.csv"),
                  ["order", "left", "right", "richardson_error", "agree"], order_rows)
    doc = {"r": args.r, "psi": args.psi, "lambda": lam, "f_prime_zero_estimate": estimate,
           "f_prime_zero_formula": formula, "relative_error": rel, "verdict_order": report.verdict,
           "orders": [dict(zip(["order", "left", "right", "richardson_error", "agree"], r))
                      for r in order_rows], "pass": ok}
    lines = [f"F'(0) estimate {estimate:.9g}, formula {formula:.9g}, relative error {rel:.2e}",
             f"smoothness verdict: C^{report.verdict}" if report.verdict >= 0 else "smoothness verdict: discontinuous"]
    lines += [f"  order {o[0]}: left {o[1]:.9g}  right {o[2]:.9g}  err {o[3]:.1e}  {'agree' if o[4] else 'DISAGREE'}"
              for o in order_rows]
    lines.append("pass" if ok else "fail")
    _emit(args, doc, lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_geodesic(args) -> int:
    space = load_space(args.space)
    M = space.metric
    m = M.dim
    x0 = np.array(_floats(args.start, m, "--start"))
    v0 = np.array(_floats(args.velocity, m, "--velocity"))
    t_span = _floats(args.tspan, 2, "--tspan")
    if not M.in_domain(x0):
        raise UsageError(f"--start {x0.tolist()} is outside the domain")
    floor = M.det_floor if args.det_floor is None else args.det_floor
    tol = 1e-10 if args.tol is None else args.tol
    try:
        trace = integrate_geodesic(M, x0, v0, t_span, tol=tol, samples=args.samples, det_floor=floor)
    except DomainExit as exc:
        doc = {"status": "domain_exit", "halt_param": exc.t, "halt_point": list(exc.point)}
        _emit(args, doc, [f"left the domain at t={exc.t:.9g}, point {list(map(float, exc.point))}"])
        return EXIT_FAIL
    if args.out:
        write_csv(Path(args.out), trace.columns(), trace.rows())
    res = trace.residuals
    max_res = float(np.nanmax(res)) if res is not None and np.any(np.isfinite(res)) else float("nan")
    doc = {"space": space.name, "status": trace.status, "samples": len(trace.params),
           "max_residual": max_res, "halt_param": trace.halt_param,
           "halt_point": None if trace.halt_point is None else trace.halt_point.tolist(),
           "end_point": trace.points[-1].tolist()}
    lines = [f"{space.name}: {trace.status}, {len(trace.params)} samples, max residual {max_res:.3e}"]
    if trace.halted:
        lines.append(f"  halted near the singular hypersurface at t={trace.halt_param}, "
                     f"point {None if trace.halt_point is None else trace.halt_point.tolist()}")
    _emit(args, doc, lines)
    return EXIT_FAIL if trace.halted else EXIT_OK


def cmd_normalize(args) -> int:
    space = load_space(args.space)
    M = space.metric
    if args.field not in space.fields:
        raise UsageError(f"field {args.field!r} not in {sorted(space.fields)}")
    cfg = ChartConfig()
    overrides = {}
    if args.tol is not None:
        overrides["tol"] = args.tol
    if args.band_floor is not None:
        overrides["band_floor"] = args.band_floor
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if overrides:
        cfg = ChartConfig(**{**cfg.__dict__, **overrides})
    try:
        patch = _patch(M, args.patch, args.grid)
        ct = build_normal_chart(M, space.fields[args.field], patch, cfg)
    except (NotGeodesicField, NotSimpleEquation, NonPositivePsi, NotTransverse, FoldDetected,
            NoBracket, DomainExit) as exc:
        doc = {"space": space.name, "field": args.field, "verdict": f"fail({type(exc).__name__})",
               "detail": str(exc)}
        _emit(args, doc, [f"{space.name}/{args.field}: fail({type(exc).__name__}): {exc}"])
        return EXIT_FAIL
    rep = verify_normal_chart(ct)
    doc = {"space": space.name, "field": args.field, "verdict": rep.verdict, "report": rep.to_dict(),
           "chart": ct.to_dict()}
    lines = [f"{space.name}/{args.field}: {rep.verdict}",
             f"  gmm_error {rep.gmm_error:.3e}  gim_error {rep.gim_error:.3e}  "
             f"sigma_gim_error {rep.sigma_gim_error:.3e}  g_ij posdef {rep.gij_posdef}"]
    _emit(args, doc, lines)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _param_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def cmd_export(args) -> int:
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = _param_value(v.strip())
    if args.seed is not None:
        params["seed"] = args.seed
    try:
        space = builtin_space(args.name, params)
    except (UnknownSpace, BadParams) as exc:
        raise UsageError(str(exc)) from None
    text = dumps(space.to_json())
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print a JSON report")
    common.add_argument("--out", help="output path (CSV trace/samples or JSON report)")
    common.add_argument("--tol", type=float, help="verdict tolerance")

    ap = argparse.ArgumentParser(prog="sigmaspace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="transversality diagnostics on a space file")
    p.add_argument("space")
    p.add_argument("--grid", type=int, default=5, help="samples per axis on the hypersurface")
    p.add_argument("--patch", help="lo,hi range of the hypersurface coordinates")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("baldomero", parents=[common], help="F(t) and its smoothness at 0")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--psi", required=True, help="expression in x and l1..ln")
    p.add_argument("--lambda", dest="lam", help="comma-separated parameter values l1..ln")
    p.add_argument("--orders", type=int, default=3)
    p.add_argument("--tmax", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=41)
    p.set_defaults(func=cmd_baldomero)

    p = sub.add_parser("geodesic", parents=[common], help="integrate a geodesic, CSV trace")
    p.add_argument("space")
    p.add_argument("--start", required=True)
    p.add_argument("--velocity", required=True)
    p.add_argument("--tspan", required=True)
    p.add_argument("--samples", type=int, default=101)
    p.add_argument("--det-floor", type=float)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("normalize", parents=[common], help="build and verify normal coordinates")
    p.add_argument("space")
    p.add_argument("--field", default="rho")
    p.add_argument("--patch", help="lo,hi range of the hypersurface coordinates")
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--band-floor", type=float)
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("export", parents=[common], help="write a built-in space file")
    p.add_argument("name", choices=BUILTIN_NAMES)
    p.add_argument("--param", action="append", help="key=value, repeatable")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_export)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
