"""The ten acceptance criteria, one test each, at their stated tolerances.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from sigmaspace import cli
from sigmaspace.catalog import builtin_space, esp
from sigmaspace.metric import SigmaPatch, radical_direction, transversality_report
from sigmaspace.geodesic import integrate_flow, integrate_geodesic, pregeodesic_residual
from sigmaspace.normal_coords import build_normal_chart, synchronization_check, verify_normal_chart
from sigmaspace.quad_smooth import (BaldomeroSpec, baldomero_F, f_prime_zero_formula,
                                    hadamard_quotient, singular_integral, smoothness_probe)
from sigmaspace.signed_power import eps, spow

R_GRID = (0.25, 0.5, 1.0, 2.0, 3.0)
PSI_GRID = ("1", "1 + 0.3*sin(x)", "exp(0.5*x)", "2 + x - x^2", "1/(1 + x^2) + cos(3*x)")
ALPHAS = (0.5, 1.0, 2.0)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.mark.acceptance(1, "signed-power identities on 10^4 random samples")
def test_ac1_signed_power_identities(record_property):
    rng = np.random.default_rng(20240601)
    n = 10_000
    t = rng.uniform(-10, 10, n)
    s = rng.uniform(-10, 10, n)
    a = rng.uniform(0.1, 4, n)
    b = rng.uniform(0.1, 4, n)
    worst = [0.0] * 4
    for ti, si, ai, bi in zip(t, s, a, b):
        if ti == 0 or si == 0:
            continue
        worst[0] = max(worst[0], rel(spow(spow(ti, ai), bi), spow(ti, ai * bi)))
        worst[1] = max(worst[1], rel(spow(si * ti, ai), spow(si, ai) * spow(ti, ai)))
        worst[2] = max(worst[2], rel(spow(ti, -ai), 1.0 / spow(ti, ai)))
        worst[3] = max(worst[3], rel(spow(ti, ai + bi), eps(ti) * spow(ti, ai) * spow(ti, bi)))
    record_property("detail", "max rel " + ", ".join(f"{w:.1e}" for w in worst))
    assert max(worst) <= 1e-12


def _baldomero_cases():
    return [(r, BaldomeroSpec.from_text(r, psi)) for r in R_GRID for psi in PSI_GRID]


@pytest.mark.acceptance(2, "F'(0) from finite differences matches the closed form")
def test_ac2_baldomero_derivative(record_property):
    start = time.perf_counter()
    worst = 0.0
    for r, spec in _baldomero_cases():
        rep = smoothness_probe(lambda t: baldomero_F(spec, (), t), 0.0, max_order=1)
        d1 = rep.estimate(1)
        est = 0.5 * (d1.left + d1.right)
        worst = max(worst, rel(est, f_prime_zero_formula(spec, ())))
    elapsed = time.perf_counter() - start
    record_property("detail", f"25 cases, max rel {worst:.1e}, {elapsed:.1f}s")
    assert worst <= 1e-5
    assert elapsed < 10.0


@pytest.mark.acceptance(3, "smoothness verdicts: C3 grid, C0 wrong exponent, C1 for t|t|")
def test_ac3_smoothness_verdicts(record_property):
    grid_verdicts, wrong_verdicts = [], []
    for r, spec in _baldomero_cases():
        rep = smoothness_probe(lambda t: baldomero_F(spec, (), t), 0.0, max_order=3)
        grid_verdicts.append(rep.verdict)

        def wrong(t, spec=spec, r=r):
            if t == 0:
                return 0.0
            return eps(t) * abs(singular_integral(r, spec.psi, (), t)) ** (1.0 / (r + 2.0))

        wrong_verdicts.append(smoothness_probe(wrong, 0.0, max_order=3).verdict)
    tabs = smoothness_probe(lambda t: t * abs(t), 0.0, max_order=3).verdict
    record_property("detail", f"grid min C{min(grid_verdicts)}, wrong exponent "
                              f"{sorted(set(wrong_verdicts))}, t|t| C{tabs}")
    assert min(grid_verdicts) >= 3
    assert all(v == 0 for v in wrong_verdicts)
    assert tabs == 1


def _sigma_points(m, k=3):
    us = np.linspace(-0.6, 0.6, k)
    if m == 2:
        return [np.array([u, 0.0]) for u in us]
    return [np.array([u, v, 0.0]) for u in us for v in us[::2]]


@pytest.mark.acceptance(4, "transversality verdicts for kossowski, discussion1, ESP")
def test_ac4_transversality(record_property):
    K = builtin_space("kossowski").metric
    for p in _sigma_points(2):
        rep = transversality_report(K, p)
        assert rep.passed
        left, right = rep.one_sided_derivatives
        assert abs(abs(left) - 1) <= 1e-6 and abs(abs(right) - 1) <= 1e-6
    D = builtin_space("discussion1").metric
    for p in _sigma_points(2):
        rep = transversality_report(D, p)
        assert not rep.passed
        left, right = rep.one_sided_derivatives
        assert abs(left - 3) <= 1e-3 and abs(right - 1) <= 1e-3
    n_esp = 0
    for m in (2, 3):
        for alpha in ALPHAS:
            M = esp(m, alpha).metric
            for p in _sigma_points(m):
                assert transversality_report(M, p).passed
                assert not transversality_report(M, p, alpha=2 * alpha).passed
                n_esp += 1
    record_property("detail", f"kossowski |d|=1, discussion1 d-/d+=3/1, {n_esp} ESP points")


@pytest.mark.acceptance(5, "radical direction of ESP spaces is e_m within 1e-8 rad")
def test_ac5_radical_direction(record_property):
    rng = np.random.default_rng(5)
    worst = 0.0
    for m in (2, 3):
        for alpha in ALPHAS:
            M = esp(m, alpha).metric
            e_m = np.eye(m)[-1]
            for _ in range(10):
                p = np.append(rng.uniform(-0.9, 0.9, m - 1), 0.0)
                n = radical_direction(M, p)
                angle = math.acos(min(1.0, abs(float(n @ e_m)) / np.linalg.norm(n)))
                worst = max(worst, angle)
    record_property("detail", f"max angle {worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.acceptance(6, "normal-form m-lines: residual <= 1e-6, speed2 = spow(s, 1/alpha)")
def test_ac6_geodesic_residual(record_property):
    worst_res = worst_speed = 0.0
    for m in (2, 3):
        for alpha in ALPHAS:
            sp = builtin_space("normal_form", m=m, alpha=alpha)
            M, rho = sp.metric, sp.fields["rho"]
            for u in np.linspace(-0.8, 0.8, 4):
                p0 = np.zeros(m)
                p0[:-1] = u
                for end in (1.0, -1.0):
                    samples = end * np.linspace(0.05, 1.0, 40)
                    tr = integrate_flow(rho, p0, (0.0, end), samples=samples, M=M, domain=None)
                    res = pregeodesic_residual(M, tr)
                    worst_res = max(worst_res, float(np.max(res)))
                    s = tr.points[:, -1]
                    target = np.array([spow(v, 1.0 / alpha) for v in s])
                    worst_speed = max(worst_speed, float(np.max(np.abs(tr.speed2 - target))))
                    # the same lines as solutions of the geodesic equation
                    x0 = p0.copy()
                    x0[-1] = 0.05 * end
                    v0 = np.zeros(m)
                    v0[-1] = end
                    geo = integrate_geodesic(M, x0, v0, (0.0, 0.3), det_floor=0.0)
                    worst_res = max(worst_res, float(np.nanmax(geo.residuals)))
                    assert np.allclose(geo.points[:, :-1], p0[:-1], atol=1e-12)
    record_property("detail", f"max residual {worst_res:.1e}, max speed2 error {worst_speed:.1e}")
    assert worst_res <= 1e-6
    assert worst_speed <= 1e-10


@pytest.mark.acceptance(7, "normal-chart round trip on 5 seeded distortions, rho and e^phi rho")
def test_ac7_normal_chart_round_trip(record_property):
    worst_mm = worst_im = 0.0
    verdicts = []
    for seed in range(5):
        for alpha in ALPHAS:
            sp = builtin_space("distorted_normal", alpha=alpha, seed=seed)
            patch = SigmaPatch.located(sp.metric, [-0.5], [0.5], 5)
            for name in ("rho", "rho_scaled"):
                ct = build_normal_chart(sp.metric, sp.fields[name], patch)
                rep = verify_normal_chart(ct, tol=1e-4)
                verdicts.append(rep.verdict)
                worst_mm = max(worst_mm, rep.gmm_error)
                worst_im = max(worst_im, rep.gim_error, rep.sigma_gim_error)
    record_property("detail", f"{len(verdicts)} charts, gmm {worst_mm:.1e}, gim {worst_im:.1e}")
    assert all(v == "pass" for v in verdicts), verdicts
    assert worst_mm <= 1e-4 and worst_im <= 1e-4


@pytest.mark.acceptance(8, "synchronization: |sigma(flow_t(p)) - t| <= 1e-6")
def test_ac8_synchronization(record_property):
    worst = 0.0
    ts = np.linspace(-0.5, 0.5, 21)
    for alpha in ALPHAS:
        M = builtin_space("normal_form", alpha=alpha).metric
        patch = SigmaPatch.hyperplane(2, [-0.9], [0.9], 10)
        worst = max(worst, synchronization_check(M, "x2", patch, ts).max_deviation)
    record_property("detail", f"max deviation {worst:.1e}")
    assert worst <= 1e-6


HADAMARD_CORPUS = {
    "sin": math.sin,
    "exp": math.exp,
    "rational": lambda t: 1.0 / (1.0 + t * t),
    "cos3+cubic": lambda t: math.cos(3 * t) + t**3,
    "log": lambda t: math.log(2.0 + t),
    "polynomial": lambda t: 1 - 2 * t + 0.5 * t**4,
}


@pytest.mark.acceptance(9, "Hadamard quotient reconstructs f(t) - f(0) = t g(t)")
def test_ac9_hadamard(record_property):
    worst = 0.0
    for f in HADAMARD_CORPUS.values():
        for t in np.linspace(-0.9, 0.9, 19):
            if t == 0:
                continue
            lhs = f(t) - f(0.0)
            rhs = t * hadamard_quotient(f, t)
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    record_property("detail", f"max rel {worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.acceptance(10, "CLI outputs are bit-identical across runs")
def test_ac10_cli_determinism(tmp_path, record_property, capsys):
    space = tmp_path / "dn.json"
    runs = {
        "export": lambda d: ["export", "distorted_normal", "--param", "alpha=2", "--seed", "7",
                             "--out", str(d / "space.json")],
        "check": lambda d: ["check", str(space), "--grid", "3", "--json", "--out", str(d / "check.json")],
        "baldomero": lambda d: ["baldomero", "--r", "0.5", "--psi", "1+0.3*sin(x)",
                                "--out", str(d / "b.csv")],
        "geodesic": lambda d: ["geodesic", str(space), "--start", "0.2,0.4", "--velocity", "0.1,1",
                               "--tspan", "0,0.3", "--out", str(d / "g.csv")],
        "normalize": lambda d: ["normalize", str(space), "--field", "rho_scaled", "--grid", "3",
                                "--out", str(d / "chart.json")],
    }
    assert cli.main(["export", "distorted_normal", "--param", "alpha=2", "--seed", "7",
                     "--out", str(space)]) == 0
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        for args in runs.values():
            assert cli.main(args(d)) in (0, 1)
        stdout = capsys.readouterr().out
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        outputs.append((files, stdout))
    record_property("detail", f"{len(outputs[0][0])} files compared")
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
