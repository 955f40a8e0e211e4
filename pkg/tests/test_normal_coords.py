import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigmaspace.catalog import builtin_space, esp, normal_form
from sigmaspace.config import ChartConfig
from sigmaspace.errors import NotGeodesicField, NotRadical, NotSimpleEquation, SignError
from sigmaspace.geodesic import flow_chart, flow_line, integrate_flow
from sigmaspace.metric import SigmaPatch, VectorField
from sigmaspace.normal_coords import (alpha_parameterize, arclength_reparam, build_normal_chart,
                                      extract_psi, psi_line, synchronization_check, verify_normal_chart)
from sigmaspace.signed_power import spow_array

ALPHAS = (0.5, 1.0, 2.0)
SMALL = ChartConfig(n_t=8)


def _patch(M, n=3):
    return SigmaPatch.located(M, [-0.5] * (M.dim - 1), [0.5] * (M.dim - 1), n)


def _line(sp, name="rho", u=0.1, eps=0.5):
    M = sp.metric
    p = np.zeros(M.dim)
    p[:-1] = u
    return flow_line(sp.fields[name], p, eps)


# ---------------------------------------------------------------- psi

@pytest.mark.parametrize("alpha", ALPHAS)
def test_psi_is_one_for_normal_form(alpha):
    sp = normal_form(2, alpha)
    chart = flow_chart(sp.fields["rho"], _patch(sp.metric), 0.5, 4)
    ts = np.array([-0.4, -0.1, 0.0, 0.003, 0.2, 0.45])
    np.testing.assert_allclose(extract_psi(sp.metric, sp.fields["rho"], chart, [0.0], ts), 1.0, atol=1e-9)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_psi_scales_with_hbar_and_rho(alpha):
    sp = esp(2, alpha, hbar="4")
    rho = sp.fields["rho"]
    chart = flow_chart(rho, _patch(sp.metric), 0.4, 4)
    ts = np.array([-0.3, 0.0, 0.3])
    np.testing.assert_allclose(extract_psi(sp.metric, rho, chart, [0.2], ts), 2.0, rtol=1e-7)
    # doubling rho halves the flow time to reach the same point
    rho2 = VectorField.from_text(["0", "2"], sp.metric.coords)
    chart2 = flow_chart(rho2, _patch(sp.metric), 0.2, 4)
    want = 2.0 * 2.0 * 2.0 ** (1.0 / (2 * alpha))
    np.testing.assert_allclose(extract_psi(sp.metric, rho2, chart2, [0.2], ts / 2), want, rtol=1e-7)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_psi_line_relations(alpha):
    sp = builtin_space("distorted_normal", alpha=alpha, seed=3)
    pl = psi_line(sp.metric, sp.fields["rho_scaled"], _line(sp, "rho_scaled", eps=0.4), alpha)
    r = 1.0 / (2 * alpha)
    ts = np.linspace(-0.35, 0.35, 29)
    s = pl.s(ts)
    assert np.all(np.diff(s) > 0)
    assert s[14] == 0.0
    assert pl.ds_dt([0.0])[0] == pytest.approx(pl.psi0 ** (1 / (1 + r)), rel=1e-12)
    # <rho, rho> = spow(s, 1/alpha) (ds/dt)^2 away from the hypersurface
    far = np.abs(ts) > 0.02
    q = pl.speed2(ts[far])
    want = spow_array(s[far], 1 / alpha) * pl.ds_dt(ts[far], s[far]) ** 2
    np.testing.assert_allclose(q, want, rtol=1e-6)


def test_psi_line_rejects_wrong_alpha():
    sp = normal_form(2, 1.0)
    with pytest.raises(NotSimpleEquation):
        psi_line(sp.metric, sp.fields["rho"], _line(sp), 2.0)


@given(st.sampled_from(ALPHAS), st.floats(0.05, 0.9), st.floats(0.2, 5))
@settings(max_examples=20)
def test_psi_line_fast_path_matches_reference(alpha, t, c):
    sp = esp(2, alpha, hbar=repr(c))
    pl = psi_line(sp.metric, sp.fields["rho"], _line(sp, u=0.0, eps=0.95), alpha)
    for tv in (t, -t):
        ref = alpha_parameterize(lambda x: float(pl([x])[0]), alpha, tv)
        assert pl.s([tv])[0] == pytest.approx(ref, rel=1e-7)


# ---------------------------------------------------------------- alpha parameter

# |t|^(r+1) underflows below about 1e-150, so tiny nonzero t is left out
@given(st.sampled_from(ALPHAS), st.one_of(st.just(0.0), st.floats(1e-6, 2), st.floats(-2, -1e-6)))
def test_alpha_parameterize_unit_psi_is_identity(alpha, t):
    assert alpha_parameterize(lambda x: 1.0, alpha, t) == pytest.approx(t, rel=1e-10)


@given(st.sampled_from(ALPHAS), st.floats(0.1, 10), st.floats(-1, 1).filter(lambda t: abs(t) > 1e-3))
def test_alpha_parameterize_scale_covariance(alpha, c, t):
    r = 1 / (2 * alpha)
    base = alpha_parameterize(lambda x: 1 + 0.3 * math.sin(x), alpha, t)
    scaled = alpha_parameterize(lambda x: c * (1 + 0.3 * math.sin(x)), alpha, t)
    assert scaled == pytest.approx(c ** (1 / (1 + r)) * base, rel=1e-9)


def test_alpha_parameterize_from_samples():
    ts = np.linspace(-1, 1, 41)
    got = alpha_parameterize((ts, 1 + 0 * ts), 1.0, 0.7)
    assert got == pytest.approx(0.7, rel=1e-12)
    assert alpha_parameterize((ts, 1 + 0 * ts), 1.0, 0.0) == 0.0


# ---------------------------------------------------------------- arclength

def test_arclength_of_radical_line():
    sp = normal_form(2, 1.0)
    ts = np.linspace(0.0, 0.8, 17)
    tr = integrate_flow(sp.fields["rho"], [0.2, 0.0], (0, 0.8), samples=ts, M=sp.metric)
    np.testing.assert_allclose(arclength_reparam(sp.metric, tr), (2 / 3) * ts**1.5, rtol=1e-7, atol=1e-12)


def test_arclength_refuses_sign_change():
    sp = normal_form(2, 1.0)
    tr = integrate_flow(sp.fields["rho"], [0.2, -0.3], (0, 0.6), samples=13, M=sp.metric)
    with pytest.raises(SignError):
        arclength_reparam(sp.metric, tr)


# ---------------------------------------------------------------- charts

@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("m", [2, 3])
def test_normal_form_chart_is_identity(m, alpha):
    sp = normal_form(m, alpha)
    ct = build_normal_chart(sp.metric, sp.fields["rho"], _patch(sp.metric), SMALL)
    np.testing.assert_allclose(ct.s_samples, np.broadcast_to(ct.t_grid, ct.s_samples.shape), atol=1e-12)
    rep = verify_normal_chart(ct)
    assert rep.passed and rep.verdict == "pass"
    assert rep.gmm_error <= 1e-10


@pytest.mark.parametrize("alpha", ALPHAS)
def test_wrong_alpha_is_caught_by_verification(alpha):
    sp = normal_form(2, alpha)
    ct = build_normal_chart(sp.metric, sp.fields["rho"], _patch(sp.metric), SMALL)
    rep = verify_normal_chart(ct, alpha=2 * alpha)
    assert not rep.passed and "gmm_error" in rep.verdict


def test_reversed_rho_is_flipped():
    sp = normal_form(2, 1.0)
    minus = VectorField.from_text(["0", "-1"], sp.metric.coords)
    ct = build_normal_chart(sp.metric, minus, _patch(sp.metric), SMALL)
    assert ct.flipped
    assert verify_normal_chart(ct).passed


@pytest.mark.parametrize("name", ["rho", "rho_scaled"])
def test_distorted_chart_round_trip(name):
    sp = builtin_space("distorted_normal", alpha=1.0, seed=4)
    ct = build_normal_chart(sp.metric, sp.fields[name], _patch(sp.metric), SMALL)
    rep = verify_normal_chart(ct, tol=1e-4)
    assert rep.passed, rep.verdict
    for i in range(len(ct.u_grid)):
        for s in (-0.2, 0.05, 0.3):
            t = ct.t_of_s(i, s)
            assert ct.s_of_t(i, t) == pytest.approx(s, abs=1e-10)
    doc = ct.to_dict()
    assert isinstance(doc, dict) and doc


def test_discussion_example_fails_verification():
    sp = builtin_space("discussion1")
    ct = build_normal_chart(sp.metric, sp.fields["rho"], _patch(sp.metric), SMALL)
    rep = verify_normal_chart(ct)
    assert not rep.passed and "gim_error" in rep.verdict


def test_non_geodesic_field_is_rejected():
    sp = esp(2, 1.0)
    with pytest.raises(NotGeodesicField):
        build_normal_chart(sp.metric, sp.fields["rho"], _patch(sp.metric), SMALL)


def test_non_radical_field_is_rejected():
    sp = normal_form(2, 1.0)
    tilted = VectorField.from_text(["1", "1"], sp.metric.coords)
    with pytest.raises(NotRadical):
        build_normal_chart(sp.metric, tilted, _patch(sp.metric), SMALL)


def test_report_serializes():
    sp = normal_form(2, 2.0)
    rep = verify_normal_chart(build_normal_chart(sp.metric, sp.fields["rho"], _patch(sp.metric), SMALL))
    doc = rep.to_dict()
    assert doc["verdict"] == "pass" and doc["alpha"] == 2.0 and doc["n_points"] == len(rep.grid)


# ---------------------------------------------------------------- synchronization

@pytest.mark.parametrize("name", ["normal_form", "kossowski", "esp"])
def test_synchronization(name):
    sp = builtin_space(name)
    patch = SigmaPatch.hyperplane(2, [-0.5], [0.5], 4)
    rep = synchronization_check(sp.metric, sp.sigma, patch, np.linspace(-0.4, 0.4, 9))
    assert rep.max_deviation <= 1e-6
    assert len(rep.samples) == 36
    assert rep.to_dict()["n_samples"] == 36


def test_synchronization_rejects_degenerate_sigma():
    sp = normal_form(2, 1.0)
    with pytest.raises(NotSimpleEquation):
        synchronization_check(sp.metric, "x2^3", SigmaPatch.hyperplane(2, [-0.5], [0.5], 3), [0.1])
