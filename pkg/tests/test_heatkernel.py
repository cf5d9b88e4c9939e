import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from levytrace.errors import NumericError
from levytrace.exponent import ExponentModel, RenewalScale, ScalingCertificate
from levytrace.heatkernel import (KernelEvaluator, QuadratureOptions, cauchy_density,
                                  check_gradient_bound, check_kernel_bound, gaussian_density,
                                  normalization_mass, p_at, p_zero, stable_table,
                                  stable_tail_series, write_kernel_csv)


def test_values_at_origin():
    assert p_zero(ExponentModel.stable(1.0, 2), 1.0) == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert p_zero(ExponentModel.gaussian(2), 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-9)


def test_values_off_origin():
    assert p_at(ExponentModel.stable(1.0, 2), 1.0, 1.0) == pytest.approx(
        1 / (2 * math.pi * 2 ** 1.5), rel=1e-12)
    assert p_at(ExponentModel.gaussian(2), 1.0, 2.0) == pytest.approx(
        math.exp(-1) / (4 * math.pi), rel=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_cauchy_oracle_grid(d):
    ev = KernelEvaluator(ExponentModel.stable(1.0, d))
    for t in (0.1, 1.0, 10.0):
        for u in np.linspace(0, 10, 11):
            ref = cauchy_density(t, u * t, d)
            assert ev(t, u * t) == pytest.approx(ref, rel=1e-6)


def test_stable_self_similarity():
    for a in (0.6, 1.3, 1.8):
        ev = KernelEvaluator(ExponentModel.stable(a, 2))
        for t, rho in ((0.2, 0.3), (3.0, 2.0)):
            lhs = ev(t, rho)
            rhs = t ** (-2 / a) * ev(1.0, rho * t ** (-1 / a))
            assert lhs == pytest.approx(rhs, rel=1e-8)


def test_positive_and_radially_monotone():
    for m in (ExponentModel.stable(0.7, 2), ExponentModel.stable_sum(0.5, 1.5, 3)):
        p = KernelEvaluator(m).radial(1.0, np.linspace(0, 8, 33))
        assert np.all(p > 0)
        assert np.all(np.diff(p) <= 1e-12 * p[0])


def test_table_matches_quadrature():
    tab = stable_table(1.0, 2)
    s, rho = np.array([0.05, 0.5, 2.0]), np.array([0.0, 0.3, 5.0])
    assert np.allclose(tab(s, rho), cauchy_density(s, rho, 2), rtol=1e-8)
    assert stable_tail_series(1.2, 2, np.array([200.0]))[0] == pytest.approx(
        KernelEvaluator(ExponentModel.stable(1.2, 2))(1.0, 200.0), rel=1e-9)


def test_normalization_mass():
    loose = QuadratureOptions(guard_rel=1e-6)
    g = normalization_mass(ExponentModel.gaussian(2), 1.0, 10.0, n=40, quadrature=loose)
    assert g == pytest.approx(1, abs=1e-8)
    # mass beyond R is about C t R^-alpha 2 pi / alpha, with C read off the far-field ratio
    a, t = 1.5, 1.0
    m = ExponentModel.stable(a, 2)
    far = check_kernel_bound(m, ScalingCertificate(a, a), RenewalScale.for_model(m), t,
                             np.geomspace(5, 50, 4))
    R = (far.ratio_max * 2 * math.pi * t / (a * 1e-5)) ** (1 / a)
    mass = normalization_mass(m, t, R, n=60, quadrature=loose)
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_chapman_kolmogorov():
    """int p_s(x - z) p_t(z) dz = p_{s+t}(x) in the plane."""
    tab = stable_table(1.5, 2)
    rng = np.random.default_rng(3)
    for s, t, x in rng.uniform([0.2, 0.2, 0.0], [1.0, 1.0, 1.5], (3, 3)):
        def inner(r):
            th = np.linspace(0, 2 * math.pi, 257)[:-1]
            dist = np.sqrt(x * x + r * r - 2 * x * r * np.cos(th))
            return r * tab(t, r) * np.mean(tab(s, dist)) * 2 * math.pi
        val, _ = integrate.quad(inner, 0, np.inf, limit=400, epsrel=1e-7)
        assert val == pytest.approx(float(tab(s + t, x)), rel=1e-3)


def test_kernel_bound_ratio():
    m = ExponentModel.stable(1.0, 2)
    sc, cert = RenewalScale.for_model(m), ScalingCertificate.for_model(m)
    for t in (0.1, 1.0):
        rep = check_kernel_bound(m, cert, sc, t, np.linspace(0, 10, 41))
        assert rep.finite and rep.ratio_max < 10
        assert rep.ratios[0] == pytest.approx(p_zero(m, t) * t ** 2, rel=1e-10)
    tail = check_kernel_bound(m, cert, sc, 1.0, np.geomspace(10, 1e4, 10))
    assert np.ptp(tail.ratios[-3:]) < 1e-3


def test_gradient_bound():
    m = ExponentModel.stable(1.0, 2)
    sc, cert = RenewalScale.for_model(m), ScalingCertificate.for_model(m)
    ev = KernelEvaluator(m)
    h = 1e-4
    fd = (ev(1.0, 1.0 + h) - ev(1.0, 1.0 - h)) / (2 * h)
    exact = -3 * 1.0 / (2 * math.pi) * 2.0 ** -2.5
    assert fd == pytest.approx(exact, rel=1e-5)
    rep = check_gradient_bound(ExponentModel.stable(1.5, 2), ScalingCertificate(1.5, 1.5),
                               RenewalScale.for_model(ExponentModel.stable(1.5, 2)), 1.0,
                               np.linspace(0.1, 5, 12))
    assert rep.finite
    g = ExponentModel.gaussian(2)
    rep = check_gradient_bound(g, None, RenewalScale(g), 1.0, [0.0])
    assert rep.ratio_max == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 10.0))
def test_cauchy_property(t, u):
    ev = KernelEvaluator(ExponentModel.stable(1.0, 2))
    assert ev(t, u * t) == pytest.approx(cauchy_density(t, u * t, 2), rel=1e-6)


def test_panel_cap_raises():
    ev = KernelEvaluator(ExponentModel.stable(1.0, 2),
                         QuadratureOptions(max_panels=16, osc_split="direct"))
    with pytest.raises(NumericError):
        ev.evaluate(1.0, 100.0)


def test_gaussian_closed_form_helper():
    assert gaussian_density(2.0, 0.0, 3) == pytest.approx((8 * math.pi) ** -1.5)


def test_kernel_csv(tmp_path):
    p = tmp_path / "k.csv"
    write_kernel_csv(p, KernelEvaluator(ExponentModel.stable(1.0, 2)), [(1.0, 0.0), (1.0, 1.0)])
    lines = p.read_text().splitlines()
    assert lines[0] == "t,rho,p,err_est" and len(lines) == 3
