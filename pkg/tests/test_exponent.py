import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levytrace.errors import ArgumentError, DomainError, RangeError
from levytrace.exponent import (ExponentModel, RenewalScale, ScalingCertificate, eval_psi,
                                inverse_T, load_tabulated, potter_bound_check,
                                remark_scaling_check, renewal_V, scaling_grid,
                                subadditivity_gap, verify_wlsc, verify_wusc)

alphas = st.floats(0.05, 1.95)


def test_eval_psi_closed_forms():
    assert eval_psi(ExponentModel.stable(1.0), 2.0) == 2.0
    assert eval_psi(ExponentModel.stable_sum(0.5, 1.5), 1.0) == 2.0
    assert eval_psi(ExponentModel.gaussian(), 3.0) == 9.0
    assert eval_psi(ExponentModel.stable(0.7), 0.0) == 0.0


def test_eval_psi_errors():
    with pytest.raises(DomainError):
        eval_psi(ExponentModel.stable(1.0), -1.0)
    tab = ExponentModel.tabulated([0.1, 1.0, 10.0], [0.01, 1.0, 100.0])
    with pytest.raises(RangeError):
        eval_psi(tab, 20.0)
    assert eval_psi(tab, 20.0, extrapolate=True) == pytest.approx(400.0)


def test_model_validation():
    with pytest.raises(ArgumentError):
        ExponentModel.stable(2.0)
    with pytest.raises(ArgumentError):
        ExponentModel.stable_sum(1.5, 0.5)
    with pytest.raises(ArgumentError):
        ExponentModel.stable(1.0, d=1)


@given(alphas, st.floats(1.0, 1e3), st.floats(1e-3, 1e3))
def test_stable_scaling_identity(a, lam, r):
    m = ExponentModel.stable(a)
    assert eval_psi(m, lam * r) == pytest.approx(lam ** a * eval_psi(m, r), rel=1e-12)


def test_certificates_from_the_literature():
    # psi = |xi|^a is WLSC(a,0,1) and WUSC(a,0,1); the sum is WLSC(a1,0,1) and WUSC(a2,0,1)
    for a in (0.5, 1.0, 1.5):
        m = ExponentModel.stable(a)
        cert = ScalingCertificate(a, a, 0.0, 1.0, 1.0)
        lo, hi = verify_wlsc(m, cert), verify_wusc(m, cert)
        assert lo.holds and hi.holds
        assert lo.worst_ratio == pytest.approx(1.0, rel=1e-12)
        assert hi.worst_ratio == pytest.approx(1.0, rel=1e-12)
        assert lo.n_samples == 200 * 200
    m = ExponentModel.stable_sum(0.5, 1.5)
    cert = ScalingCertificate(0.5, 1.5, 0.0, 1.0, 1.0)
    assert verify_wlsc(m, cert).holds and verify_wusc(m, cert).holds


def test_certificate_violations_have_witnesses():
    grid = (np.array([4.0]), np.array([1.0]))
    rep = verify_wlsc(ExponentModel.stable(1.0), ScalingCertificate(1.5, 1.5), grid)
    assert not rep.holds and rep.witness == (4.0, 1.0)
    assert rep.worst_ratio == pytest.approx(4 / 4 ** 1.5)
    rep = verify_wusc(ExponentModel.stable(1.5), ScalingCertificate(1.0, 1.0), grid)
    assert not rep.holds


def test_universal_certificate_on_tabulated_model():
    r = np.geomspace(1e-3, 1e5, 400)
    tab = ExponentModel.tabulated(r, r ** 0.8 + np.log1p(r))
    cert = ScalingCertificate.universal()
    grid = scaling_grid(0.0, n=60, lam_max=1e2, r_span=1e2)
    assert verify_wlsc(tab, cert, grid).holds
    assert verify_wusc(tab, cert, grid).holds


def test_certificate_checks_standing_assumption():
    with pytest.raises(ArgumentError):
        ScalingCertificate(1.5, 1.0)
    with pytest.raises(ArgumentError):
        ScalingCertificate(0.5, 1.0, c_lower=1.5)
    with pytest.raises(ArgumentError):
        verify_wlsc(ExponentModel.gaussian(), ScalingCertificate(1.0, 1.0))
    with pytest.raises(ArgumentError):
        verify_wlsc(ExponentModel.stable(1.0), ScalingCertificate(1.0, 1.0),
                    (np.array([]), np.array([])))


def test_renewal_and_inverse_examples():
    s1 = RenewalScale.for_model(ExponentModel.stable(1.0))
    assert renewal_V(s1, 1.0) == 1.0
    assert renewal_V(s1, 0.0) == 0.0
    assert renewal_V(s1, 4.0) == 2.0
    s05 = RenewalScale.for_model(ExponentModel.stable(0.5))
    assert inverse_T(s05, 0.25) == pytest.approx(0.0625, rel=1e-15)
    with pytest.raises(DomainError):
        renewal_V(s1, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-6, 2))
def test_inverse_T_round_trip_surrogate(logt):
    t = 10.0 ** logt
    sc = RenewalScale.for_model(ExponentModel.stable_sum(0.5, 1.5))
    x = inverse_T(sc, t)
    assert abs(sc.V2(x) - t) / t <= 1e-10


def test_V_monotone_and_subadditive():
    rng = np.random.default_rng(5)
    for m in (ExponentModel.stable(1.3), ExponentModel.stable_sum(0.4, 1.7)):
        sc = RenewalScale.for_model(m)
        x = np.geomspace(1e-4, 1e4, 300)
        assert np.all(np.diff(sc.V(x)) > 0)
        xs, ys = rng.uniform(0, 10, (2, 10 ** 4))
        assert np.max(subadditivity_gap(sc, xs, ys)) <= 1e-12


def test_potter_bound():
    stable = RenewalScale.for_model(ExponentModel.stable(1.2))
    cert = ScalingCertificate(1.2, 1.2)
    g = np.meshgrid(np.geomspace(1e-3, 1e3, 31), np.geomspace(1e-3, 1e3, 31))
    assert potter_bound_check(stable, cert, g).fitted_C == pytest.approx(1.0)
    ssum = RenewalScale.for_model(ExponentModel.stable_sum(0.5, 1.5))
    cs = ScalingCertificate(0.5, 1.5)
    c1 = potter_bound_check(ssum, cs, g).fitted_C
    g2 = np.meshgrid(np.geomspace(1e-3, 1e3, 61), np.geomspace(1e-3, 1e3, 61))
    c2 = potter_bound_check(ssum, cs, g2).fitted_C
    assert math.isfinite(c1) and abs(c2 - c1) <= 0.05 * c1
    assert potter_bound_check(ssum, cs, ([2.0], [2.0])).fitted_C == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        potter_bound_check(ssum, cs, ([0.0], [1.0]))


def test_remark_constants_finite():
    sc = RenewalScale.for_model(ExponentModel.stable_sum(0.5, 1.5))
    lo, hi = remark_scaling_check(sc, ScalingCertificate(0.5, 1.5), np.geomspace(1e-3, 1, 20),
                                  np.geomspace(1e-2, 1e2, 20))
    assert math.isfinite(lo) and math.isfinite(hi)


def test_load_tabulated(tmp_path):
    p = tmp_path / "psi.txt"
    p.write_text("# r psi\n0.1 0.01\n1 1\n10 100\n")
    m = load_tabulated(p)
    assert eval_psi(m, 1.0) == pytest.approx(1.0)
    p.write_text("1 1\n0.5 2\n")
    with pytest.raises(ArgumentError):
        load_tabulated(p)
