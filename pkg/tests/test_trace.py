import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levytrace.errors import ArgumentError, NumericError
from levytrace.geometry import Ball, Box, unit_square
from levytrace.simulate import PathConfig
from levytrace.trace import (TRACE_COLUMNS, QGridSpec, _trapezoid_with_origin, c_H,
                             ladder_trend, p0, smooth_bound_check, strip_crosscheck,
                             trace_deficit, two_term_residual, write_trace_csv)

SMALL = 2 ** 14


@pytest.fixture(scope="module")
def ch_pair():
    return [c_H(1.0, 2, t, n_paths=SMALL, seed=1) for t in (0.1, 0.05)]


def _ratio_err(a, b):
    r = a.value / b.value
    return r, r * math.hypot(a.stderr / a.value, b.stderr / b.value)


def test_q_grid_reproduces_gaussian_closed_form():
    # int_0^inf (4 pi t)^-1 exp(-q^2/t) dq = sqrt(pi t) / (8 pi t); 0.0705 at t = 1
    exact = math.sqrt(math.pi) / (8 * math.pi)
    assert exact == pytest.approx(0.0705, abs=5e-5)
    errs = []
    for n in (128, 256):
        q = QGridSpec(n=n).grid(1.0)
        errs.append(abs(_trapezoid_with_origin(q, np.exp(-q * q) / (4 * math.pi)) - exact))
    assert errs[0] < 5e-3 * exact
    # second-order rule: doubling the grid density divides the error by about 4
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_ch_time_invariance(ch_pair):
    a, b = ch_pair
    assert abs(a.value - b.value) <= 2 * math.hypot(a.err, b.err)
    assert a.tail_bound <= 0.01 * a.head


def test_ch_grid_refinement(ch_pair):
    a = ch_pair[0]
    fine = c_H(1.0, 2, 0.1, QGridSpec(n=256), n_paths=SMALL, seed=1)
    assert abs(fine.value - a.value) <= a.quad_err
    assert fine.quad_err < a.quad_err


def test_ch_tail_certificate_failure():
    with pytest.raises(NumericError, match="q_max"):
        c_H(1.0, 2, 0.1, QGridSpec(n=16, q_max=0.01, max_doublings=1), n_paths=256)


def test_ch_rejects_gaussian():
    with pytest.raises(ArgumentError):
        c_H("gaussian", 2, 0.1, n_paths=16)


def test_deficit_bounded_by_free_trace():
    for t in (0.05, 0.02):
        pc = PathConfig.with_steps(t, 64, SMALL, seed=3, alpha=1.0)
        dfc = trace_deficit(unit_square(), 1.0, t, pc)
        assert 0 < dfc.value <= p0(1.0, 2, t)
        assert sum(dfc.regions.values()) == pytest.approx(dfc.value, rel=1e-12)


def test_relative_deficit_vanishes_as_t_decreases():
    rel = []
    for t in (0.05, 0.02, 0.01):
        pc = PathConfig.with_steps(t, 64, SMALL, seed=4, alpha=1.0)
        rel.append(trace_deficit(unit_square(), 1.0, t, pc).value / p0(1.0, 2, t))
    assert rel[0] > rel[1] > rel[2]


def test_deficit_follows_perimeter():
    t = 0.01
    pc = PathConfig.with_steps(t, 64, SMALL, seed=3, alpha=1.0)
    sq = trace_deficit(unit_square(), 1.0, t, pc)
    box = trace_deficit(Box.from_sides((2.0, 1.0)), 1.0, t, pc)
    ball = trace_deficit(Ball(np.zeros(2), 1 / math.sqrt(math.pi)), 1.0, t, pc)
    r, e = _ratio_err(box, sq)
    assert abs(r - 6 / 4) <= 3 * e
    r, e = _ratio_err(ball, sq)
    assert abs(r - 2 * math.sqrt(math.pi) / 4) <= 3 * e


def test_boundary_term_linear_in_perimeter(ch_pair):
    ch = ch_pair[0]
    assert ch.boundary_term(8.0) == pytest.approx(2 * ch.boundary_term(4.0), rel=1e-15)


def test_two_term_residual_preconditions(ch_pair):
    pc = PathConfig.with_steps(0.1, 64, 64, alpha=1.0)
    with pytest.raises(ArgumentError, match="theta"):
        two_term_residual(unit_square(), 1.0, 0.1, 0.1, pc, ch_pair[0], theta=3.0)
    big = PathConfig.with_steps(0.8, 64, 64, alpha=1.0)
    with pytest.raises(ArgumentError, match="t0"):
        two_term_residual(unit_square(), 1.0, 0.8, 0.1, big, ch_pair[0])


def test_two_term_residual_deterministic(tmp_path, ch_pair):
    pc = PathConfig.with_steps(0.1, 64, 4096, seed=5, alpha=1.0)
    a = two_term_residual(unit_square(), 1.0, 0.1, 0.1, pc, ch_pair[0])
    b = two_term_residual(unit_square(), 1.0, 0.1, 0.1, pc, ch_pair[0])
    assert a.csv_row() == b.csv_row()
    assert a.normalized_residual == pytest.approx(a.residual * 0.1)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, [a])
    lines = path.read_text().splitlines()
    assert lines[0] == TRACE_COLUMNS and len(lines) == 2
    assert lines[1].split(",")[2] == "polygon[4]"


def test_ladder_trend_statuses():
    assert ladder_trend([3.0, 2.0, 1.0], [0.1] * 3).status == "pass"
    assert ladder_trend([1.0, 2.0, 1.0], [0.1] * 3).status == "fail"
    assert ladder_trend([1.0, 1.05, 1.0], [0.1] * 3).status == "inconclusive"


@given(st.lists(st.floats(0, 10), min_size=2, max_size=6), st.floats(1e-3, 1.0))
def test_ladder_trend_sorted_never_fails(values, err):
    values = sorted(values, reverse=True)
    assert ladder_trend(values, [err] * len(values)).status != "fail"


def test_strip_crosscheck_small_budget(ch_pair):
    pc = PathConfig.with_steps(0.1, 64, 2 * 8192, seed=6, alpha=1.0)
    cc = strip_crosscheck(1.0, 0.1, pc, ch_pair[0])
    assert cc.passed, cc


def test_smooth_bound_small_budget(ch_pair):
    pc = PathConfig.with_steps(0.1, 64, 8192, seed=7, alpha=1.0)
    rep = smooth_bound_check(Ball(np.zeros(2), 1.0), 1.0, (0.1, 0.05), pc, chs=ch_pair)
    assert rep.bounded and math.isfinite(rep.fitted_constant)
    with pytest.raises(ArgumentError):
        smooth_bound_check(unit_square(), 1.0, (0.1,), pc)
