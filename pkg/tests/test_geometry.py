import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levytrace.errors import ArgumentError, ConfigError, GeometryError
from levytrace.geometry import (Ball, Box, GoodSetSpec, Polygon2D, Region, bad_strip_measure,
                                gamma_contains, inner_outer_cones, load_polygon,
                                matched_halfspace, measures, unit_square)

SQ = unit_square()


def test_signed_distance_examples():
    assert SQ.signed_distance([0.5, 0.5]) == pytest.approx(0.5)
    assert SQ.signed_distance([0.1, 0.5]) == pytest.approx(0.1)
    assert SQ.signed_distance([1.5, 0.5]) == pytest.approx(-0.5)
    b = Ball(np.zeros(3), 2.0)
    assert b.signed_distance([0.5, 0, 0]) == pytest.approx(1.5)


def test_nearest_boundary_point():
    np_ = SQ.nearest_boundary_point([0.5, 0.1])
    assert np.allclose(np_.q, [0.5, 0.0]) and np.allclose(np_.v, [0, 1])
    assert not np_.ambiguous
    assert SQ.nearest_boundary_point([0.5, 0.5]).ambiguous
    b = Ball(np.zeros(2), 1.0)
    got = b.nearest_boundary_point([0.3, 0.4])
    assert np.allclose(got.q, [0.6, 0.8])


def test_measures():
    assert measures(SQ) == pytest.approx((1, 4, 0.5))
    assert measures(Ball(np.zeros(2), 1.0)) == pytest.approx((math.pi, 2 * math.pi, 1))
    assert measures(Box.from_sides((1, 2, 3))) == pytest.approx((6, 22, 0.5))


def test_clockwise_input_is_reoriented():
    cw = Polygon2D([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert cw.volume == pytest.approx(1.0)
    assert cw.signed_distance([0.5, 0.2]) == pytest.approx(0.2)


def test_bad_polygons_rejected():
    with pytest.raises(ArgumentError):
        Polygon2D([(0, 0), (1, 1), (1, 0), (0, 1)])  # bow tie
    with pytest.raises(ArgumentError):
        Polygon2D([(0, 0), (1, 0), (2, 0)])


def test_load_polygon_names_line(tmp_path):
    p = tmp_path / "tri.txt"
    p.write_text("# triangle\n0 0\n1 0\n0 oops\n")
    with pytest.raises(ConfigError) as info:
        load_polygon(p)
    assert info.value.line == 4 and info.value.column == 3
    p.write_text("0 0\n2 0\n0 2\n")
    assert load_polygon(p).volume == pytest.approx(2.0)


def test_good_points_square():
    for eps in (1e-3, 0.1, 0.24):
        assert SQ.is_good_point([0.5, 0.0], eps, 0.4)
    assert not SQ.is_good_point([0.0, 0.0], 0.2, 0.1)
    assert not SQ.is_good_point([0.5, 0.0], 0.1, 1.0)


def test_good_points_ball():
    b = Ball(np.zeros(2), 1.0)
    q = np.array([1.0, 0.0])
    assert b.is_good_point(q, 0.1, 0.2)
    assert not b.is_good_point(q, 0.1, 0.21)


def test_classify_regions():
    spec = GoodSetSpec(0.1, 0.2, 0.05)
    assert SQ.classify(spec, [0.5, 0.5]) == Region.D3
    assert SQ.classify(spec, [0.5, 0.025]) == Region.D2
    assert SQ.classify(spec, [0.001, 0.001]) == Region.D1


def test_gamma_and_cones():
    q, v = np.zeros(2), np.array([0.0, 1.0])
    assert gamma_contains(q, v, 0.1, 1.0, [0.0, 0.5])
    assert not gamma_contains(q, v, 0.1, 1.0, [0.0, 1.0])
    ang = math.acos(0.99)
    x = 0.5 * np.array([math.sin(ang), math.cos(ang)])
    assert gamma_contains(q, v, 0.2, 1.0, x)
    inner, outer = inner_outer_cones(q, v, 0.1, 1.0)
    assert inner([0, 0.3]) and not outer([0, 0.3])
    assert outer([0, -0.3])
    assert not inner([0.3, 0]) and not outer([0.3, 0])


def test_matched_halfspace_flat_edge():
    x = np.array([0.5, 0.05])
    H = matched_halfspace(SQ, x, [0.5, 0.0], [0.0, 1.0], 0.1, 0.3, seed=1)
    assert H.signed_distance(x) == pytest.approx(0.05, abs=1e-15)
    assert np.allclose(H.point, [0.5, 0.0])


def test_matched_halfspace_detects_bad_pairing():
    # a tilted normal makes the half-space cut through the inner cone
    v = np.array([math.sin(0.6), math.cos(0.6)])
    x = np.array([0.5, 0.0]) + 0.05 * v
    with pytest.raises(GeometryError):
        matched_halfspace(SQ, x, [0.5, 0.0], v, 0.1, 0.3, seed=1)


def test_bad_strip_ball_is_empty():
    b = Ball(np.zeros(2), 1.0)
    rep = bad_strip_measure(b, GoodSetSpec(0.1, 0.2, 0.05), n=20000)
    assert rep.measure == 0.0


def test_bad_strip_square_corner_envelope():
    prev = None
    for s in (0.1, 0.05, 0.02):
        spec = GoodSetSpec(0.1, 0.1, s)
        rep = bad_strip_measure(SQ, spec, n=40000, seed=3)
        assert rep.measure <= 8 * (s + spec.r) * s + 3 * rep.stderr
        assert rep.within_bound
        if prev is not None:
            assert rep.measure <= prev
        prev = rep.measure


def test_strip_area_matches_inset():
    for s in (0.0, 0.1, 0.3, 0.5):
        assert SQ.strip_area(s) == pytest.approx(1 - max(1 - 2 * s, 0) ** 2, abs=1e-14)
    b = Ball(np.zeros(2), 1.0)
    assert b.strip_area(0.25) == pytest.approx(math.pi * (1 - 0.75 ** 2))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_translation_invariance(dx, dy, x, y):
    moved = SQ.translated((dx, dy))
    assert moved.signed_distance([x + dx, y + dy]) == pytest.approx(
        SQ.signed_distance([x, y]), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_distance_is_one_lipschitz_and_attained(x, y):
    p = np.array([x, y])
    np_ = SQ.nearest_boundary_point(p)
    assert np.linalg.norm(p - np_.q) == pytest.approx(SQ.signed_distance(p), abs=1e-12)
    q = p + np.array([1e-3, -2e-3])
    assert abs(SQ.signed_distance(q) - SQ.signed_distance(p)) <= np.linalg.norm(q - p) + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.floats(0.3, 3.0))
def test_ball_strip_derivative(d, R):
    b = Ball(np.zeros(d), R)
    s, h = 0.3 * R, 1e-6 * R
    fd = (b.strip_area(s + h) - b.strip_area(s - h)) / (2 * h)
    assert fd == pytest.approx(b.strip_area_derivative(s), rel=1e-6)
