import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from levytrace import rng as rngmod
from levytrace.errors import ArgumentError
from levytrace.exponent import ExponentModel
from levytrace.geometry import Ball, unit_square
from levytrace.simulate import (PathConfig, combine, empirical_cf, empirical_laplace,
                                estimate_halfspace_remainder, estimate_remainder,
                                gaussian_halfspace, grid_steps, halfspace_profile,
                                sample_isotropic_stable_increment, sample_stable_subordinator,
                                simulate_exit, truncated_green_and_poisson)


def test_grid_steps_excludes_horizon():
    assert grid_steps(1.0, 0.25) == 3
    assert grid_steps(1.0, 0.3) == 3
    assert grid_steps(0.1, 0.1 / 64) == 63


def test_path_config_preconditions():
    with pytest.raises(ArgumentError):
        PathConfig(0.2, 1.0, 8)
    with pytest.raises(ArgumentError):
        PathConfig(0.01, 1.0, 7)
    with pytest.raises(ArgumentError):
        PathConfig(0.01, 1.0, 8, alpha=2.0)


def test_subordinator_positive():
    g = rngmod.generator(1, 0)
    for a in (0.3, 1.0, 1.9):
        assert np.all(sample_stable_subordinator(a, 0.5, g, 10000) > 0)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_laplace_transform(lam):
    r = empirical_laplace(1.0, 1.0, lam, n=200_000, seed=5)
    assert r.within(3.0), r


@pytest.mark.parametrize("alpha,xi", [(0.5, 1.0), (1.0, 0.5), (1.5, 2.0)])
def test_characteristic_function(alpha, xi):
    r = empirical_cf(alpha, 2, 1.0, xi, n=200_000, seed=9)
    assert r.within(3.0), r


def test_variance_scales_with_step_near_two():
    # S scales as t_step^(2/alpha), so the Gaussian variance 2S is nearly linear in the step
    g1, g2 = rngmod.generator(3, 1), rngmod.generator(3, 2)
    v1 = np.median(sample_stable_subordinator(1.9, 0.1, g1, 200_000))
    v2 = np.median(sample_stable_subordinator(1.9, 0.2, g2, 200_000))
    assert v2 / v1 == pytest.approx(2 ** (2 / 1.9), rel=0.03)


def test_cauchy_radial_law():
    g = rngmod.generator(11, 0)
    x = sample_isotropic_stable_increment(1.0, 2, 1.0, g, 20000)
    r = np.linalg.norm(x, axis=1)
    res = stats.kstest(r, lambda u: 1 - 1 / np.sqrt(1 + u * u))
    assert res.pvalue > 0.01


def test_isotropy():
    g = rngmod.generator(12, 0)
    x = sample_isotropic_stable_increment(1.5, 3, 1.0, g, 100_000)
    x = x[np.linalg.norm(x, axis=1) < 10]
    assert np.allclose(x.mean(axis=0), 0, atol=0.03)
    c = np.cov(x.T)
    assert np.allclose(c / np.trace(c) * 3, np.eye(3), atol=0.05)


def test_deep_start_rarely_exits():
    b = Ball(np.zeros(2), 10.0)
    cfg = PathConfig.with_steps(0.01, 32, 20000, seed=1, alpha=1.0)
    rec = simulate_exit(b, [0.0, 0.0], cfg)
    assert rec.exited.mean() < 1e-3


def test_long_horizon_exits():
    cfg = PathConfig.with_steps(20.0, 256, 2000, seed=2, alpha=1.0)
    rec = simulate_exit(unit_square(), [0.5, 0.5], cfg)
    assert rec.exited.mean() > 0.999


def test_translation_equivariance():
    cfg = PathConfig.with_steps(0.1, 64, 512, seed=4, alpha=1.2)
    sq = unit_square()
    a = simulate_exit(sq, [0.3, 0.4], cfg)
    b = simulate_exit(sq.translated((5.0, -2.0)), [5.3, -1.6], cfg)
    assert np.array_equal(a.exited, b.exited)
    assert np.array_equal(a.tau, b.tau)
    assert np.allclose(a.position[a.exited] + [5.0, -2.0], b.position[b.exited], atol=1e-12)


def test_workers_do_not_change_results():
    base = PathConfig.with_steps(0.1, 64, 3 * rngmod.BLOCK, seed=6, alpha=1.0)
    ests = [estimate_remainder(unit_square(), [0.5, 0.05], 0.1,
                               PathConfig(base.dt, base.horizon, base.n_paths, seed=6, workers=w))
            for w in (1, 3)]
    assert ests[0] == ests[1]


def test_remainder_deep_point_vanishes():
    cfg = PathConfig.with_steps(0.01, 32, 8192, seed=7, alpha=1.0)
    est = estimate_remainder(Ball(np.zeros(2), 10.0), [0, 0], 0.01, cfg)
    assert abs(est.mean) <= 3 * est.stderr + 1e-12


def test_remainder_domain_monotone():
    cfg = PathConfig.with_steps(0.05, 64, 8192, seed=8, alpha=1.0)
    x = [0.5, 0.1]
    small = estimate_remainder(unit_square(), x, 0.05, cfg)
    big = estimate_remainder(Ball([0.5, 0.5], 2.0), x, 0.05, cfg)
    assert small.mean >= big.mean - 2 * math.hypot(small.stderr, big.stderr)
    assert small.consistent_nonnegative


def test_remainder_kernel_mismatch():
    cfg = PathConfig.with_steps(0.05, 64, 16, alpha=1.0)
    with pytest.raises(ArgumentError):
        estimate_remainder(unit_square(), [0.5, 0.5], 0.05, cfg,
                           kernel=ExponentModel.stable(1.5, 2))


def test_gaussian_halfspace_oracle():
    cfg = PathConfig(1 / 256, 1.0, 100_000, seed=3, alpha="gaussian")
    res = gaussian_halfspace(0.5, cfg)
    assert abs(res.bridge.mean - res.oracle) <= 3 * res.bridge.stderr
    assert res.oracle == pytest.approx(math.exp(-0.25) / (4 * math.pi))
    # grid monitoring misses exits, so the coarse grid is biased low relative to the fine one
    assert res.bias_diff.mean < 0


def test_halfspace_limits_in_q():
    cfg = PathConfig.with_steps(0.1, 64, 8192, seed=2, alpha=1.0)
    prof = halfspace_profile(np.array([1e-4, 0.05, 0.5, 50.0]), cfg)
    p0 = 1 / (2 * math.pi * 0.1 ** 2)
    assert prof.mean[0] == pytest.approx(p0, rel=0.1)
    assert np.all(np.diff(prof.mean) < 0)
    assert prof.mean[-1] < 1e-3 * p0
    single = estimate_halfspace_remainder(1.0, 2, 0.05, 0.1, cfg)
    assert single.mean == pytest.approx(prof.mean[1], rel=1e-12)


def test_occupation_masses():
    cfg = PathConfig.with_steps(1.0, 128, 4096, seed=5, alpha=1.0)
    res = truncated_green_and_poisson(unit_square(), [0.5, 0.5], 1.0, cfg, bins=10)
    assert res.occupation_mass == pytest.approx(res.expected_time, rel=1e-9)
    assert res.poisson.sum() == pytest.approx(res.zone_exit_mass, rel=1e-9)
    g = res.green
    assert np.allclose(g, g.T, atol=5 * res.occupation_mass_err)
    assert np.allclose(g, g[::-1, :], atol=5 * res.occupation_mass_err)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40).filter(lambda v: len(v) % 2 == 0))
def test_combine_pairs(values):
    mean, se, n = combine(values)
    assert n == len(values) // 2
    assert mean == pytest.approx(np.mean(values), abs=1e-9)
    assert se >= 0
