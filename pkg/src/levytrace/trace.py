"""Trace deficit, half-space constant and the two-term residual.

For the stable process ``T(t) = t^(1/alpha)`` and all quantities are
reported in the scale-free normalisation

* ``kappa = T^(d-1) int_0^inf r_H(t, q) dq``  (t-invariant for stable laws),
* boundary term ``kappa T^(1-d) H^(d-1)(boundary)``,
* ``normalized_residual = |Z_D - p_t(0)|D| + boundary term| T^(d-1)``.

``Z_D - p_t(0)|D| = -int_D r_D(t, x, x) dx``, so the residual only needs the
deficit ``int_D r_D`` which is estimated by stratified sampling of ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .errors import ArgumentError, NumericError
from .exponent import ExponentModel, RenewalScale
from .geometry import Ball, Box, Domain, GoodSetSpec, Region
from .heatkernel import gaussian_density, stable_table
from .simulate import PathConfig, combine, halfspace_profile, remainder_values

__all__ = [
    "QGridSpec",
    "CHResult",
    "DeficitResult",
    "TraceReport",
    "TrendReport",
    "c_H",
    "trace_deficit",
    "two_term_residual",
    "ladder_trend",
    "strip_crosscheck",
    "smooth_bound_check",
    "SmoothBoundReport",
    "p0",
    "T_of",
    "write_trace_csv",
    "TRACE_COLUMNS",
]

STRATA = (0.0, 1.0, 2.0, 4.0, math.inf)
STRATUM_WEIGHTS = (0.45, 0.25, 0.18, 0.12)
TRACE_COLUMNS = ("t,alpha,domain,p0_term,deficit,deficit_err,cH,cH_err,"
                 "residual,residual_err,normalized_residual")


def T_of(alpha, t):
    a = 2.0 if alpha == "gaussian" else float(alpha)
    return t ** (1.0 / a)


def p0(alpha, d, t):
    """``p_t(0)`` from the stable table (or the Gaussian closed form)."""
    if alpha == "gaussian":
        return float(gaussian_density(t, 0.0, d))
    return float(stable_table(float(alpha), d)(t, 0.0))


# ---------------------------------------------------------------------------
# half-space constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QGridSpec:
    """Graded q-grid ``T(t) * geomspace(q_min, q_max, n)`` (in units of ``T(t)``)."""

    n: int = 128
    q_min: float = 1e-4
    q_max: float = 64.0
    tail_fraction: float = 0.01
    max_doublings: int = 8

    def grid(self, T, q_max=None):
        return T * np.geomspace(self.q_min, self.q_max if q_max is None else q_max, self.n)


@dataclass
class CHResult:
    """``kappa`` (see module docstring) with its error budget.

    ``value = head + tail`` where ``head`` is the trapezoid rule on the
    q-grid over ``[0, Q_max]`` and ``tail`` the Monte Carlo path integral
    beyond ``Q_max``.  ``quad_err`` compares the trapezoid rule with the
    exact per-path integral over the same range.
    """

    t: float
    alpha: float
    d: int
    value: float
    mc_err: float
    quad_err: float
    head: float
    tail: float
    tail_bound: float
    q_max: float
    fitted_C: float
    q: np.ndarray = field(repr=False)
    r_H: np.ndarray = field(repr=False)
    r_H_err: np.ndarray = field(repr=False)
    n_effective: int = 0

    @property
    def err(self):
        return math.hypot(self.mc_err, self.quad_err)

    def boundary_term(self, perimeter):
        return self.value * T_of(self.alpha, self.t) ** (1 - self.d) * perimeter


def _trapezoid_with_origin(q, vals):
    """Trapezoid on ``[0, q_max]``; the first value is extended to ``q = 0``."""
    qq = np.concatenate([[0.0], q])
    vv = np.concatenate([vals[..., :1], vals], axis=-1)
    return np.sum(0.5 * (vv[..., 1:] + vv[..., :-1]) * np.diff(qq), axis=-1)


def c_H(alpha, d, t, qspec: QGridSpec | None = None, cfg: PathConfig | None = None,
        n_paths=2 ** 17, steps=64, seed=0, workers=1) -> CHResult:
    """Half-space constant ``kappa`` at time ``t`` from a graded q-grid.

    The stream is derived from ``t`` so different times use independent
    paths.  ``Q_max`` is doubled until the Lemma 3 type tail bound
    ``C t Q^(1-d-alpha) / (d + alpha - 1)`` (``C`` fitted on the grid) is
    below ``tail_fraction`` of the head; otherwise :class:`NumericError`.
    """
    qspec = qspec or QGridSpec()
    if cfg is None:
        cfg = PathConfig.with_steps(t, steps, n_paths, seed=seed, workers=workers,
                                    alpha=alpha, d=d)
    cfg = replace(cfg, alpha=alpha, d=d, horizon=t,
                  stream=rngmod.stream_id(f"c_H:{alpha}:{d}:{t!r}:{cfg.stream}"))
    if cfg.is_gaussian:
        raise ArgumentError("c_H is estimated for stable processes; use the closed form for the oracle")
    a = float(alpha)
    T = T_of(a, t)
    qmax = qspec.q_max
    for _ in range(qspec.max_doublings + 1):
        q = qspec.grid(T, qmax)
        prof = halfspace_profile(q, cfg, q_max=q[-1])
        vals = prof.values
        head_paths = _trapezoid_with_origin(q, vals)
        head = math.fsum(head_paths) / len(head_paths)
        # Lemma 3 shape for the stable law: r_H <= C min(T^-d, t / q^(d+alpha))
        shape = np.minimum(T ** -d, t / q ** (d + a))
        fitted = float(np.max(prof.mean / shape))
        tail_bound = fitted * t * q[-1] ** (1 - d - a) / (d + a - 1)
        if tail_bound <= qspec.tail_fraction * head:
            break
        qmax *= 2
    else:
        raise NumericError(
            f"tail certificate failed: bound {tail_bound:.3g} > {qspec.tail_fraction:.0%} of head "
            f"{head:.3g} at Q_max = {q[-1]:.3g}; increase q_max")
    exact_head = prof.head_integrals
    tail_paths = prof.path_integrals - exact_head
    n = len(head_paths)
    total_paths = head_paths + tail_paths
    value = math.fsum(total_paths) / n
    mc = float(total_paths.std(ddof=1) / math.sqrt(n))
    quad = abs(head - math.fsum(exact_head) / n)
    scale = T ** (d - 1)
    return CHResult(t, a, d, value * scale, mc * scale, quad * scale, head * scale,
                    math.fsum(tail_paths) / n * scale, tail_bound * scale, float(q[-1]), fitted,
                    q, prof.mean, prof.stderr, n)


# ---------------------------------------------------------------------------
# deficit
# ---------------------------------------------------------------------------

@dataclass
class DeficitResult:
    """``int_D r_D(t, x, x) dx`` with per-stratum and per-region parts."""

    value: float
    stderr: float
    strata: list
    regions: dict
    n_paths: int


def _sample_band(domain, rng, lo, hi, n):
    """Uniform points of ``{lo <= delta < hi}`` by bounding-box rejection."""
    blo, bhi = domain.bounding_box()
    out = []
    got = 0
    while got < n:
        x = blo + (bhi - blo) * rng.random((max(256, 2 * (n - got)), domain.d))
        dd = domain.signed_distance(x)
        x = x[(dd > 0) & (dd >= lo) & (dd < hi)]
        out.append(x)
        got += len(x)
    return np.concatenate(out)[:n]


def trace_deficit(domain: Domain, alpha, t, cfg: PathConfig, eps=0.1, r=None,
                  weights=STRATUM_WEIGHTS) -> DeficitResult:
    """Stratified Monte Carlo for ``int_D r_D(t, x, x) dx``.

    Strata are the bands ``delta_D(x) / T(t)`` in ``[0,1), [1,2), [2,4), [4,inf)``.
    Each antithetic pair of paths gets its own uniform ``x`` in the stratum.
    The result is also split over the regions D1/D2/D3 of the good-set
    decomposition with ``s = T(t) / sqrt(eps)``.
    """
    if alpha == "gaussian":
        raise ArgumentError("trace deficit is defined for the stable process")
    a = float(alpha)
    T = T_of(a, t)
    cfg = replace(cfg, alpha=a, d=domain.d, horizon=t)
    if abs(sum(weights) - 1) > 1e-12 or len(weights) != len(STRATA) - 1:
        raise ArgumentError("stratum weights must sum to 1")
    r = domain.inradius / 2 if r is None else r
    spec = GoodSetSpec(eps, r, T / math.sqrt(eps))
    strata = []
    total, var = [], []
    region_sum = {Region.D1: [], Region.D2: [], Region.D3: []}
    n_used = 0
    for k, (lo, hi) in enumerate(zip(STRATA[:-1], STRATA[1:])):
        vol = domain.strip_area(hi * T) - domain.strip_area(lo * T)
        n_pairs = max(2, int(round(weights[k] * cfg.n_paths / 2)))
        if vol <= 1e-15 * domain.volume:
            strata.append({"band": (lo, hi), "volume": 0.0, "mean": 0.0, "stderr": 0.0, "n": 0})
            continue
        g = rngmod.generator(cfg.seed, rngmod.stream_id("deficit-x"), cfg.stream, k)
        xs = _sample_band(domain, g, lo * T, hi * T, n_pairs)
        starts = np.repeat(xs, 2, axis=0)
        scfg = replace(cfg, n_paths=len(starts), stream=rngmod.stream_id(f"deficit:{cfg.stream}:{k}"),
                       antithetic=True)
        vals = remainder_values(domain, starts, scfg)
        pair = 0.5 * (vals[0::2] + vals[1::2])
        mean, se, _ = combine(pair, pair=False)
        labels = domain.classify(spec, xs)
        for reg in region_sum:
            region_sum[reg].append(vol * math.fsum(pair[labels == int(reg)]) / len(pair))
        strata.append({"band": (lo, hi), "volume": vol, "mean": mean, "stderr": se, "n": len(pair)})
        total.append(vol * mean)
        var.append((vol * se) ** 2)
        n_used += len(starts)
    regions = {reg.name: math.fsum(v) for reg, v in region_sum.items()}
    return DeficitResult(math.fsum(total), math.sqrt(math.fsum(var)), strata, regions, n_used)


# ---------------------------------------------------------------------------
# assembled residual
# ---------------------------------------------------------------------------

@dataclass
class TraceReport:
    t: float
    alpha: float
    domain: str
    p0_term: float
    deficit: float
    deficit_err: float
    c_H: float
    c_H_err: float
    residual: float
    residual_err: float
    normalized_residual: float
    normalized_err: float
    boundary_term: float
    regions: dict = field(default_factory=dict)

    def csv_row(self):
        vals = (self.t, self.alpha, self.domain, self.p0_term, self.deficit, self.deficit_err,
                self.c_H, self.c_H_err, self.residual, self.residual_err, self.normalized_residual)
        return ",".join(v if isinstance(v, str) else f"{v:.17g}" for v in vals)


def _domain_label(domain):
    if isinstance(domain, Box):
        return "box[" + "x".join(f"{s:g}" for s in domain.sides) + "]"
    if isinstance(domain, Ball):
        return f"ball[d={domain.d};R={domain.radius:g}]"
    return f"polygon[{len(domain.vertices)}]"


def two_term_residual(domain: Domain, alpha, t, eps, cfg: PathConfig, ch: CHResult | None = None,
                      theta=0.0, qspec=None) -> TraceReport:
    """Assemble ``|-deficit + kappa T^(1-d) H^(d-1)|`` and its normalisation.

    ``theta`` is the scaling threshold of the exponent; the standing
    assumption ``theta <= 1/inradius`` is checked, and ``T(t)`` must not
    exceed the inradius (``t`` below ``t0``).
    """
    a = float(alpha)
    d = domain.d
    if theta > 1 / domain.inradius:
        raise ArgumentError("theta exceeds 1/inradius (standing assumption 0 <= theta <= inf 1/delta_D)")
    T = T_of(a, t)
    if T > domain.inradius:
        raise ArgumentError(f"t={t:g} is above t0: T(t)={T:g} exceeds the inradius")
    if ch is None:
        ch = c_H(a, d, t, qspec, replace(cfg, horizon=t, dt=t / round(cfg.horizon / cfg.dt)))
    dfc = trace_deficit(domain, a, t, cfg, eps=eps)
    boundary = ch.boundary_term(domain.perimeter)
    boundary_err = ch.err * T ** (1 - d) * domain.perimeter
    signed = -dfc.value + boundary
    res_err = math.hypot(dfc.stderr, boundary_err)
    return TraceReport(t, a, _domain_label(domain), p0(a, d, t) * domain.volume, dfc.value,
                       dfc.stderr, ch.value, ch.err, abs(signed), res_err,
                       abs(signed) * T ** (d - 1), res_err * T ** (d - 1), boundary, dfc.regions)


@dataclass
class TrendReport:
    status: str  # "pass", "fail" or "inconclusive"
    diffs: list
    errors: list


def ladder_trend(values, errors, factor=2.0):
    """Check that ``values`` (ordered by decreasing t) are non-increasing within error.

    fail: some step increases by more than ``factor`` combined errors;
    pass: no such increase and at least one resolved decrease;
    inconclusive: otherwise.
    """
    diffs, errs = [], []
    for (v0, e0), (v1, e1) in zip(zip(values, errors), zip(values[1:], errors[1:])):
        diffs.append(v1 - v0)
        errs.append(math.hypot(e0, e1))
    if any(dv > factor * e for dv, e in zip(diffs, errs)):
        status = "fail"
    elif any(dv < -factor * e for dv, e in zip(diffs, errs)):
        status = "pass"
    else:
        status = "inconclusive"
    return TrendReport(status, diffs, errs)


# ---------------------------------------------------------------------------
# cross checks
# ---------------------------------------------------------------------------

@dataclass
class CrossCheck:
    strip_value: float
    strip_err: float
    ch_value: float
    ch_err: float
    z: float
    passed: bool


def strip_crosscheck(alpha, t, cfg: PathConfig, ch: CHResult, width=40.0, depth=40.0, n_pairs=None):
    """Single-face strip of a large box against the half-space integral.

    In the box ``[0, depth T] x [-width T/2, width T/2]`` the deficit per
    unit face area near the centre of the face ``x_1 = 0`` is
    ``int_0^Q r_D(t, (q, 0)) dq``; far from the other faces it should equal
    ``int r_H dq``.  ``q`` is drawn with density proportional to
    ``1 / (1 + q/T)^2`` on ``[0, Q]`` (importance sampling).
    """
    a = float(alpha)
    d = ch.d
    T = T_of(a, t)
    lower = np.array([0.0] + [-width * T / 2] * (d - 1))
    upper = np.array([depth * T] + [width * T / 2] * (d - 1))
    box = Box(lower, upper)
    Q = min(ch.q_max, depth * T / 2)
    n_pairs = cfg.n_paths // 2 if n_pairs is None else n_pairs
    g = rngmod.generator(cfg.seed, rngmod.stream_id("strip-q"), cfg.stream)
    # inverse CDF of f(q) ~ (1 + q/T)^-2 on [0, Q]
    c = 1 - 1 / (1 + Q / T)
    u = g.random(n_pairs)
    qs = T * (1 / (1 - u * c) - 1)
    dens = (1 / T) / (1 + qs / T) ** 2 / c
    starts = np.zeros((n_pairs, d))
    starts[:, 0] = qs
    starts = np.repeat(starts, 2, axis=0)
    scfg = replace(cfg, alpha=a, d=d, horizon=t, n_paths=len(starts),
                   stream=rngmod.stream_id(f"strip:{cfg.stream}"), antithetic=True)
    vals = remainder_values(box, starts, scfg)
    pair = 0.5 * (vals[0::2] + vals[1::2]) / dens
    mean, se, _ = combine(pair, pair=False)
    scale = T ** (d - 1)
    sv, serr = mean * scale, se * scale
    # compare with the half-space integral over the same range
    q = ch.q
    head_mask = q <= Q
    ref = ch.value
    if Q < ch.q_max:
        ref = float(_trapezoid_with_origin(q[head_mask], ch.r_H[head_mask])) * scale
    z = (sv - ref) / math.hypot(serr, ch.err)
    return CrossCheck(sv, serr, ref, ch.err, z, abs(z) <= 3.0)


@dataclass
class SmoothBoundReport:
    ratios: list
    ratio_errs: list
    fitted_constant: float
    bounded: bool
    reports: list


def smooth_bound_check(ball: Ball, alpha, ladder, cfg: PathConfig, eps=0.1, chs=None) -> SmoothBoundReport:
    """``residual / (p_t(0) T(t)^2 |D| / R^2)`` along a t-ladder on a ball."""
    if not isinstance(ball, Ball):
        raise ArgumentError("the smooth-domain bound is checked on balls")
    a = float(alpha)
    ratios, errs, reps = [], [], []
    for i, t in enumerate(ladder):
        tcfg = replace(cfg, horizon=t, dt=t / round(cfg.horizon / cfg.dt))
        rep = two_term_residual(ball, a, t, eps, tcfg, None if chs is None else chs[i])
        den = p0(a, ball.d, t) * T_of(a, t) ** 2 * ball.volume / ball.radius ** 2
        ratios.append(rep.residual / den)
        errs.append(rep.residual_err / den)
        reps.append(rep)
    fitted = max(r + 2 * e for r, e in zip(ratios, errs))
    growth = any(r1 - r0 > 2 * math.hypot(e0, e1) for r0, r1, e0, e1 in
                 zip(ratios, ratios[1:], errs, errs[1:]))
    bounded = all(math.isfinite(r) for r in ratios) and not growth
    return SmoothBoundReport(ratios, errs, fitted, bounded, reps)


def write_trace_csv(path, reports):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(TRACE_COLUMNS + "\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")
