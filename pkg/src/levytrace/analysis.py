"""Deterministic checks of the boundary-layer limit and the cone integrals.

Cone geometry (``d = 2`` by default, ``d = 3`` on request).  The vertex is at
the origin and the axis is ``e_1``.  With ``cos(phi_eps) = eps``

* ``I   = {z : z_1 >  eps |z|}``  (inner cone),
* ``U^c = {z : z_1 >= -eps |z|}`` (complement of the outer cone),

so ``U^c minus I`` is the slab ``|z_1| <= eps |z|``.  If ``phi`` is the angle
between ``z`` and ``e_1`` then on the slab
``delta_I(z) = |z| sin(phi - phi_eps)`` and
``delta_{U^c}(z) = |z| sin(pi - phi_eps - phi)``.

The angular integrand is singular like ``(phi - phi_eps)^(-alpha/2)`` at the
edge of ``I``; the substitution ``phi = phi_eps + h u^p`` with the grading
exponent ``p = 2/(2 - alpha)`` removes the singularity exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .errors import ArgumentError, NumericError
from .exponent import ExponentModel, RenewalScale
from .geometry import Ball, Domain
from .simulate import PathConfig, estimate_remainder

__all__ = [
    "LayerFunction",
    "LayerReport",
    "boundary_layer_limit",
    "ConeValue",
    "cone_integral_lemma8",
    "cone_ratio_integral_lemma57",
    "slope_fit",
    "RemainderBoundReport",
    "remainder_bound_check",
    "write_rows",
]


# ---------------------------------------------------------------------------
# boundary-layer limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerFunction:
    """``f(s) = min(1, s^-beta)`` with ``beta > 1``."""

    beta: float = 2.0
    family: str = "one_and_power"

    def __post_init__(self):
        if self.family != "one_and_power":
            raise ArgumentError(f"unknown layer family {self.family!r}")
        if not self.beta > 1:
            raise ArgumentError("the layer function needs beta > 1")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(s <= 1, 1.0, np.power(np.maximum(s, 1.0), -self.beta))

    @property
    def integral(self):
        """``int_0^inf f = 1 + 1/(beta - 1)``."""
        return 1 + 1 / (self.beta - 1)


@dataclass
class LayerReport:
    etas: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    limit: float
    limit_err: float
    target: float
    rel_error: float
    monotone: bool
    coefficients: tuple = ()

    def rows(self):
        return [(e, v, abs(v - self.target)) for e, v in zip(self.etas, self.values)]


def _layer_integral(domain: Domain, f: LayerFunction, eta):
    """``(1/eta) int_D f(delta/eta) dx = (1/eta) int_0^rho f(s/eta) A'(s) ds``."""
    top = domain.inradius
    bp = set(float(b) for b in domain.strip_breakpoints() if 0 <= b <= top)
    bp.update(float(b) for b in eta * np.geomspace(1, 1e6, 25) if b < top)
    bp.update((0.0, top))
    bp = sorted(bp)
    total, err = [], []
    for a, b in zip(bp[:-1], bp[1:]):
        if b - a <= 1e-15 * top:
            continue
        v, e = integrate.quad(lambda s: f(s / eta) * domain.strip_area_derivative(s), a, b,
                              epsabs=1e-14, epsrel=1e-12, limit=200)
        total.append(v)
        err.append(e)
    return math.fsum(total) / eta, math.fsum(err) / eta


def boundary_layer_limit(domain: Domain, f: LayerFunction, etas) -> LayerReport:
    """Values along a decreasing ``eta`` ladder and the extrapolated limit.

    The limit is fitted as ``L + a eta + b eta log(eta)`` (least squares);
    the ``eta log eta`` term comes from the ``s^-1`` part of ``s f(s)`` for
    ``beta = 2``.  ``monotone`` flags whether ``|value - target|`` decreases
    along the ladder.
    """
    etas = np.asarray(etas, dtype=float)
    if len(etas) < 3:
        raise ArgumentError("need at least three eta values")
    if np.any(np.diff(etas) >= 0):
        raise ArgumentError("eta ladder must be strictly decreasing")
    if etas[-1] < 1e-4 * domain.inradius:
        raise ArgumentError("smallest eta must be >= 1e-4 * inradius")
    vals, errs = zip(*(_layer_integral(domain, f, e) for e in etas))
    vals, errs = np.array(vals), np.array(errs)
    A = np.column_stack([np.ones_like(etas), etas, etas * np.log(etas)])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    limit = float(coef[0])
    # error: spread between the fit and the three-point fit on the finest values
    if len(etas) > 3:
        c3 = np.linalg.solve(A[-3:], vals[-3:])
        limit_err = abs(float(c3[0]) - limit)
    else:
        limit_err = float(np.max(np.abs(A @ coef - vals)))
    target = domain.perimeter * f.integral
    dev = np.abs(vals - target)
    monotone = bool(np.all(np.diff(dev) < 0))
    if not monotone:
        warnings.warn("boundary-layer values do not converge monotonically", RuntimeWarning,
                      stacklevel=2)
    return LayerReport(etas, vals, errs, limit, limit_err, target, abs(limit - target) / target,
                       monotone, tuple(float(c) for c in coef))


# ---------------------------------------------------------------------------
# cone integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeValue:
    value: float
    err: float
    eps: float
    alpha: float

    def __float__(self):
        return self.value


_GL = {n: np.polynomial.legendre.leggauss(n) for n in (16, 32, 64, 128)}


def _gl(n, a, b):
    x, w = _GL[n]
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _graded_nodes(alpha, h, n, panels=4):
    """Nodes/weights for ``int_0^h g(a) da`` with ``g ~ a^(-alpha/2)`` at 0."""
    p = 2.0 / (2.0 - alpha)
    us, ws = [], []
    for k in range(panels):
        u, w = _gl(n, k / panels, (k + 1) / panels)
        us.append(u)
        ws.append(w)
    u, w = np.concatenate(us), np.concatenate(ws)
    return h * u ** p, h * p * u ** (p - 1) * w


def _check_cone_args(eps, alpha, d):
    if not 0 < eps < 0.25:
        raise ArgumentError("eps must lie in (0, 1/4)")
    if not 0 < alpha < 2:
        raise ArgumentError("alpha must lie in (0, 2)")
    if d not in (2, 3):
        raise ArgumentError("cone integrals are implemented for d = 2 and d = 3")


def _angular(eps, alpha, d, n):
    """Angle offsets ``a = phi - phi_eps`` over the slab and their weights.

    The slab is ``phi in (phi_eps, pi - phi_eps)``; for ``d = 2`` both
    half-planes are included, for ``d = 3`` the weight carries ``sin(phi)``
    (the azimuth is integrated separately).
    """
    phe = math.acos(eps)
    width = math.pi - 2 * phe
    # singular only at a = 0 (edge of I); the U^c edge is regular for the
    # integrands considered here except through the (delta_U/delta_I) ratio,
    # which is bounded there, so one graded panel set covers the slab
    a, w = _graded_nodes(alpha, width, n)
    phi = phe + a
    if d == 2:
        return phi, a, 2 * w
    return phi, a, w * np.sin(phi)


def _radial_integral(fun, breaks, M, n, lo=0.0, decay=None):
    """``int_lo^M fun(rho) drho`` by Gauss-Legendre on geometric panels.

    For ``M = inf`` the integrand must decay like ``rho^-decay`` (``decay > 1``);
    panels run to ``1e8`` times the last break and the remainder is added
    from the power law.
    """
    edges = [lo] + [b for b in breaks if lo < b < M]
    if math.isfinite(M):
        edges.append(M)
    else:
        if decay is None or not decay > 1:
            raise ArgumentError("an infinite radial range needs a decay exponent > 1")
        edges += list(edges[-1] * np.geomspace(10, 1e8, 8))
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        # geometric refinement toward 0 in the first panel
        if a == 0.0:
            sub = np.concatenate([[0.0], b * np.geomspace(1e-8, 1, 17)])
        else:
            sub = np.geomspace(a, b, 9)
        for x0, x1 in zip(sub[:-1], sub[1:]):
            x, w = _gl(n, x0, x1)
            out.append(np.dot(w, fun(x)))
    if not math.isfinite(M):
        R = edges[-1]
        out.append(float(fun(np.array([R]))[0]) * R / (decay - 1))
    return math.fsum(out)


def _cone_quad(integrand, eps, alpha, d, breaks, M, n, lo=0.0, decay=None):
    phi, a, wphi = _angular(eps, alpha, d, n)
    if d == 2:
        def radial(rho):
            return np.array([np.dot(wphi, integrand(r, phi, a, None)) * r for r in rho])
    else:
        az, waz = _gl(n, 0.0, math.pi)
        waz = 2 * waz  # symmetric in the azimuth

        def radial(rho):
            out = np.empty(len(rho))
            for i, r in enumerate(rho):
                vals = integrand(r, phi[:, None], a[:, None], az[None, :])
                out[i] = wphi @ vals @ waz * r * r
            return out
    return _radial_integral(radial, breaks, M, n, lo, decay)


def _with_error(compute):
    """Value at the base mesh and the change under mesh refinement."""
    coarse = compute(32)
    fine = compute(64)
    return fine, abs(fine - coarse)


def cone_integral_lemma8(eps, alpha, gamma, M=math.inf, w=1.0, d=2) -> ConeValue:
    """``int_{(U^c minus I) cap B(0,M)} delta_I(z)^(-alpha/2) |z - w|^(-gamma) dz``.

    ``w`` is a point on the cone axis (pass ``|w|``) or a full vector in
    ``Gamma(0, eps)``.  For ``M = inf`` the integral converges only when
    ``gamma > d - alpha/2``; the excluded exponent ``gamma = d - alpha/2``
    raises :class:`ArgumentError`.
    """
    _check_cone_args(eps, alpha, d)
    crit = d - alpha / 2
    if abs(gamma - crit) < 1e-12:
        raise ArgumentError("gamma = d - alpha/2 is the excluded boundary case")
    if not math.isfinite(M) and gamma < crit:
        raise ArgumentError("M must be finite when gamma < d - alpha/2")
    if gamma >= d + 2 - alpha / 2:
        raise ArgumentError("gamma too large: the integral diverges at z = w")
    wv = np.atleast_1d(np.asarray(w, dtype=float))
    if wv.size == 1:
        wv = np.concatenate([wv, np.zeros(d - 1)])
    if len(wv) != d:
        raise ArgumentError("w has the wrong dimension")
    nw = float(np.linalg.norm(wv))
    if not nw > 0 or wv[0] <= math.sqrt(1 - eps * eps) * nw:
        raise ArgumentError("w must lie in Gamma(0, eps)")
    # rotate so that w sits in the (e1, e2) plane
    w1, w2 = wv[0], float(np.linalg.norm(wv[1:]))

    def integrand(r, phi, a, az):
        dI = r * np.sin(a)
        if az is None:
            # both half-planes: average the two mirror images of w
            d2p = (r * np.cos(phi) - w1) ** 2 + (r * np.sin(phi) - w2) ** 2
            d2m = (r * np.cos(phi) - w1) ** 2 + (r * np.sin(phi) + w2) ** 2
            dist = 0.5 * (d2p ** (-gamma / 2) + d2m ** (-gamma / 2))
        else:
            d2 = ((r * np.cos(phi) - w1) ** 2 + (r * np.sin(phi) * np.cos(az) - w2) ** 2
                  + (r * np.sin(phi) * np.sin(az)) ** 2)
            dist = d2 ** (-gamma / 2)
        return dI ** (-alpha / 2) * dist

    breaks = list(nw * np.geomspace(0.25, 4, 5)) + list(nw * np.geomspace(8, 1e4, 11))
    decay = gamma + alpha / 2 - d + 1
    val, err = _with_error(lambda n: _cone_quad(integrand, eps, alpha, d, breaks, M, n,
                                                decay=decay))
    if not math.isfinite(val):
        raise NumericError("cone integral did not converge")
    return ConeValue(val, err, eps, alpha)


def cone_ratio_integral_lemma57(eps, alpha, r=4.0, x=1.0, d=2, part="both",
                                form="exact") -> ConeValue:
    """``int_{(U^c minus I) cap B(0,r)} |x - z|^(-d) (delta_{U^c}/delta_I)^(alpha/2) dz``.

    ``part`` selects ``V1 = ... cap B(0,|x|)``, ``V2`` (the rest) or
    ``"both"``.  ``form="majorant"`` replaces ``delta_{U^c}(z)`` by ``|z|``,
    which is the upper bound used to estimate the integral; it is provided
    as a diagnostic.
    """
    _check_cone_args(eps, alpha, d)
    if not r > 0:
        raise ArgumentError("r must be positive")
    if part not in ("both", "V1", "V2"):
        raise ArgumentError("part must be 'V1', 'V2' or 'both'")
    if form not in ("exact", "majorant"):
        raise ArgumentError("form must be 'exact' or 'majorant'")
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if xv.size == 1:
        xv = np.concatenate([xv, np.zeros(d - 1)])
    nx = float(np.linalg.norm(xv))
    if not nx > 0 or xv[0] <= math.sqrt(1 - eps * eps) * nx:
        raise ArgumentError("x must lie in Gamma(0, eps)")
    x1, x2 = xv[0], float(np.linalg.norm(xv[1:]))
    phe = math.acos(eps)

    def integrand(rr, phi, a, az):
        dI = np.sin(a)
        dU = np.sin(math.pi - phe - phi) if form == "exact" else 1.0
        ratio = (dU / dI) ** (alpha / 2)
        if az is None:
            d2p = (rr * np.cos(phi) - x1) ** 2 + (rr * np.sin(phi) - x2) ** 2
            d2m = (rr * np.cos(phi) - x1) ** 2 + (rr * np.sin(phi) + x2) ** 2
            dist = 0.5 * (d2p ** (-d / 2) + d2m ** (-d / 2))
        else:
            d2 = ((rr * np.cos(phi) - x1) ** 2 + (rr * np.sin(phi) * np.cos(az) - x2) ** 2
                  + (rr * np.sin(phi) * np.sin(az)) ** 2)
            dist = d2 ** (-d / 2)
        return ratio * dist

    def piece(lo, hi, n):
        if hi <= lo:
            return 0.0
        breaks = [b for b in nx * np.array([0.25, 0.5, 1.0, 2.0, 4.0]) if lo < b < hi]
        return _cone_quad(integrand, eps, alpha, d, breaks, hi, n, lo)

    def compute(n):
        out = 0.0
        if part in ("both", "V1"):
            out += piece(0.0, min(nx, r), n)
        if part in ("both", "V2"):
            out += piece(min(nx, r), r, n)
        return out

    val, err = _with_error(compute)
    return ConeValue(val, err, eps, alpha)


def slope_fit(eps, values):
    """Least-squares slope of ``log(values)`` against ``log(eps)``."""
    return float(np.polyfit(np.log(np.asarray(eps, float)), np.log(np.asarray(values, float)), 1)[0])


# ---------------------------------------------------------------------------
# remainder bound
# ---------------------------------------------------------------------------

@dataclass
class RemainderBoundReport:
    ratio_max: float
    ratio_max_err: float
    deltas: np.ndarray
    ratios: np.ndarray
    ratio_errs: np.ndarray
    refined_ratio_max: float | None
    refinement_stable: bool
    finite: bool
    shallow_trend: bool
    passed: bool = field(default=False)


def _remainder_ratios(domain, model, t, points, cfg, scale, T):
    d = domain.d
    deltas = domain.signed_distance(points)
    ratios, errs = [], []
    for k, (x, dl) in enumerate(zip(points, deltas)):
        est = estimate_remainder(domain, x, t, replace(cfg, stream=cfg.stream * 1000 + k))
        bound = min(T ** (-d), t / (dl ** d * scale.V2(dl)))
        ratios.append(est.mean / bound)
        errs.append(est.stderr / bound)
    return deltas, np.array(ratios), np.array(errs)


def _shallow_trend(deltas, ratios, errs):
    """Growth toward ``delta -> 0`` that does not slow down.

    With the three shallowest points ``d1 < d2 < d3`` the log-growth per
    log-step ``g1`` (from ``d2`` to ``d1``) is compared with ``g2`` (from ``d3``
    to ``d2``).  A divergent ratio keeps ``g1 >= g2``; a saturating one has
    ``g1 < g2``.  Only resolved growth (``g1`` above two errors) counts.
    """
    order = np.argsort(deltas)[:3]
    if len(order) < 3 or np.any(ratios[order] <= 0):
        return False
    lr = np.log(ratios[order])
    le = errs[order] / ratios[order]
    ld = np.log(deltas[order])
    g1 = (lr[0] - lr[1]) / (ld[1] - ld[0])
    g2 = (lr[1] - lr[2]) / (ld[2] - ld[1])
    e1 = math.hypot(le[0], le[1]) / (ld[1] - ld[0])
    e2 = math.hypot(le[1], le[2]) / (ld[2] - ld[1])
    return bool(g1 > 2 * e1 and g1 >= g2 - 2 * math.hypot(e1, e2))


def remainder_bound_check(domain: Domain, alpha, t, points, cfg: PathConfig,
                          refine=True) -> RemainderBoundReport:
    """MC ``r_D(t, x, x)`` divided by ``min(T^-d, t / (delta^d V(delta)^2))``.

    ``refine`` reruns with the time step halved; the check is
    refinement-stable when the maxima agree within three combined errors
    or 10 percent.  See :func:`_shallow_trend` for the divergence test.
    """
    model = ExponentModel.stable(float(alpha), domain.d)
    scale = RenewalScale.for_model(model)
    T = scale.T(t)
    cfg = replace(cfg, alpha=float(alpha), d=domain.d, horizon=t)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(domain.signed_distance(pts) <= 0):
        raise ArgumentError("x-grid points must lie inside the domain")
    deltas, ratios, errs = _remainder_ratios(domain, model, t, pts, cfg, scale, T)
    i = int(np.argmax(ratios))
    refined = None
    stable = True
    if refine:
        rcfg = replace(cfg, dt=cfg.dt / 2)
        _, r2, e2 = _remainder_ratios(domain, model, t, pts, rcfg, scale, T)
        j = int(np.argmax(r2))
        refined = float(r2[j])
        tol = max(3 * math.hypot(errs[i], e2[j]), 0.1 * ratios[i])
        stable = abs(refined - ratios[i]) <= tol
    trend = _shallow_trend(deltas, ratios, errs)
    finite = bool(np.all(np.isfinite(ratios)))
    return RemainderBoundReport(float(ratios[i]), float(errs[i]), deltas, ratios, errs, refined,
                                bool(stable), finite, trend, finite and stable and not trend)


def write_rows(path, header, rows):
    """CSV with ``%.17g`` floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in row) + "\n")
