"""Free-space transition densities by radial Fourier inversion.

For a radial exponent the density depends on ``rho = |x|`` only::

    p_t(rho) = c_d * int_0^inf exp(-t psi(r)) r^(d-1) j_nu(r rho) dr

with ``nu = d/2 - 1``, ``j_nu(z) = Gamma(nu+1) (2/z)^nu J_nu(z)`` and
``c_d = (2 pi)^(-d/2) / (2^nu Gamma(nu+1))``.  The integral is split into
Gauss-Legendre panels at dyadic multiples of the envelope scale and at the
zeros of ``J_nu(r rho)``.  When too many zeros are needed the oscillatory
tail is summed panel by panel and accelerated by repeated averaging of the
partial sums (Euler transform).
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .errors import ArgumentError, DomainError, NumericError
from .exponent import ExponentModel, Kind, RenewalScale, eval_psi

__all__ = [
    "QuadratureOptions",
    "KernelEvaluator",
    "KernelValue",
    "BoundReport",
    "p_zero",
    "p_at",
    "cauchy_density",
    "gaussian_density",
    "stable_tail_series",
    "StableDensityTable",
    "stable_table",
    "check_kernel_bound",
    "check_gradient_bound",
    "normalization_mass",
    "write_kernel_csv",
]

_GL_HI = np.polynomial.legendre.leggauss(24)
_GL_LO = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class QuadratureOptions:
    """Panel quadrature settings.

    ``abs_tol`` and ``rel_tol`` are measured against the mass scale
    ``c_d * int exp(-t psi) r^(d-1) dr`` (which equals ``p_t(0)``), so the
    same options work for every ``t``.  ``osc_split`` selects how the
    oscillatory tail is handled: ``"auto"`` integrates directly when at most
    ``direct_zero_cap`` Bessel zeros are needed and accelerates otherwise.

    Deep in the tail of a fast-decaying density the panels cancel to many
    digits.  When the double-precision error estimate exceeds ``guard_rel``
    of the value and at most ``extended_panel_cap`` panels are involved,
    the same panels are re-integrated with mpmath at ``extended_dps`` digits.
    """

    max_panels: int = 10_000
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11
    osc_split: str = "auto"
    direct_zero_cap: int = 2500
    head_zeros: int = 64
    tail_panels: int = 48
    guard_rel: float = 1e-9
    extended_panel_cap: int = 400
    extended_dps: int = 34

    def __post_init__(self):
        if self.osc_split not in ("auto", "direct", "euler"):
            raise ArgumentError(f"unknown osc_split strategy {self.osc_split!r}")
        if self.max_panels < 16 or self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ArgumentError("quadrature options must be positive")


@dataclass(frozen=True)
class KernelValue:
    value: float
    err_est: float
    panels: int


def _normalizer(d):
    nu = d / 2 - 1
    return (2 * math.pi) ** (-d / 2) / (2 ** nu * math.gamma(nu + 1))


def _jnorm(nu, z):
    """Gamma(nu+1) (2/z)^nu J_nu(z) with the removable singularity at 0."""
    z = np.asarray(z, dtype=float)
    if nu == 0:
        return special.j0(z)
    out = np.ones_like(z)
    nz = z > 1e-8
    zz = z[nz]
    out[nz] = math.gamma(nu + 1) * (2 / zz) ** nu * special.jv(nu, zz)
    small = ~nz
    if np.any(small):
        out[small] = 1 - z[small] ** 2 / (4 * (nu + 1))
    return out


@functools.lru_cache(maxsize=16)
def _bessel_zeros(nu, n):
    """First ``n`` positive zeros of J_nu (read-only array)."""
    if nu == int(nu):
        z = special.jn_zeros(int(nu), n)
    elif nu == 0.5:
        z = np.pi * np.arange(1, n + 1, dtype=float)
    else:
        k = np.arange(1, n + 1, dtype=float)
        beta = (k + nu / 2 - 0.25) * np.pi
        mu = 4 * nu * nu
        z = beta - (mu - 1) / (8 * beta) - 4 * (mu - 1) * (7 * mu - 31) / (3 * (8 * beta) ** 3)
        for _ in range(8):
            z = z - special.jv(nu, z) / special.jvp(nu, z)
    z = np.asarray(z, dtype=float)
    z.setflags(write=False)
    return z


def _zeros_upto(nu, count):
    count = max(int(count), 1)
    size = 1 << max(6, (count - 1).bit_length())
    return _bessel_zeros(nu, size)[:count]


class KernelEvaluator:
    """Radial density ``p_t(rho)`` of the isotropic process with exponent ``model``.

    Instances are immutable and safe to share between threads.
    """

    def __init__(self, model: ExponentModel, quadrature: QuadratureOptions | None = None):
        self.model = model
        self.quadrature = quadrature or QuadratureOptions()
        self.d = model.d
        self.nu = self.d / 2 - 1
        self._cd = _normalizer(self.d)

    def __repr__(self):
        return f"KernelEvaluator({self.model!r})"

    # -- integrand -------------------------------------------------------
    def _envelope(self, t, r):
        psi = eval_psi(self.model, r, extrapolate=True)
        return np.exp(-t * psi + (self.d - 1) * np.log(np.where(r > 0, r, 1.0))) * (r > 0)

    def _integrand(self, t, rho, r):
        f = self._envelope(t, r)
        if rho > 0:
            f = f * _jnorm(self.nu, r * rho)
        return f

    def _panels(self, t, rho, a, b):
        """Sum of GL integrals over panels [a_i, b_i]; returns (sum, err, parts)."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        mid, half = (a + b) / 2, (b - a) / 2
        out = []
        for x, w in (_GL_HI, _GL_LO):
            r = mid[:, None] + half[:, None] * x[None, :]
            out.append((self._integrand(t, rho, r) * w[None, :]).sum(axis=1) * half)
        hi, lo = out
        return hi, np.abs(hi - lo)

    def _psi_mp(self, r):
        import mpmath as mp

        m = self.model
        if m.kind is Kind.STABLE:
            return r ** m.alphas[0]
        if m.kind is Kind.STABLE_SUM:
            return r ** m.alphas[0] + r ** m.alphas[1]
        if m.kind is Kind.GAUSSIAN:
            return r * r
        lr = np.log(m.grid_r)
        lp = np.log(m.grid_psi)
        x = mp.log(r)
        i = int(np.clip(np.searchsorted(lr, float(x)) - 1, 0, lr.size - 2))
        slope = (lp[i + 1] - lp[i]) / (lr[i + 1] - lr[i])
        return mp.exp(lp[i] + slope * (x - lr[i]))

    def _panels_mp(self, t, rho, bp):
        """Re-integrate the direct-mode panels in extended precision."""
        import mpmath as mp

        with mp.workdps(self.quadrature.extended_dps):
            nu = mp.mpf(self.nu)
            g = mp.gamma(nu + 1)
            tt, rr = mp.mpf(t), mp.mpf(rho)

            def f(r):
                if r == 0:
                    return mp.mpf(0)
                z = r * rr
                if self.nu == 0.5:
                    j = mp.sin(z) / z
                else:
                    j = g * (2 / z) ** nu * mp.besselj(nu, z)
                return mp.exp(-tt * self._psi_mp(r)) * r ** (self.d - 1) * j

            val, err = mp.quad(f, [mp.mpf(float(b)) for b in bp], error=True, maxdegree=7)
            return float(val), float(err)

    def envelope_scale(self, t):
        """``r*`` with ``t psi(r*) = 1``."""
        if self.model.is_self_similar:
            return t ** (-1.0 / self.model.alpha)
        lo, hi = 1e-12, 1.0
        while t * eval_psi(self.model, hi, extrapolate=True) < 1:
            hi *= 2
            if hi > 1e300:
                raise NumericError("exponent does not grow; Hartman-Wintner growth fails")
        while t * eval_psi(self.model, lo, extrapolate=True) > 1:
            lo /= 2
        for _ in range(200):
            m = math.sqrt(lo * hi)
            if t * eval_psi(self.model, m, extrapolate=True) < 1:
                lo = m
            else:
                hi = m
            if hi / lo < 1 + 1e-12:
                break
        return hi

    def cutoff(self, t, r_star):
        """Radius beyond which ``exp(-t psi) r^d`` is below 1e-19 of its scale."""
        R = r_star
        for _ in range(2000):
            if t * eval_psi(self.model, R, extrapolate=True) >= self.d * math.log(R / r_star) + 44:
                return R
            R *= 1.25
        raise NumericError("envelope cutoff not found; exponent grows too slowly")

    # -- evaluation -----------------------------------------------------
    def evaluate(self, t, rho=0.0) -> KernelValue:
        t = float(t)
        rho = float(rho)
        if not (t > 0 and math.isfinite(t)):
            raise DomainError("kernel needs finite t > 0")
        if not (rho >= 0 and math.isfinite(rho)):
            raise DomainError("kernel needs finite rho >= 0")
        q = self.quadrature
        rs = self.envelope_scale(t)
        R = self.cutoff(t, rs)
        # dyadic breakpoints resolve the envelope near and below r*
        dy = rs * 2.0 ** np.arange(-48, 1 + math.ceil(math.log2(R / rs)))
        dy = dy[dy < R]
        n_zeros = R * rho / math.pi if rho > 0 else 0.0
        mode = q.osc_split
        if mode == "auto":
            mode = "direct" if n_zeros <= q.direct_zero_cap else "euler"
        if rho == 0 or mode == "direct":
            if rho > 0:
                zz = _zeros_upto(self.nu, int(n_zeros) + 2)
                zz = zz[zz < R * rho] / rho
            else:
                zz = np.empty(0)
            bp = np.unique(np.concatenate([[0.0], dy, zz, [R]]))
            if bp.size - 1 > q.max_panels:
                raise NumericError(f"panel budget exceeded: {bp.size - 1} > {q.max_panels}")
            parts, errs = self._panels(t, rho, bp[:-1], bp[1:])
            total, err = math.fsum(parts), float(errs.sum())
            panels = bp.size - 1
            rough = err + 1e-16 * self._mass_scale(t, rs, R)
            if (rho > 0 and panels <= q.extended_panel_cap
                    and rough > q.guard_rel * abs(total)):
                total, err = self._panels_mp(t, rho, bp[(bp == 0) | (bp >= rs / 64)])
                mode = "extended"
        else:
            total, err, panels = self._euler(t, rho, dy, R)
        scale = self._mass_scale(t, rs, R)
        value = self._cd * total
        err = self._cd * err + (1e-16 * self._cd * scale if mode != "extended" else 0.0)
        tol = max(q.abs_tol, q.rel_tol) * self._cd * scale
        if err > 1e3 * tol:
            raise NumericError(
                f"kernel quadrature did not converge at t={t:g}, rho={rho:g}: "
                f"err {err:.3g} over {panels} panels")
        if value < 0:
            if value < -max(tol, 4 * err):
                raise NumericError(f"negative density {value:.3g} at t={t:g}, rho={rho:g}")
            value = 0.0
        return KernelValue(value, err, panels)

    @functools.lru_cache(maxsize=256)
    def _mass_scale(self, t, rs, R):
        dy = rs * 2.0 ** np.arange(-48, 1 + math.ceil(math.log2(R / rs)))
        bp = np.unique(np.concatenate([[0.0], dy[dy < R], [R]]))
        parts, _ = self._panels(t, 0.0, bp[:-1], bp[1:])
        return math.fsum(parts)

    def _euler(self, t, rho, dy, R):
        q = self.quadrature
        zeros = _zeros_upto(self.nu, q.head_zeros + q.tail_panels + 1) / rho
        head_end = zeros[q.head_zeros - 1]
        bp = np.unique(np.concatenate([[0.0], dy[dy < head_end], zeros[: q.head_zeros]]))
        parts, errs = self._panels(t, rho, bp[:-1], bp[1:])
        head = math.fsum(parts)
        tz = zeros[q.head_zeros - 1:]
        tail, terr = self._panels(t, rho, tz[:-1], tz[1:])
        S = np.cumsum(tail)
        # repeated averaging of partial sums; choose the level where
        # successive estimates agree best
        best, best_err = S[-1], abs(S[-1] - S[-2])
        level = S
        while level.size > 2:
            nxt = 0.5 * (level[:-1] + level[1:])
            diff = abs(nxt[-1] - level[-1])
            if diff < best_err:
                best, best_err = nxt[-1], diff
            level = nxt
        panels = bp.size - 1 + tz.size - 1
        return head + best, float(errs.sum() + terr.sum() + best_err), panels

    def __call__(self, t, rho=0.0):
        return self.evaluate(t, rho).value

    def radial(self, t, rho):
        """Vectorised ``p_t`` over an array of radii."""
        rho = np.asarray(rho, dtype=float)
        out = np.array([self.evaluate(t, r).value for r in rho.ravel()])
        return out.reshape(rho.shape)


def p_zero(model, t, quadrature=None):
    """``p_t(0)``; see :class:`KernelEvaluator`."""
    return KernelEvaluator(model, quadrature).evaluate(t, 0.0).value


def p_at(model, t, rho, quadrature=None):
    return KernelEvaluator(model, quadrature).evaluate(t, rho).value


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def cauchy_density(t, rho, d):
    """Isotropic Cauchy (alpha = 1) density."""
    rho = np.asarray(rho, dtype=float)
    c = math.gamma((d + 1) / 2) * math.pi ** (-(d + 1) / 2)
    return c * t * (t * t + rho * rho) ** (-(d + 1) / 2)


def gaussian_density(t, rho, d):
    """Density with exponent ``|xi|^2``, i.e. covariance ``2t I``."""
    rho = np.asarray(rho, dtype=float)
    out = (4 * math.pi * t) ** (-d / 2) * np.exp(-rho * rho / (4 * t))
    return float(out) if out.ndim == 0 else out


def stable_tail_series(alpha, d, u, kmax=60):
    """Large-``u`` expansion of the stable density at ``t = 1``.

    Terms are summed while they decrease; the first term is the Levy
    density ``A(d, -alpha) u^(-d-alpha)``.
    """
    u = np.asarray(u, dtype=float)
    total = np.zeros_like(u)
    prev = np.full_like(u, np.inf)
    active = np.ones(u.shape, dtype=bool)
    lu = np.log(u)
    for k in range(1, kmax + 1):
        s = math.sin(math.pi * k * alpha / 2)
        lg = (k * alpha * math.log(2) + math.lgamma((k * alpha + d) / 2)
              + math.lgamma(1 + k * alpha / 2) - math.lgamma(k + 1))
        mag = np.exp(lg - (k * alpha + d) * lu)
        term = (-1) ** (k + 1) * s * mag
        active &= mag < prev
        total = total + np.where(active, term, 0.0)
        prev = np.where(mag > 0, mag, prev)
        if not active.any():
            break
    return total * math.pi ** (-d / 2 - 1)


# ---------------------------------------------------------------------------
# fast stable table used by the Monte Carlo estimators
# ---------------------------------------------------------------------------

class StableDensityTable:
    """Cubic spline of ``log p_1`` on an asinh grid plus the tail series.

    ``p_s(rho) = s^(-d/alpha) p_1(rho s^(-1/alpha))`` gives every time.
    Relative accuracy is about 1e-8 (checked against the quadrature).
    """

    def __init__(self, alpha, d, n=600, u_max=None):
        if not 0 < alpha <= 2:
            raise ArgumentError("stable table needs 0 < alpha <= 2")
        self.alpha, self.d = float(alpha), int(d)
        if alpha == 2:
            self.u_max = math.inf
            return
        self.u_max = float(u_max) if u_max is not None else self._pick_umax()
        ev = KernelEvaluator(ExponentModel.stable(alpha, d), QuadratureOptions(guard_rel=1e-7))
        # small alpha gives a sharp central peak; resolve it with a finer core
        self.u0 = min(1.0, 0.05 * alpha ** 3)
        g = np.linspace(0.0, math.asinh(self.u_max / self.u0), n)
        u = self.u0 * np.sinh(g)
        p = np.array([ev.evaluate(1.0, x).value for x in u])
        if np.any(p <= 0):
            raise NumericError("nonpositive stable density while building table")
        self._spline = CubicSpline(g, np.log(p))
        self.p0 = p[0]

    def _pick_umax(self):
        # tail series is asymptotic; use it only where its smallest term is tiny
        return 40.0 if self.alpha > 0.6 else 60.0

    def p1(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        if self.alpha == 2:
            return gaussian_density(1.0, u, self.d)
        out = np.empty_like(u)
        inner = u <= self.u_max
        out[inner] = np.exp(self._spline(np.arcsinh(u[inner] / self.u0)))
        if np.any(~inner):
            out[~inner] = stable_tail_series(self.alpha, self.d, u[~inner])
        return out

    def __call__(self, s, rho):
        """``p_s(rho)`` with broadcasting over ``s`` and ``rho``."""
        s = np.asarray(s, dtype=float)
        rho = np.asarray(rho, dtype=float)
        if np.any(s <= 0):
            raise DomainError("stable table needs s > 0")
        scale = s ** (-1.0 / self.alpha)
        return scale ** self.d * self.p1(rho * scale)


@functools.lru_cache(maxsize=32)
def stable_table(alpha, d):
    """Cached :class:`StableDensityTable` per ``(alpha, d)``."""
    return StableDensityTable(alpha, d)


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------

@dataclass
class BoundReport:
    ratio_max: float
    argmax: float
    ratios: np.ndarray = field(repr=False)
    finite: bool = True
    warnings: list = field(default_factory=list)


def _check_theta(scale: RenewalScale, cert, t):
    T = scale.T(t)
    if cert is not None and cert.theta > 0 and not T < 1 / cert.theta:
        raise ArgumentError(f"precondition T(t) < 1/theta fails: T(t)={T:g}, theta={cert.theta:g}")
    return T


def _bound_shape(scale, t, rho, d, first):
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore"):
        second = np.where(rho > 0, t / (rho ** d * scale.V2(rho)), np.inf)
    return np.minimum(first, second)


def check_kernel_bound(model, cert, scale, t, rho_grid, quadrature=None):
    """Max of ``p_t(rho) / min(T(t)^-d, t/(rho^d V^2(rho)))`` over the grid."""
    T = _check_theta(scale, cert, t)
    ev = KernelEvaluator(model, quadrature)
    rho = np.asarray(rho_grid, dtype=float)
    p = ev.radial(t, rho)
    ratios = p / _bound_shape(scale, t, rho, model.d, T ** (-model.d))
    i = int(np.argmax(ratios))
    return BoundReport(float(ratios[i]), float(rho[i]), ratios, bool(np.all(np.isfinite(ratios))))


def check_gradient_bound(model, cert, scale, t, rho_grid, quadrature=None):
    """Max of ``|d/drho p_t| T(t) / min(p_t(0), t/(rho^d V^2(rho)))`` by central differences."""
    T = _check_theta(scale, cert, t)
    ev = KernelEvaluator(model, quadrature)
    rho = np.asarray(rho_grid, dtype=float)
    p0 = ev.evaluate(t, 0.0).value
    grads = np.empty_like(rho)
    notes = []
    for i, r in enumerate(rho):
        h = max(1e-6, 1e-4 * r)
        if r < h:
            # radial maximum: the profile is even in rho
            grads[i] = 0.0 if r == 0 else (ev(t, r + h) - ev(t, max(r - h, 0.0))) / (r + h - max(r - h, 0))
            continue
        hi, lo = ev.evaluate(t, r + h), ev.evaluate(t, r - h)
        grads[i] = (hi.value - lo.value) / (2 * h)
        noise = (hi.err_est + lo.err_est) / (2 * h)
        if noise > 1e-3 * abs(grads[i]) and noise > 1e-12 * p0:
            notes.append(f"finite-difference noise {noise:.2g} at rho={r:g}")
    if notes:
        warnings.warn("; ".join(notes[:3]), RuntimeWarning, stacklevel=2)
    ratios = np.abs(grads) * T / _bound_shape(scale, t, rho, model.d, p0)
    i = int(np.argmax(ratios))
    return BoundReport(float(ratios[i]), float(rho[i]), ratios,
                       bool(np.all(np.isfinite(ratios))), notes)


def normalization_mass(model, t, R, n=400, quadrature=None):
    """``|S^(d-1)| int_0^R p_t(rho) rho^(d-1) drho`` by composite Gauss-Legendre on an asinh grid."""
    ev = KernelEvaluator(model, quadrature)
    d = model.d
    T = ev.envelope_scale(t) ** -1
    g = np.linspace(0, math.asinh(R / T), n)
    edges = T * np.sinh(g)
    x, w = np.polynomial.legendre.leggauss(8)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = (a + b) / 2 + (b - a) / 2 * x
        total += (b - a) / 2 * float(np.dot(w, ev.radial(t, r) * r ** (d - 1)))
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2) * total


def write_kernel_csv(path, evaluator, pairs):
    """Write ``t,rho,p,err_est`` rows for the given ``(t, rho)`` pairs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,rho,p,err_est\n")
        for t, rho in pairs:
            kv = evaluator.evaluate(t, rho)
            fh.write(f"{t:.17g},{rho:.17g},{kv.value:.17g},{kv.err_est:.17g}\n")
