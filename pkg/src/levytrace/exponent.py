"""Radial characteristic exponents, weak scaling certificates and renewal scales.

An exponent ``psi`` is stored as a radial function ``psi(r)``, ``r = |xi|``.
The renewal scale ``V`` is exact for stable exponents (``V(x) = x**(alpha/2)``)
and otherwise replaced by the comparable surrogate ``1/sqrt(psi(1/x))``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import ArgumentError, DomainError, NumericError, RangeError

__all__ = [
    "Kind",
    "ExponentModel",
    "ScalingCertificate",
    "ScalingReport",
    "PotterReport",
    "RenewalScale",
    "eval_psi",
    "verify_wlsc",
    "verify_wusc",
    "renewal_V",
    "inverse_T",
    "potter_bound_check",
    "remark_scaling_check",
    "subadditivity_gap",
    "scaling_grid",
    "load_tabulated",
]

DETERMINISTIC_RTOL = 1e-9


class Kind(enum.Enum):
    STABLE = "stable"
    STABLE_SUM = "stable_sum"
    GAUSSIAN = "gaussian"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class ExponentModel:
    """A radial Levy-Khintchine exponent in dimension ``d``.

    Use the constructors :meth:`stable`, :meth:`stable_sum`, :meth:`gaussian`
    and :meth:`tabulated` rather than calling the class directly.
    """

    kind: Kind
    d: int = 2
    alphas: tuple = ()
    grid_r: np.ndarray | None = field(default=None, repr=False)
    grid_psi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ArgumentError(f"dimension must be an integer >= 2, got {self.d}")
        if self.kind is Kind.STABLE:
            (a,) = self.alphas
            if not 0 < a < 2:
                raise ArgumentError(f"stable index must lie in (0, 2), got {a}")
        elif self.kind is Kind.STABLE_SUM:
            a1, a2 = self.alphas
            if not 0 < a1 < a2 < 2:
                raise ArgumentError(f"need 0 < alpha1 < alpha2 < 2, got {a1}, {a2}")
        elif self.kind is Kind.TABULATED:
            r, p = self.grid_r, self.grid_psi
            if r is None or p is None or len(r) < 2 or len(r) != len(p):
                raise ArgumentError("tabulated exponent needs matching r and psi columns")
            if np.any(r <= 0) or np.any(np.diff(r) <= 0):
                raise ArgumentError("tabulated r must be positive and strictly increasing")
            if np.any(p <= 0):
                raise ArgumentError("tabulated psi must be positive for r > 0")

    # constructors -----------------------------------------------------------
    @classmethod
    def stable(cls, alpha, d=2):
        return cls(Kind.STABLE, d, (float(alpha),))

    @classmethod
    def stable_sum(cls, alpha1, alpha2, d=2):
        return cls(Kind.STABLE_SUM, d, (float(alpha1), float(alpha2)))

    @classmethod
    def gaussian(cls, d=2):
        """Brownian exponent ``r**2``; oracle-only, never pure-jump."""
        return cls(Kind.GAUSSIAN, d)

    @classmethod
    def tabulated(cls, r, psi, d=2):
        r = np.asarray(r, dtype=float).copy()
        psi = np.asarray(psi, dtype=float).copy()
        r.setflags(write=False)
        psi.setflags(write=False)
        return cls(Kind.TABULATED, d, (), r, psi)

    # properties -------------------------------------------------------------
    @property
    def is_pure_jump(self):
        return self.kind is not Kind.GAUSSIAN

    @property
    def alpha(self):
        """Stability index (2 for the Gaussian oracle); None when not self-similar."""
        if self.kind is Kind.STABLE:
            return self.alphas[0]
        if self.kind is Kind.GAUSSIAN:
            return 2.0
        return None

    @property
    def is_self_similar(self):
        return self.kind in (Kind.STABLE, Kind.GAUSSIAN)

    def require_pure_jump(self, what):
        if not self.is_pure_jump:
            raise ArgumentError(f"{what} assumes a pure-jump exponent; the Gaussian oracle is rejected")

    def with_dimension(self, d):
        return ExponentModel(self.kind, d, self.alphas, self.grid_r, self.grid_psi)

    def __call__(self, r):
        return eval_psi(self, r)

    def __repr__(self):
        if self.kind is Kind.TABULATED:
            return f"ExponentModel(tabulated, d={self.d}, n={len(self.grid_r)})"
        return f"ExponentModel({self.kind.value}, d={self.d}, alphas={self.alphas})"

    def key(self):
        """Hashable identity used for caches."""
        if self.kind is Kind.TABULATED:
            return (self.kind, self.d, self.grid_r.tobytes(), self.grid_psi.tobytes())
        return (self.kind, self.d, self.alphas)


def load_tabulated(path, d=2):
    """Read a two-column ``r psi`` file (``#`` comments allowed)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ArgumentError(f"{path}:{lineno}: expected two columns 'r psi', got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ArgumentError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise ArgumentError(f"{path}: need at least two rows")
    r, psi = np.array(rows).T
    if np.any(np.diff(r) <= 0):
        bad = int(np.argmax(np.diff(r) <= 0)) + 2
        raise ArgumentError(f"{path}: r must be strictly increasing (row {bad})")
    return ExponentModel.tabulated(r, psi, d)


def _tabulated_psi(model, r, extrapolate=False):
    lr, lp = np.log(model.grid_r), np.log(model.grid_psi)
    out = np.zeros_like(r)
    pos = r > 0
    x = np.log(r[pos])
    if not extrapolate:
        lo, hi = lr[0], lr[-1]
        if np.any((x < lo - 1e-12) | (x > hi + 1e-12)):
            raise RangeError(
                f"r outside tabulated hull [{model.grid_r[0]:g}, {model.grid_r[-1]:g}]")
        out[pos] = np.exp(np.interp(x, lr, lp))
        return out
    # power-law continuation with the end slopes; used only inside quadratures
    y = np.interp(x, lr, lp)
    s0 = (lp[1] - lp[0]) / (lr[1] - lr[0])
    s1 = (lp[-1] - lp[-2]) / (lr[-1] - lr[-2])
    y = np.where(x < lr[0], lp[0] + s0 * (x - lr[0]), y)
    y = np.where(x > lr[-1], lp[-1] + s1 * (x - lr[-1]), y)
    out[pos] = np.exp(y)
    return out


def eval_psi(model, r, *, extrapolate=False):
    """Evaluate ``psi(r)``; scalar in, scalar out."""
    arr = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(arr)):
        raise DomainError("psi argument must be finite")
    if np.any(arr < 0):
        raise DomainError("psi argument must be nonnegative")
    if model.kind is Kind.STABLE:
        out = arr ** model.alphas[0]
    elif model.kind is Kind.STABLE_SUM:
        a1, a2 = model.alphas
        out = arr ** a1 + arr ** a2
    elif model.kind is Kind.GAUSSIAN:
        out = arr * arr
    else:
        out = _tabulated_psi(model, np.atleast_1d(arr), extrapolate).reshape(arr.shape)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# scaling certificates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingCertificate:
    """Parameters witnessing WLSC(alpha_lower, theta, c_lower) and WUSC(alpha_upper, theta, c_upper).

    ``standing=True`` enforces ``0 < alpha_lower <= alpha_upper < 2``. The
    universal unimodal bounds (exponents 0 and 2) are built with
    :meth:`universal`, which switches that check off.
    """

    alpha_lower: float
    alpha_upper: float
    theta: float = 0.0
    c_lower: float = 1.0
    c_upper: float = 1.0
    standing: bool = True

    def __post_init__(self):
        if self.theta < 0:
            raise ArgumentError("theta must be >= 0")
        if not 0 < self.c_lower <= 1:
            raise ArgumentError("c_lower must lie in (0, 1]")
        if self.c_upper < 1:
            raise ArgumentError("c_upper must be >= 1")
        if self.standing and not 0 < self.alpha_lower <= self.alpha_upper < 2:
            raise ArgumentError(
                f"need 0 < alpha_lower <= alpha_upper < 2, got {self.alpha_lower}, {self.alpha_upper}")
        if not self.standing and not 0 <= self.alpha_lower <= self.alpha_upper <= 2:
            raise ArgumentError("scaling exponents must lie in [0, 2]")

    @classmethod
    def universal(cls):
        """WLSC(0, 0, 1/pi^2) and WUSC(2, 0, pi^2), valid for every unimodal exponent."""
        return cls(0.0, 2.0, 0.0, 1 / math.pi ** 2, math.pi ** 2, standing=False)

    @classmethod
    def for_model(cls, model):
        """Exact certificate for the built-in closed-form exponents."""
        model.require_pure_jump("scaling certificate")
        if model.kind is Kind.STABLE:
            a = model.alphas[0]
            return cls(a, a, 0.0, 1.0, 1.0)
        if model.kind is Kind.STABLE_SUM:
            a1, a2 = model.alphas
            return cls(a1, a2, 0.0, 1.0, 1.0)
        raise ArgumentError("no closed-form certificate for tabulated exponents")

    @property
    def inv_theta(self):
        return math.inf if self.theta == 0 else 1.0 / self.theta


@dataclass(frozen=True)
class ScalingReport:
    holds: bool
    worst_ratio: float
    witness: tuple
    n_samples: int


def scaling_grid(theta=0.0, n=200, lam_max=1e4, r_span=1e4, delta=1e-3):
    """Default log-spaced (lambda, r) samples with lambda >= 1 and r > theta."""
    lam = np.geomspace(1.0, lam_max, n)
    r_lo = theta + delta
    r = np.geomspace(r_lo, r_span * (theta + 1.0), n)
    L, R = np.meshgrid(lam, r, indexing="ij")
    return L.ravel(), R.ravel()


def _scaling_samples(model, cert, grid):
    if grid is None:
        grid = scaling_grid(cert.theta)
    lam, r = (np.asarray(g, dtype=float).ravel() for g in grid)
    if lam.size == 0:
        raise ArgumentError("empty scaling grid")
    if lam.shape != r.shape:
        raise ArgumentError("lambda and r samples must have equal length")
    if np.any(lam < 1) or np.any(r <= cert.theta):
        raise ArgumentError("scaling grid needs lambda >= 1 and r > theta")
    if model.kind is Kind.TABULATED:
        keep = (r >= model.grid_r[0]) & (lam * r <= model.grid_r[-1])
        lam, r = lam[keep], r[keep]
        if lam.size == 0:
            raise ArgumentError("no scaling samples inside the tabulated hull")
    return lam, r


def verify_wlsc(model, cert, grid=None, rtol=DETERMINISTIC_RTOL):
    """Check ``psi(lam r) >= c_lower lam**alpha_lower psi(r)`` on every sample."""
    model.require_pure_jump("WLSC verification")
    lam, r = _scaling_samples(model, cert, grid)
    ratio = eval_psi(model, lam * r) / (cert.c_lower * lam ** cert.alpha_lower * eval_psi(model, r))
    i = int(np.argmin(ratio))
    return ScalingReport(bool(ratio[i] >= 1 - rtol), float(ratio[i]),
                         (float(lam[i]), float(r[i])), lam.size)


def verify_wusc(model, cert, grid=None, rtol=DETERMINISTIC_RTOL):
    """Check ``psi(lam r) <= c_upper lam**alpha_upper psi(r)``; ``worst_ratio`` is the max."""
    model.require_pure_jump("WUSC verification")
    lam, r = _scaling_samples(model, cert, grid)
    ratio = eval_psi(model, lam * r) / (cert.c_upper * lam ** cert.alpha_upper * eval_psi(model, r))
    i = int(np.argmax(ratio))
    return ScalingReport(bool(ratio[i] <= 1 + rtol), float(ratio[i]),
                         (float(lam[i]), float(r[i])), lam.size)


# --------------------------------------------------------------------------
# renewal scale
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RenewalScale:
    """The renewal function ``V`` and its inverse scale ``T(t) = V^{-1}(sqrt t)``.

    ``mode`` is ``"exact"`` (stable and Gaussian, ``V(x) = x**(alpha/2)``) or
    ``"surrogate"`` (``V(x) = 1/sqrt(psi(1/x))``). ``c_v`` records the
    comparability slack between the surrogate and the true renewal function;
    it is 1 for the exact mode.
    """

    owner: ExponentModel
    mode: str = "exact"
    c_v: float = 1.0

    def __post_init__(self):
        if self.mode not in ("exact", "surrogate"):
            raise ArgumentError(f"unknown renewal mode {self.mode!r}")
        if self.mode == "exact" and not self.owner.is_self_similar:
            raise ArgumentError("exact renewal function only known for stable exponents")
        if self.c_v < 1:
            raise ArgumentError("comparability constant must be >= 1")

    @classmethod
    def for_model(cls, model, c_v=None):
        if model.is_self_similar:
            return cls(model, "exact", 1.0)
        return cls(model, "surrogate", 1.0 if c_v is None else c_v)

    def V(self, x):
        return renewal_V(self, x)

    def V2(self, x):
        v = renewal_V(self, x)
        return v * v

    def T(self, t):
        return inverse_T(self, t)


def renewal_V(scale, x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("renewal function needs x >= 0")
    model = scale.owner
    if scale.mode == "exact":
        out = arr ** (model.alpha / 2)
    else:
        out = np.zeros_like(arr)
        pos = arr > 0
        inv = np.where(pos, 1.0 / np.where(pos, arr, 1.0), 0.0)
        vals = eval_psi(model, np.atleast_1d(inv[pos]))
        out[pos] = 1.0 / np.sqrt(vals)
        if np.any(np.isinf(arr)):
            out[np.isinf(arr)] = np.inf
    return float(out) if np.ndim(out) == 0 else out


def inverse_T(scale, t, rtol=1e-12, maxiter=400):
    """Solve ``V(x)**2 = t`` for ``x``; exact ``t**(1/alpha)`` in the stable case."""
    t = float(t)
    if not t > 0 or not math.isfinite(t):
        raise DomainError("T(t) needs finite t > 0")
    model = scale.owner
    if scale.mode == "exact":
        return t ** (1.0 / model.alpha)

    target = math.log(t)

    def g(u):
        return 2.0 * math.log(renewal_V(scale, math.exp(u))) - target

    if model.kind is Kind.TABULATED:
        lo, hi = -math.log(model.grid_r[-1]), -math.log(model.grid_r[0])
        glo, ghi = g(lo), g(hi)
        if glo > 0 or ghi < 0:
            raise RangeError("T(t) falls outside the tabulated hull")
    else:
        lo, hi = -1.0, 1.0
        for _ in range(200):
            if g(lo) <= 0:
                break
            lo -= 2.0
        for _ in range(200):
            if g(hi) >= 0:
                break
            hi += 2.0
        if g(lo) > 0 or g(hi) < 0:
            raise NumericError("could not bracket T(t)")
    try:
        u = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=maxiter)
    except RuntimeError as exc:
        raise NumericError(f"T(t) root finding failed: {exc}") from None
    x = math.exp(u)
    if abs(scale.V2(x) - t) > max(rtol, 1e-10) * t:
        raise NumericError("T(t) did not reach the requested tolerance")
    return x


def subadditivity_gap(scale, x, y):
    """Largest value of ``V(x+y) - V(x) - V(y)`` over the samples (should be <= 0)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return float(np.max(scale.V(x + y) - scale.V(x) - scale.V(y)))


@dataclass(frozen=True)
class PotterReport:
    holds: bool
    fitted_C: float
    n_pairs: int


def potter_bound_check(scale, cert, pairs, C=None):
    """Fit the smallest ``C`` with ``V(x)/V(y) <= C max((x/y)^(a_lo/2), (x/y)^(a_hi/2))``."""
    scale.owner.require_pure_jump("Potter-like bound")
    x, y = (np.asarray(p, dtype=float).ravel() for p in pairs)
    if x.size == 0 or x.shape != y.shape:
        raise ArgumentError("need a nonempty, matched set of (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ArgumentError("Potter-like bound needs x, y > 0")
    if np.any(x >= cert.inv_theta) or np.any(y >= cert.inv_theta):
        raise ArgumentError("Potter-like bound needs x, y < 1/theta")
    q = x / y
    envelope = np.maximum(q ** (cert.alpha_lower / 2), q ** (cert.alpha_upper / 2))
    fitted = float(np.max(scale.V(x) / scale.V(y) / envelope))
    holds = math.isfinite(fitted) and (C is None or fitted <= C * (1 + DETERMINISTIC_RTOL))
    return PotterReport(holds, fitted, x.size)


def remark_scaling_check(scale, cert, eps, s):
    """Fitted constants for ``V(eps s)/V(s) <= C eps^(a_lo/2)`` and ``V(s)/V(eps s) <= C eps^(-a_hi/2)``.

    ``eps`` in (0, 1] and ``s < 1/theta``; samples are the outer product.
    Returns ``(c_lower_fit, c_upper_fit)``.
    """
    e, ss = np.meshgrid(np.asarray(eps, float), np.asarray(s, float), indexing="ij")
    e, ss = e.ravel(), ss.ravel()
    if np.any((e <= 0) | (e > 1)) or np.any(ss <= 0) or np.any(ss >= cert.inv_theta):
        raise ArgumentError("need 0 < eps <= 1 and 0 < s < 1/theta")
    ratio = scale.V(e * ss) / scale.V(ss)
    c_lo = float(np.max(ratio / e ** (cert.alpha_lower / 2)))
    c_hi = float(np.max((1 / ratio) * e ** (cert.alpha_upper / 2)))
    return c_lo, c_hi
