"""Monte Carlo for killed isotropic stable paths and heat remainders.

Increments are built by subordination: with ``S`` a positive
``alpha/2``-stable variable with Laplace transform ``exp(-dt lam^(alpha/2))``
and ``N`` a standard Gaussian vector, ``sqrt(2 S) N`` has characteristic
function ``exp(-dt |xi|^alpha)``.  ``S`` comes from Kanter's representation,
which needs one uniform and one exponential variate and no rejection.

Paths are simulated on the grid ``k dt`` and are killed at the first grid
time outside the domain; a grid exit at exactly ``t`` counts as survival.
Estimators return a :class:`RemainderEstimate` whose standard error is
computed from antithetic pair means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .errors import ArgumentError
from .geometry import Domain
from .heatkernel import KernelEvaluator, gaussian_density, stable_table

__all__ = [
    "PathConfig",
    "ExitRecord",
    "RemainderEstimate",
    "HalfspaceProfile",
    "GaussianHalfspaceResult",
    "OccupationResult",
    "sample_stable_subordinator",
    "sample_isotropic_stable_increment",
    "simulate_exit",
    "simulate_exit_many",
    "estimate_remainder",
    "remainder_values",
    "estimate_halfspace_remainder",
    "halfspace_profile",
    "gaussian_halfspace",
    "truncated_green_and_poisson",
    "levy_density_constant",
    "grid_steps",
    "combine",
    "MomentCheck",
    "empirical_cf",
    "empirical_laplace",
]

GAUSSIAN = "gaussian"
CHUNK = 128  # fine steps per random-number chunk


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathConfig:
    """Time grid and Monte Carlo budget.

    ``alpha`` is the stability index, or the string ``"gaussian"`` for the
    Brownian oracle with exponent ``|xi|^2``.  ``stream`` separates
    independent experiments that share a seed.
    """

    dt: float
    horizon: float
    n_paths: int
    seed: int = 0
    workers: int = 1
    alpha: float | str = 1.0
    d: int = 2
    stream: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if not self.dt > 0 or not self.horizon > 0:
            raise ArgumentError("dt and horizon must be positive")
        if self.dt > self.horizon / 16 * (1 + 1e-12):
            raise ArgumentError(f"need dt <= horizon/16, got dt={self.dt:g}, t={self.horizon:g}")
        if self.n_paths < 1:
            raise ArgumentError("n_paths must be >= 1")
        if self.antithetic and self.n_paths % 2:
            raise ArgumentError("antithetic sampling needs an even number of paths")
        if self.d < 2:
            raise ArgumentError("dimension must be >= 2")
        if self.alpha != GAUSSIAN and not 0 < float(self.alpha) < 2:
            raise ArgumentError("alpha must lie in (0, 2) or be 'gaussian'")

    @classmethod
    def with_steps(cls, horizon, steps, n_paths, **kw):
        """Grid with ``dt = horizon / steps`` (keeps ``dt/t`` fixed along a t-ladder)."""
        return cls(dt=horizon / steps, horizon=horizon, n_paths=n_paths, **kw)

    @property
    def is_gaussian(self):
        return self.alpha == GAUSSIAN

    @property
    def steps(self):
        return grid_steps(self.horizon, self.dt)


@dataclass
class ExitRecord:
    """Per-path exit data; ``tau`` equals the horizon for surviving paths."""

    exited: np.ndarray
    tau: np.ndarray
    position: np.ndarray

    def __len__(self):
        return len(self.exited)


@dataclass(frozen=True)
class RemainderEstimate:
    mean: float
    stderr: float
    n_effective: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ArgumentError("stderr must be nonnegative")

    @property
    def consistent_nonnegative(self):
        return self.mean >= -3 * self.stderr


def grid_steps(t, dt):
    """Number ``K`` of grid times ``k dt`` with ``k >= 1`` and ``k dt < t`` strictly."""
    n = t / dt
    k = round(n)
    if abs(n - k) <= 1e-9 * max(1.0, n):
        return int(k) - 1
    return int(math.floor(n))


def combine(values, pair=True):
    """Mean and standard error, using antithetic pair means when ``pair``."""
    v = np.asarray(values, dtype=float)
    if pair:
        v = 0.5 * (v[0::2] + v[1::2])
    n = len(v)
    mean = math.fsum(v) / n
    if n < 2:
        return mean, 0.0, n
    var = math.fsum((v - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n), n


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _kanter(beta, g, size):
    """Positive beta-stable variables with Laplace transform exp(-lam^beta)."""
    u = np.pi * g.random(size)
    e = g.standard_exponential(size)
    a = (np.sin(beta * u) ** (beta / (1 - beta)) * np.sin((1 - beta) * u)
         / np.sin(u) ** (1 / (1 - beta)))
    return (a / e) ** ((1 - beta) / beta)


def sample_stable_subordinator(alpha, t_step, g, size=None):
    """``S`` with ``E exp(-lam S) = exp(-t_step lam^(alpha/2))``.

    Kanter's variable has transform ``exp(-lam^beta)``; time scaling
    multiplies it by ``t_step^(1/beta) = t_step^(2/alpha)``.
    """
    if not 0 < alpha < 2:
        raise ArgumentError("alpha must lie in (0, 2)")
    if not t_step > 0:
        raise ArgumentError("t_step must be positive")
    s = _kanter(alpha / 2, g, size)
    return s * t_step ** (2.0 / alpha)


def sample_isotropic_stable_increment(alpha, d, t_step, g, size=None):
    """Increment with characteristic function ``exp(-t_step |xi|^alpha)``."""
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    s = sample_stable_subordinator(alpha, t_step, g, shape if shape else None)
    n = g.standard_normal(shape + (d,))
    return np.sqrt(2 * np.asarray(s))[..., None] * n


@dataclass(frozen=True)
class MomentCheck:
    """Empirical mean of a bounded test function against its exact value."""

    estimate: float
    stderr: float
    target: float

    @property
    def z(self):
        return (self.estimate - self.target) / self.stderr if self.stderr > 0 else 0.0

    def within(self, k=3.0):
        return abs(self.estimate - self.target) <= k * self.stderr


_MOMENT_BLOCK = 1 << 16


def _block_mean(sample_fn, n, seed, name, workers):
    def run(b, s, e):
        g = rngmod.generator(seed, rngmod.stream_id(name), b)
        v = sample_fn(g, e - s)
        return math.fsum(v), math.fsum(v * v)
    parts = rngmod.map_blocks(run, n, workers, _MOMENT_BLOCK)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return mean, math.sqrt(var / n)


def empirical_cf(alpha, d, t_step, xi, n=10 ** 6, seed=0, workers=1) -> MomentCheck:
    """``E cos(<xi, X>)`` for one increment against ``exp(-t_step |xi|^alpha)``.

    ``xi`` is a norm (applied along the diagonal direction, so every
    coordinate contributes) or a full vector.
    """
    xv = np.atleast_1d(np.asarray(xi, dtype=float))
    if xv.size == 1:
        xv = xv[0] * np.ones(d) / math.sqrt(d)
    if len(xv) != d:
        raise ArgumentError("xi has the wrong dimension")

    def sample(g, m):
        return np.cos(sample_isotropic_stable_increment(alpha, d, t_step, g, m) @ xv)
    mean, se = _block_mean(sample, n, seed, f"cf:{alpha!r}:{d}:{t_step!r}:{xv.tolist()!r}", workers)
    return MomentCheck(mean, se, math.exp(-t_step * float(np.linalg.norm(xv)) ** alpha))


def empirical_laplace(alpha, t_step, lam, n=10 ** 6, seed=0, workers=1) -> MomentCheck:
    """``E exp(-lam S)`` for the subordinator against ``exp(-t_step lam^(alpha/2))``."""
    def sample(g, m):
        return np.exp(-lam * sample_stable_subordinator(alpha, t_step, g, m))
    mean, se = _block_mean(sample, n, seed, f"laplace:{alpha!r}:{t_step!r}:{lam!r}", workers)
    return MomentCheck(mean, se, math.exp(-t_step * lam ** (alpha / 2)))


def _increments(cfg, g, m, L, d, dt):
    """``(m, L, d)`` increments; antithetic pairs share the subordinator.

    A full chunk is always drawn and then truncated, so the numbers a path
    sees never depend on where the horizon cuts the last chunk.
    """
    half = m // 2 if cfg.antithetic else m
    n = g.standard_normal((half, CHUNK, d))[:, :L]
    if cfg.is_gaussian:
        inc = math.sqrt(2 * dt) * n
    else:
        s = sample_stable_subordinator(float(cfg.alpha), dt, g, (half, CHUNK))[:, :L]
        inc = np.sqrt(2 * s)[..., None] * n
    if not cfg.antithetic:
        return inc
    out = np.empty((m, L, d))
    out[0::2] = inc
    out[1::2] = -inc
    return out


# ---------------------------------------------------------------------------
# killed paths in a bounded domain
# ---------------------------------------------------------------------------

def _exit_block(domain, starts, cfg, block, stride=1):
    """First grid exit for each row of ``starts``.

    Increments are drawn on the fine grid ``cfg.dt / stride`` for every
    path of the block, chunk by chunk, so the stream a path sees does not
    depend on the domain.  Exits are checked every ``stride`` fine steps.
    Returns ``(k, position)`` with ``k = -1`` for survivors.
    """
    m, d = starts.shape
    K = grid_steps(cfg.horizon, cfg.dt)
    fine_dt = cfg.dt / stride
    fine_total = K * stride
    if CHUNK % stride:
        raise ArgumentError(f"stride must divide {CHUNK}")
    chunk = CHUNK
    pos = starts.copy()
    alive = np.ones(m, dtype=bool)
    exit_k = np.full(m, -1, dtype=np.int64)
    exit_pos = np.full((m, d), np.nan)
    for c, c0 in enumerate(range(0, fine_total, chunk)):
        L = min(chunk, fine_total - c0)
        g = rngmod.generator(cfg.seed, cfg.stream, block, c)
        inc = _increments(cfg, g, m, L, d, fine_dt)
        idx = np.flatnonzero(alive)
        traj = pos[idx, None, :] + np.cumsum(inc[idx], axis=1)
        coarse = traj[:, stride - 1::stride, :]
        nL = coarse.shape[1]
        sd = domain.signed_distance(coarse.reshape(-1, d)).reshape(len(idx), nL)
        out = sd <= 0
        hit = out.any(axis=1)
        first = np.argmax(out, axis=1)
        hit_idx = idx[hit]
        exit_k[hit_idx] = c0 // stride + first[hit] + 1
        exit_pos[hit_idx] = coarse[hit, first[hit]]
        alive[hit_idx] = False
        pos[idx] = traj[:, -1]
        if not alive.any():
            break
    return exit_k, exit_pos


def simulate_exit_many(domain: Domain, starts, cfg: PathConfig, stride=1):
    """Exit records for paths started at the rows of ``starts`` (one path each)."""
    starts = np.asarray(starts, dtype=float)
    if starts.ndim != 2 or starts.shape[1] != domain.d or domain.d != cfg.d:
        raise ArgumentError("starting points must be an (n, d) array matching the domain")
    if len(starts) != cfg.n_paths:
        raise ArgumentError("need one starting point per path")
    if np.any(domain.signed_distance(starts) <= 0):
        raise ArgumentError("starting points must lie inside the domain")

    def run(b, s, e):
        return _exit_block(domain, starts[s:e], cfg, b, stride)

    parts = rngmod.map_blocks(run, len(starts), cfg.workers)
    k = np.concatenate([p[0] for p in parts])
    pos = np.concatenate([p[1] for p in parts])
    exited = k >= 0
    tau = np.where(exited, k * cfg.dt, cfg.horizon)
    return ExitRecord(exited, tau, pos)


def simulate_exit(domain: Domain, x0, cfg: PathConfig, stride=1):
    """``cfg.n_paths`` killed paths from ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    return simulate_exit_many(domain, np.broadcast_to(x0, (cfg.n_paths, domain.d)), cfg, stride)


def _kernel_fn(cfg):
    if cfg.is_gaussian:
        return lambda s, rho: gaussian_density(s, rho, cfg.d)
    tab = stable_table(float(cfg.alpha), cfg.d)
    return tab


def _check_kernel(cfg, kernel):
    if kernel is None:
        return
    model = kernel.model if isinstance(kernel, KernelEvaluator) else kernel
    if cfg.is_gaussian:
        ok = model.alpha == 2.0 and not model.is_pure_jump
    else:
        ok = model.is_self_similar and abs(model.alpha - float(cfg.alpha)) < 1e-15
    if not ok or model.d != cfg.d:
        raise ArgumentError("kernel model does not match the simulated process")


def remainder_values(domain, starts, cfg, stride=1):
    """Per-path contributions ``1{tau < t} p_{t - tau}(|X_tau - x|)``."""
    rec = simulate_exit_many(domain, starts, cfg, stride)
    out = np.zeros(len(rec))
    e = rec.exited
    if np.any(e):
        p = _kernel_fn(cfg)
        rho = np.linalg.norm(rec.position[e] - starts[e], axis=1)
        out[e] = p(cfg.horizon - rec.tau[e], rho)
    return out


def estimate_remainder(domain, x, t, cfg, kernel=None, stride=1) -> RemainderEstimate:
    """Monte Carlo ``r_D(t, x, x)``; ``cfg.horizon`` must equal ``t``."""
    if abs(cfg.horizon - t) > 1e-14 * t:
        raise ArgumentError("cfg.horizon must equal t")
    _check_kernel(cfg, kernel)
    x = np.asarray(x, dtype=float)
    starts = np.broadcast_to(x, (cfg.n_paths, domain.d)).copy()
    vals = remainder_values(domain, starts, cfg, stride)
    mean, se, n = combine(vals, cfg.antithetic)
    return RemainderEstimate(mean, se, n)


# ---------------------------------------------------------------------------
# half-space {x_1 > 0}
# ---------------------------------------------------------------------------

@dataclass
class HalfspaceProfile:
    """``r_H(t, q)`` on a q-grid with common random numbers, plus the exact path integral.

    ``values`` holds pair-averaged per-path contributions, shape ``(n, nq)``;
    ``path_integrals`` holds the per-path ``int_0^inf`` contributions.
    """

    q: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    integral_mean: float
    integral_stderr: float
    n_effective: int
    values: np.ndarray = field(repr=False, default=None)
    path_integrals: np.ndarray = field(repr=False, default=None)
    head_integrals: np.ndarray = field(repr=False, default=None)


def _halfspace_block(q, cfg, block, q_max=math.inf, tangential_draws=4):
    """Record-low walk of the first coordinate for one block.

    Only ``X^1`` is needed to find the exit time from the half-space; the
    tangential part at the exit time is Gaussian with variance ``2 S(tau)``
    given the subordinator, so it is drawn only at exit (several draws are
    averaged for variance reduction).
    """
    m = min(rngmod.BLOCK, cfg.n_paths - block * rngmod.BLOCK)
    K = grid_steps(cfg.horizon, cfg.dt)
    d = cfg.d
    nq = len(q)
    pfun = _kernel_fn(cfg)
    y1 = np.zeros(m)
    scum = np.zeros(m)
    run_min = np.zeros(m)  # running min of Y^1, clipped at 0 (q > 0)
    vals = np.zeros((m, nq))
    pending = np.ones((m, nq), dtype=bool)
    integ = np.zeros(m)
    integ_head = np.zeros(m)
    half = m // 2 if cfg.antithetic else m
    for c, c0 in enumerate(range(0, K, CHUNK)):
        L = min(CHUNK, K - c0)
        g = rngmod.generator(cfg.seed, cfg.stream, block, c)
        n1 = g.standard_normal((half, CHUNK))[:, :L]
        if cfg.is_gaussian:
            s = np.full((half, L), cfg.dt)
        else:
            s = sample_stable_subordinator(float(cfg.alpha), cfg.dt, g, (half, CHUNK))[:, :L]
        inc = np.sqrt(2 * s) * n1
        if cfg.antithetic:
            inc = np.repeat(inc, 2, axis=0)
            inc[1::2] *= -1
            s = np.repeat(s, 2, axis=0)
        Y = y1[:, None] + np.cumsum(inc, axis=1)
        S = scum[:, None] + np.cumsum(s, axis=1)
        M = np.minimum(run_min[:, None], np.minimum.accumulate(Y, axis=1))
        prev = np.concatenate([run_min[:, None], M[:, :-1]], axis=1)
        drop = prev - M  # >= 0, positive at record lows below 0
        rows, cols = np.nonzero(drop > 0)
        if rows.size:
            k = c0 + cols + 1
            srem = cfg.horizon - k * cfg.dt
            gt = rngmod.generator(cfg.seed, cfg.stream, block, c, 1)
            ztan = gt.standard_normal((rows.size, tangential_draws, d - 1))
            tan2 = 2 * S[rows, cols][:, None] * np.sum(ztan ** 2, axis=-1)
            rho = np.sqrt(Y[rows, cols][:, None] ** 2 + tan2)
            pv = pfun(srem[:, None], rho).mean(axis=1)
            np.add.at(integ, rows, drop[rows, cols] * pv)
            # grid values: q in (-prev, -M] exits at this step
            lo, hi = -prev[rows, cols], -M[rows, cols]
            np.add.at(integ_head, rows, (np.minimum(hi, q_max) - np.minimum(lo, q_max)) * pv)
            hitq = (q[None, :] > lo[:, None]) & (q[None, :] <= hi[:, None])
            hitq &= pending[rows]
            rr, qq = np.nonzero(hitq)
            vals[rows[rr], qq] = pv[rr]
            pending[rows[rr], qq] = False
        y1, scum, run_min = Y[:, -1], S[:, -1], M[:, -1]
    return vals, integ, integ_head


def halfspace_profile(q, cfg: PathConfig, q_max=math.inf) -> HalfspaceProfile:
    """``r_H(t, (q, 0, ..., 0))`` on a q-grid with shared paths and the exact q-integral.

    ``integral_*`` refer to ``int_0^inf``; ``head_integrals`` holds the
    per-path integral over ``(0, q_max]``.
    """
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ArgumentError("half-space start must have q > 0")
    parts = rngmod.map_blocks(lambda b, s, e: _halfspace_block(q, cfg, b, q_max),
                              cfg.n_paths, cfg.workers)
    vals = np.concatenate([p[0] for p in parts])
    integ = np.concatenate([p[1] for p in parts])
    head = np.concatenate([p[2] for p in parts])
    if cfg.antithetic:
        vals = 0.5 * (vals[0::2] + vals[1::2])
        integ = 0.5 * (integ[0::2] + integ[1::2])
        head = 0.5 * (head[0::2] + head[1::2])
    n = len(integ)
    mean = np.array([math.fsum(col) / n for col in vals.T])
    se = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(q))
    im = math.fsum(integ) / n
    ise = float(integ.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return HalfspaceProfile(q, mean, se, im, ise, n, vals, integ, head)


def estimate_halfspace_remainder(alpha, d, q, t, cfg: PathConfig) -> RemainderEstimate:
    """Monte Carlo ``r_H(t, (q, 0, ..., 0))`` for the stable process or the Gaussian oracle.

    ``alpha`` may be ``"gaussian"``; for the oracle the bridge-corrected
    estimator of :func:`gaussian_halfspace` is used.
    """
    if not q > 0:
        raise ArgumentError("q must be positive")
    cfg = replace(cfg, alpha=alpha, d=d, horizon=t) if (cfg.alpha != alpha or cfg.d != d) else cfg
    if cfg.is_gaussian:
        res = gaussian_halfspace(q, cfg)
        return res.bridge
    prof = halfspace_profile([q], cfg)
    return RemainderEstimate(float(prof.mean[0]), float(prof.stderr[0]), prof.n_effective)


# ---------------------------------------------------------------------------
# Gaussian oracle on the half-space
# ---------------------------------------------------------------------------

@dataclass
class GaussianHalfspaceResult:
    """Bridge-exact estimate and two grid-monitored estimates (fine ``dt/2`` and coarse ``dt``)."""

    bridge: RemainderEstimate
    fine: RemainderEstimate
    coarse: RemainderEstimate
    bias_diff: RemainderEstimate  # coarse - fine with common random numbers
    oracle: float


def _gauss_value(t, tau, x1, q, d):
    """Tangentially averaged ``p_{t - tau}`` for the Brownian oracle."""
    s = t - tau
    return ((4 * math.pi * t) ** (-(d - 1) / 2) * (4 * math.pi * s) ** -0.5
            * np.exp(-(x1 - q) ** 2 / (4 * s)))


def _gauss_block(q, cfg, block):
    m = min(rngmod.BLOCK, cfg.n_paths - block * rngmod.BLOCK)
    t, dt, d = cfg.horizon, cfg.dt, cfg.d
    n_coarse = int(round(t / dt))
    if abs(n_coarse * dt - t) > 1e-9 * t:
        raise ArgumentError("the Gaussian oracle needs t/dt to be an integer")
    n_fine = 2 * n_coarse
    K_coarse = n_coarse - 1  # grid times strictly before t
    sig = math.sqrt(dt)  # fine step: variance 2 * dt/2 = dt
    x = np.full(m, float(q))
    alive = np.ones(m, dtype=bool)  # alive for the coarse monitor (the last to stop)
    fine_done = np.zeros(m, dtype=bool)
    bridge_done = np.zeros(m, dtype=bool)
    v_fine = np.zeros(m)
    v_coarse = np.zeros(m)
    v_bridge = np.zeros(m)
    half = m // 2
    chunk = CHUNK
    for c, c0 in enumerate(range(0, n_fine, chunk)):
        L = min(chunk, n_fine - c0)
        g = rngmod.generator(cfg.seed, cfg.stream, block, c)
        zh = g.standard_normal((half, chunk))[:, :L]
        u_cross = g.random((half, chunk // 2))[:, : L // 2]
        w_ig = g.standard_normal((half, chunk // 2))[:, : L // 2]
        u_ig = g.random((half, chunk // 2))[:, : L // 2]
        z = np.empty((2 * half, L))
        z[0::2], z[1::2] = zh, -zh
        u_cross, w_ig, u_ig = (np.repeat(a, 2, axis=0) for a in (u_cross, w_ig, u_ig))
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        path = x[idx, None] + sig * np.cumsum(z[idx], axis=1)
        fine_k = c0 + np.arange(1, L + 1)  # fine step index; time = fine_k * dt/2
        # fine grid monitor (times strictly before t)
        valid = fine_k < n_fine
        fmask = (path <= 0) & valid[None, :] & ~fine_done[idx, None]
        fh = fmask.any(axis=1)
        if fh.any():
            j = np.argmax(fmask[fh], axis=1)
            rows = idx[fh]
            tau = fine_k[j] * dt / 2
            v_fine[rows] = _gauss_value(t, tau, path[fh, j], q, d)
            fine_done[rows] = True
        # coarse grid: every second fine point
        cp = path[:, 1::2]
        ck = (c0 + np.arange(2, L + 1, 2)) // 2  # coarse index
        prev = np.concatenate([x[idx, None], cp[:, :-1]], axis=1)
        # bridge-exact exit over each coarse step (all n_coarse steps count)
        a, b = prev, cp
        Tp = 2 * dt  # step length in standard-Brownian time
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            pc = np.where(b <= 0, 1.0, np.exp(-2 * np.maximum(a, 0) * np.maximum(b, 0) / Tp))
        cross = (u_cross[idx] < pc) & ~bridge_done[idx, None]
        bh = cross.any(axis=1)
        if bh.any():
            j = np.argmax(cross[bh], axis=1)
            rows = idx[bh]
            aa, bb = a[bh, j], b[bh, j]
            mu = np.abs(bb) / Tp
            wn, un = w_ig[idx][bh, j], u_ig[idx][bh, j]
            uu = _inverse_gaussian(aa, mu, wn, un)
            sstd = uu * Tp / (Tp + uu)
            tau = (ck[j] - 1) * dt + sstd / 2
            v_bridge[rows] = _gauss_value(t, tau, 0.0, q, d)
            bridge_done[rows] = True
        cmask = (cp <= 0) & (ck <= K_coarse)[None, :]
        ch = cmask.any(axis=1)
        if ch.any():
            j = np.argmax(cmask[ch], axis=1)
            rows = idx[ch]
            tau = ck[j] * dt
            v_coarse[rows] = _gauss_value(t, tau, cp[ch, j], q, d)
            alive[rows] = False
        x[idx] = path[:, -1]
    return v_bridge, v_fine, v_coarse


def _inverse_gaussian(a, mu, z, u):
    """IG(mean a/mu, shape a^2) by the Michael-Schucany-Haas transform; Levy law when mu = 0."""
    out = np.empty_like(a)
    zero = mu <= 1e-300
    out[zero] = a[zero] ** 2 / np.maximum(z[zero] ** 2, 1e-300)
    nz = ~zero
    m = a[nz] / mu[nz]
    lam = a[nz] ** 2
    y = z[nz] ** 2
    x = m + m * m * y / (2 * lam) - m / (2 * lam) * np.sqrt(4 * m * lam * y + (m * y) ** 2)
    out[nz] = np.where(u[nz] <= m / (m + x), x, m * m / x)
    return out


def gaussian_halfspace(q, cfg: PathConfig) -> GaussianHalfspaceResult:
    """Brownian half-space remainder at ``(q, 0, ..., 0)`` with three estimators.

    * ``bridge``: exact exit time from the Brownian-bridge crossing law on the
      coarse grid ``cfg.dt`` (unbiased).
    * ``fine`` and ``coarse``: grid-monitored exits on ``dt/2`` and ``dt`` from
      the same paths, so their difference measures the monitoring bias.
    The tangential coordinates are integrated out in closed form.
    """
    if not cfg.is_gaussian:
        raise ArgumentError("gaussian_halfspace needs cfg.alpha = 'gaussian'")
    if not cfg.antithetic:
        raise ArgumentError("gaussian_halfspace uses antithetic pairs")
    parts = rngmod.map_blocks(lambda b, s, e: _gauss_block(q, cfg, b), cfg.n_paths, cfg.workers)
    vb, vf, vc = (np.concatenate([p[i] for p in parts]) for i in range(3))
    ests = [RemainderEstimate(*combine(v)) for v in (vb, vf, vc, vc - vf)]
    t = cfg.horizon
    oracle = (4 * math.pi * t) ** (-cfg.d / 2) * math.exp(-q * q / t)
    return GaussianHalfspaceResult(*ests, oracle)


# ---------------------------------------------------------------------------
# truncated Green function and Poisson kernel
# ---------------------------------------------------------------------------

def levy_density_constant(alpha, d):
    """``A`` with Levy density ``A |z|^(-d-alpha)`` for exponent ``|xi|^alpha``."""
    return alpha * 2 ** (alpha - 1) * math.gamma((d + alpha) / 2) / (
        math.pi ** (d / 2) * math.gamma(1 - alpha / 2))


@dataclass
class OccupationResult:
    edges: tuple
    green: np.ndarray
    poisson: np.ndarray
    poisson_iw: np.ndarray
    occupation_mass: float
    occupation_mass_err: float
    expected_time: float
    expected_time_err: float
    zone_exit_mass: float
    zone_exit_mass_err: float
    exit_probability: float
    warnings: list


def truncated_green_and_poisson(domain, x, M, cfg: PathConfig, bins=40, zone_margin=None):
    """Histograms of the killed occupation measure and of the exit positions.

    ``green`` estimates ``int_cell G^M_D(x, y) dy`` from the time the path
    spends in each cell before ``min(tau, M)``.  ``poisson`` is the
    histogram of exit positions with ``tau < M`` in a zone around the domain.
    ``poisson_iw`` is the Ikeda-Watanabe prediction of the same zone masses,
    ``sum_cells G(cell) nu(y_cell - z)``, evaluated at zone cell centres.
    """
    if not M > 0:
        raise ArgumentError("M must be positive")
    if cfg.is_gaussian:
        raise ArgumentError("the Poisson kernel check needs a pure-jump process")
    d = domain.d
    if d != 2:
        raise ArgumentError("occupation histograms are implemented for d = 2")
    cfg = replace(cfg, horizon=M)
    lo, hi = domain.bounding_box()
    margin = (hi - lo).max() / 2 if zone_margin is None else zone_margin
    gedges = [np.linspace(lo[i], hi[i], bins + 1) for i in range(d)]
    zedges = [np.linspace(lo[i] - margin, hi[i] + margin, bins + 1) for i in range(d)]
    notes = []
    cell = min(float(e[1] - e[0]) for e in gedges)
    scale = cfg.dt ** (1.0 / float(cfg.alpha))
    if cell > 10 * scale:
        notes.append(f"grid cells ({cell:.3g}) are coarse against the step scale ({scale:.3g})")
    x = np.asarray(x, float)
    K = grid_steps(M, cfg.dt)

    def run(block, s, e):
        m = e - s
        pos = np.broadcast_to(x, (m, d)).copy()
        alive = np.ones(m, dtype=bool)
        green = np.zeros((bins, bins))
        occ_time = np.zeros(m)
        exit_pos = np.full((m, d), np.nan)
        for c, c0 in enumerate(range(0, K, CHUNK)):
            L = min(CHUNK, K - c0)
            g = rngmod.generator(cfg.seed, cfg.stream, block, c)
            inc = _increments(cfg, g, m, L, d, cfg.dt)
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            traj = pos[idx, None, :] + np.cumsum(inc[idx], axis=1)
            sd = domain.signed_distance(traj.reshape(-1, d)).reshape(len(idx), L)
            out = sd <= 0
            first = np.where(out.any(axis=1), np.argmax(out, axis=1), L)
            # left-point rule: grid point j counts while its time is before tau
            pts = np.concatenate([pos[idx, None, :], traj[:, :-1, :]], axis=1)
            w_steps = np.arange(L)[None, :] <= first[:, None]
            sel = pts[w_steps]
            hst, _, _ = np.histogram2d(sel[:, 0], sel[:, 1], bins=gedges)
            green += hst * cfg.dt
            occ_time[idx] += w_steps.sum(axis=1) * cfg.dt
            hit = first < L
            exit_pos[idx[hit]] = traj[hit, first[hit]]
            alive[idx[hit]] = False
            pos[idx] = traj[:, -1]
        return green, occ_time, exit_pos

    parts = rngmod.map_blocks(run, cfg.n_paths, cfg.workers)
    n = cfg.n_paths
    green = sum(p[0] for p in parts) / n
    occ = np.concatenate([p[1] for p in parts])
    exits = np.concatenate([p[2] for p in parts])
    exited = ~np.isnan(exits[:, 0])
    ep = exits[exited]
    pois, _, _ = np.histogram2d(ep[:, 0], ep[:, 1], bins=zedges) if len(ep) else (np.zeros((bins, bins)), 0, 0)
    pois = pois / n
    zc = [(e[:-1] + e[1:]) / 2 for e in zedges]
    gc = [(e[:-1] + e[1:]) / 2 for e in gedges]
    Z = np.stack(np.meshgrid(*zc, indexing="ij"), axis=-1).reshape(-1, d)
    Y = np.stack(np.meshgrid(*gc, indexing="ij"), axis=-1).reshape(-1, d)
    outside = domain.signed_distance(Z) <= 0
    A = levy_density_constant(float(cfg.alpha), d)
    zarea = float(np.prod([e[1] - e[0] for e in zedges]))
    iw = np.zeros(len(Z))
    gflat = green.reshape(-1)
    nzc = gflat > 0
    for i in np.flatnonzero(outside):
        r = np.linalg.norm(Y[nzc] - Z[i], axis=1)
        iw[i] = float(np.dot(gflat[nzc], A * r ** (-d - float(cfg.alpha)))) * zarea
    iw = iw.reshape(bins, bins)
    in_zone = np.all((ep >= [e[0] for e in zedges]) & (ep <= [e[-1] for e in zedges]), axis=1) if len(ep) else np.zeros(0, bool)
    zone_ind = np.zeros(n)
    zone_ind[np.flatnonzero(exited)[in_zone]] = 1.0
    ot_m, ot_se, _ = combine(occ, cfg.antithetic)
    z_m, z_se, _ = combine(zone_ind, cfg.antithetic)
    return OccupationResult(tuple(gedges), green, pois, iw, float(green.sum()), ot_se,
                            ot_m, ot_se, z_m, z_se, float(exited.mean()), notes)
