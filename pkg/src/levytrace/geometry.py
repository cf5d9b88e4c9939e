"""Bounded test domains, boundary predicates and the D1/D2/D3 decomposition.

Three shapes are supported: simple polygons in the plane, axis-aligned
boxes and Euclidean balls in any dimension ``d >= 2``.  Every predicate is
exact (closed form or edge by edge), so the Monte Carlo modules never see
geometric discretisation error.

Conventions
-----------
* ``signed_distance`` is positive inside and negative outside.
* Normals ``v`` always point into the domain.
* ``Gamma_r(q, eps) = {x : (x-q).v > sqrt(1-eps^2)|x-q|} & B(q, r)`` and the
  inner and outer cones use ``(y-q).v > eps|y-q|`` and ``< -eps|y-q|``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from scipy import optimize

from .errors import ArgumentError, ConfigError, GeometryError

__all__ = [
    "Region",
    "Domain",
    "Polygon2D",
    "Box",
    "Ball",
    "GoodSetSpec",
    "HalfSpace",
    "NearestPoint",
    "BadStripReport",
    "unit_square",
    "load_polygon",
    "gamma_contains",
    "inner_outer_cones",
    "matched_halfspace",
    "bad_strip_measure",
    "measures",
    "unit_ball_volume",
    "sphere_area",
]

BOUNDARY_TOL = 1e-12


class Region(enum.IntEnum):
    D1 = 1
    D2 = 2
    D3 = 3


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def sphere_area(d):
    """Surface measure of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class GoodSetSpec:
    """Parameters ``(eps, r, s)`` of the good-set decomposition; ``cos(phi_eps) = eps``."""

    eps: float
    r: float
    s: float

    def __post_init__(self):
        if not 0 < self.eps < 0.25:
            raise ArgumentError(f"eps must lie in (0, 1/4), got {self.eps}")
        if not self.r > 0 or not self.s > 0:
            raise ArgumentError("r and s must be positive")

    @property
    def phi_eps(self):
        return math.acos(self.eps)

    @property
    def cone_slope(self):
        """Half-width per unit height of Gamma, ``eps / sqrt(1 - eps^2)``."""
        return self.eps / math.sqrt(1 - self.eps ** 2)


@dataclass(frozen=True)
class NearestPoint:
    q: np.ndarray
    v: np.ndarray | None
    distance: float
    ambiguous: bool = False


@dataclass(frozen=True)
class HalfSpace:
    """``{y : (y - point).normal > 0}``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.linalg.norm(self.normal)
        if abs(n - 1) > 1e-12:
            raise ArgumentError("half-space normal must be a unit vector")

    def signed_distance(self, y):
        return (np.asarray(y, float) - self.point) @ self.normal

    def contains(self, y):
        return self.signed_distance(y) > 0


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != d:
        raise ArgumentError(f"expected points of dimension {d}, got shape {x.shape}")
    return x, single


class Domain:
    """Common interface; see :class:`Polygon2D`, :class:`Box`, :class:`Ball`."""

    d: int
    shape: str

    # subclasses provide: signed_distance, nearest_boundary_point,
    # is_good_point, in_good_cone, strip_area, strip_area_derivative,
    # bounding_box, translated, volume, perimeter, inradius

    def contains(self, x):
        return self.signed_distance(x) > 0

    def classify(self, spec: GoodSetSpec, x):
        """Region labels (``Region.D1/D2/D3``) for one point or an ``(n, d)`` array."""
        pts, single = _as_points(x, self.d)
        delta = self.signed_distance(pts)
        if np.any(delta <= 0):
            raise ArgumentError("classify needs interior points")
        out = np.full(len(pts), int(Region.D1))
        out[delta >= spec.s] = int(Region.D3)
        near = delta < spec.s
        if np.any(near):
            good = self.in_good_cone(pts[near], spec.eps, spec.r)
            out[np.flatnonzero(near)[good]] = int(Region.D2)
        return Region(out[0]) if single else out

    def sample_uniform(self, rng, n):
        lo, hi = self.bounding_box()
        out = np.empty((0, self.d))
        while len(out) < n:
            m = max(64, int(1.3 * (n - len(out)) * np.prod(hi - lo) / self.volume))
            x = lo + (hi - lo) * rng.random((m, self.d))
            out = np.vstack([out, x[self.contains(x)]])
        return out[:n]

    def summary_row(self):
        return f"{self.shape},{self.volume:.17g},{self.perimeter:.17g},{self.inradius:.17g}"

    def s0(self):
        """Default strip-width ceiling for the good-set checks."""
        return self.inradius / 4


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _line_stadium_interval(p0, tau, L, a, b, r):
    """Open interval of ``s in [0, L]`` with ``dist(p0 + s tau, [a, b]) < r`` (or None)."""
    # the stadium is convex, so the hit set along a line is an interval;
    # collect it from the rectangle part and the two end disks
    lo, hi = math.inf, -math.inf
    e = b - a
    le = float(np.hypot(*e))
    for c in (a, b):
        w = p0 - c
        B = float(np.dot(w, tau))
        C = float(np.dot(w, w)) - r * r
        disc = B * B - C
        if disc > 0:
            sq = math.sqrt(disc)
            lo, hi = min(lo, -B - sq), max(hi, -B + sq)
    if le > 0:
        t = e / le
        n = np.array([-t[1], t[0]])
        # constraints |(.-a).n| < r and 0 < (.-a).t < le, linear in s
        lo_s, hi_s = -math.inf, math.inf
        for coef, off, lb, ub in (
            (float(np.dot(tau, n)), float(np.dot(p0 - a, n)), -r, r),
            (float(np.dot(tau, t)), float(np.dot(p0 - a, t)), 0.0, le),
        ):
            if abs(coef) < 1e-300:
                if not lb < off < ub:
                    lo_s, hi_s = math.inf, -math.inf
                continue
            s1, s2 = (lb - off) / coef, (ub - off) / coef
            lo_s, hi_s = max(lo_s, min(s1, s2)), min(hi_s, max(s1, s2))
        if lo_s < hi_s:
            lo, hi = min(lo, lo_s), max(hi, hi_s)
    lo, hi = max(lo, 0.0), min(hi, L)
    if lo >= hi:
        return None
    return lo, hi


def _subtract_intervals(L, cuts):
    """Closed pieces of ``[0, L]`` left after removing open intervals."""
    pieces = [(0.0, L)]
    for lo, hi in sorted(cuts):
        nxt = []
        for a, b in pieces:
            if hi <= a or lo >= b:
                nxt.append((a, b))
                continue
            if lo > a:
                nxt.append((a, lo))
            if hi < b:
                nxt.append((hi, b))
        pieces = nxt
    return pieces


class Polygon2D(Domain):
    """Simple polygon; clockwise input is reoriented counterclockwise."""

    shape = "polygon"

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ArgumentError("polygon needs at least three (x, y) vertices")
        if np.allclose(v[0], v[-1]) and len(v) > 3:
            v = v[:-1]
        area = _signed_area(v)
        if abs(area) < 1e-14 * max(1.0, float(np.ptp(v)) ** 2):
            raise ArgumentError("degenerate polygon (zero area)")
        if area < 0:
            v = v[::-1].copy()
        ring = shapely.LinearRing(v)
        if not ring.is_simple:
            raise ArgumentError("polygon is not simple (edges intersect)")
        self.d = 2
        self.vertices = v
        self.vertices.setflags(write=False)
        self.p0 = v
        self.p1 = np.roll(v, -1, axis=0)
        e = self.p1 - self.p0
        self.lengths = np.hypot(e[:, 0], e[:, 1])
        if np.any(self.lengths == 0):
            raise ArgumentError("polygon has repeated consecutive vertices")
        self.tangents = e / self.lengths[:, None]
        self.normals = np.column_stack([-self.tangents[:, 1], self.tangents[:, 0]])
        self._poly = shapely.Polygon(v)
        nxt = np.roll(self.tangents, -1, axis=0)
        cross = self.tangents[:, 0] * nxt[:, 1] - self.tangents[:, 1] * nxt[:, 0]
        self.convex = bool(np.all(cross >= -1e-14))
        self.volume = float(area if area > 0 else -area)
        self.perimeter = float(self.lengths.sum())
        self.inradius = self._inradius()
        self._scale = float(np.ptp(v))

    def __repr__(self):
        return f"Polygon2D({len(self.vertices)} vertices, area={self.volume:g})"

    def _inradius(self):
        if self.convex:
            # Chebyshev centre: max t s.t. n_i.(x - p_i) >= t
            A = np.column_stack([-self.normals, np.ones(len(self.normals))])
            b = -np.einsum("ij,ij->i", self.normals, self.p0)
            res = optimize.linprog([0, 0, -1], A_ub=A, b_ub=b, bounds=[(None, None)] * 3,
                                   method="highs")
            if not res.success:
                raise GeometryError("inradius LP failed")
            return float(res.x[2])
        circ = shapely.maximum_inscribed_circle(self._poly, tolerance=1e-10 * self._bbox_diam())
        return float(circ.length)

    def _bbox_diam(self):
        lo, hi = self.bounding_box()
        return float(np.hypot(*(hi - lo)))

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def translated(self, shift):
        return Polygon2D(self.vertices + np.asarray(shift, float))

    # distances ----------------------------------------------------------
    def _segment_projection(self, x):
        w = x[:, None, :] - self.p0[None, :, :]
        s = np.einsum("nmk,mk->nm", w, self.tangents)
        s = np.clip(s, 0.0, self.lengths[None, :])
        q = self.p0[None, :, :] + s[..., None] * self.tangents[None, :, :]
        dist = np.linalg.norm(x[:, None, :] - q, axis=-1)
        return s, q, dist

    def _inside(self, x):
        # even-odd ray casting along +x
        xa, ya = self.p0[:, 0], self.p0[:, 1]
        xb, yb = self.p1[:, 0], self.p1[:, 1]
        px, py = x[:, 0:1], x[:, 1:2]
        crosses = (ya > py) != (yb > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = xa + (py - ya) * (xb - xa) / (yb - ya)
        return np.sum(crosses & (px < xint), axis=1) % 2 == 1

    def signed_distance(self, x):
        pts, single = _as_points(x, 2)
        _, _, dist = self._segment_projection(pts)
        dmin = dist.min(axis=1)
        out = np.where(self._inside(pts), dmin, -dmin)
        return float(out[0]) if single else out

    def nearest_boundary_point(self, x):
        pts, _ = _as_points(x, 2)
        s, q, dist = self._segment_projection(pts[:1])
        s, q, dist = s[0], q[0], dist[0]
        dmin = dist.min()
        tol = BOUNDARY_TOL * max(1.0, self._scale)
        cand = np.flatnonzero(dist <= dmin + tol)
        pts_c = q[cand]
        # distinct candidate points (a vertex is shared by two edges)
        uniq = []
        for p in pts_c:
            if not any(np.linalg.norm(p - u) <= tol for u in uniq):
                uniq.append(p)
        uniq.sort(key=lambda p: (p[0], p[1]))
        qbest = uniq[0]
        ambiguous = len(uniq) > 1
        v = None
        for i in cand:
            if np.linalg.norm(q[i] - qbest) <= tol and tol < s[i] < self.lengths[i] - tol:
                v = self.normals[i].copy()
                break
        return NearestPoint(qbest.copy(), v, float(dmin), ambiguous)

    def boundary_normal(self, q):
        """Inward normal at ``q`` or None at a vertex; raises if ``q`` is off the boundary."""
        q = np.asarray(q, float)
        s, _, dist = self._segment_projection(q[None, :])
        tol = 1e-12 * max(1.0, self._scale)
        i = int(np.argmin(dist[0]))
        if dist[0, i] > tol:
            raise ArgumentError(f"point {q} is not on the boundary (distance {dist[0, i]:.3g})")
        on = np.flatnonzero(dist[0] <= tol)
        for j in on:
            if tol < s[0, j] < self.lengths[j] - tol:
                return self.normals[j].copy(), int(j)
        return None, int(i)

    # good points ----------------------------------------------------------
    def is_good_point(self, q, eps, r):
        """Exact test of ``B(q,r) & boundary`` inside the flat double cone at ``q``."""
        if not eps > 0 or not r > 0:
            raise ArgumentError("need eps > 0 and r > 0")
        q = np.asarray(q, float)
        v, own = self.boundary_normal(q)
        if v is None:
            return False
        for j in range(len(self.p0)):
            a, b = self.p0[j], self.p1[j]
            t = self.tangents[j]
            # clip the edge to the open ball B(q, r)
            w = a - q
            B = float(np.dot(w, t))
            C = float(np.dot(w, w)) - r * r
            disc = B * B - C
            if disc <= 0:
                continue
            sq = math.sqrt(disc)
            lo, hi = max(0.0, -B - sq), min(self.lengths[j], -B + sq)
            if lo >= hi:
                continue
            P, Q = a + lo * t, a + hi * t
            # directions from q along the clipped piece
            n_line = abs(float(np.dot(a - q, self.normals[j])))
            if n_line <= 1e-14 * max(1.0, self._scale):
                # the piece lies on a line through q: tangential or normal direction
                if abs(float(np.dot(t, v))) >= eps:
                    return False
                continue
            u0, u1 = P - q, Q - q
            tv = np.array([-v[1], v[0]])
            g0, g1 = float(np.dot(u0, tv)), float(np.dot(u1, tv))
            if g0 * g1 <= 0:
                # the piece crosses the normal axis through q
                return False
            # otherwise |cos| to v is largest at an end of the piece
            c0 = float(np.dot(u0, v)) / np.linalg.norm(u0)
            c1 = float(np.dot(u1, v)) / np.linalg.norm(u1)
            if max(abs(c0), abs(c1)) >= eps:
                return False
        return True

    def good_pieces(self, r):
        """Per edge, closed parameter intervals of points at distance >= r from all other edges."""
        out = []
        for i in range(len(self.p0)):
            cuts = []
            for j in range(len(self.p0)):
                if j == i:
                    continue
                iv = _line_stadium_interval(self.p0[i], self.tangents[i], self.lengths[i],
                                            self.p0[j], self.p1[j], r)
                if iv is not None:
                    cuts.append(iv)
            out.append(_subtract_intervals(float(self.lengths[i]), cuts))
        return out

    def in_good_cone(self, x, eps, r):
        """Whether each point lies in ``Gamma_r(q, eps)`` for some good boundary point ``q``."""
        pts, _ = _as_points(x, 2)
        slope = eps / math.sqrt(1 - eps * eps)
        result = np.zeros(len(pts), dtype=bool)
        for i, pieces in enumerate(self.good_pieces(r)):
            if not pieces:
                continue
            w = pts - self.p0[i]
            h = w @ self.normals[i]
            u0 = w @ self.tangents[i]
            ok = (h > 0) & (h < r)
            half = np.where(ok, np.minimum(h * slope, np.sqrt(np.maximum(r * r - h * h, 0))), 0)
            for a, b in pieces:
                result |= ok & (u0 - half < b) & (u0 + half > a)
        return result

    # strip areas ----------------------------------------------------------
    def _inset(self, s):
        """Convex inset polygon {x : delta(x) >= s} as a vertex array (possibly empty)."""
        poly = self.vertices
        for p, n in zip(self.p0, self.normals):
            if len(poly) == 0:
                break
            c = p + s * n
            val = (poly - c) @ n
            new = []
            m = len(poly)
            for k in range(m):
                a, b = poly[k], poly[(k + 1) % m]
                va, vb = val[k], val[(k + 1) % m]
                if va >= 0:
                    new.append(a)
                if (va >= 0) != (vb >= 0):
                    tt = va / (va - vb)
                    new.append(a + tt * (b - a))
            poly = np.array(new) if new else np.empty((0, 2))
        return poly

    def strip_area(self, s):
        """``|{x in D : delta(x) < s}|``; exact for convex polygons."""
        s = float(s)
        if s <= 0:
            return 0.0
        if s >= self.inradius:
            return self.volume
        if self.convex:
            inset = self._inset(s)
            inner = abs(_signed_area(inset)) if len(inset) >= 3 else 0.0
        else:
            inner = self._poly.buffer(-s, quad_segs=256).area
        return self.volume - inner

    def strip_area_derivative(self, s):
        """``d/ds strip_area`` = length of the level set ``{delta = s}``."""
        s = float(s)
        if s < 0 or s >= self.inradius:
            return 0.0
        if self.convex:
            inset = self._inset(s)
            if len(inset) < 3:
                return 0.0
            e = np.roll(inset, -1, axis=0) - inset
            return float(np.hypot(e[:, 0], e[:, 1]).sum())
        return float(self._poly.buffer(-s, quad_segs=256).length)

    def strip_breakpoints(self):
        """Values of ``s`` where the convex inset changes combinatorics."""
        if not self.convex:
            return np.array([0.0, self.inradius])
        out = {0.0, self.inradius}
        for s in np.linspace(0, self.inradius, 64)[1:-1]:
            out.add(float(s))
        return np.array(sorted(out))


def unit_square():
    return Polygon2D([(0, 0), (1, 0), (1, 1), (0, 1)])


def load_polygon(path):
    """Read ``x y`` vertex lines (``#`` comments); errors name the offending line."""
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        parts = body.split()
        if len(parts) != 2:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError(f"{path}: expected 'x y', got {line.strip()!r}", lineno, col)
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            bad = parts[0] if not _is_float(parts[0]) else parts[1]
            raise ConfigError(f"{path}: not a number: {bad!r}", lineno, line.find(bad) + 1) from None
    try:
        return Polygon2D(rows)
    except ArgumentError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

class Box(Domain):
    """Axis-aligned box ``prod [lower_i, upper_i]``."""

    shape = "box"

    def __init__(self, lower, upper):
        lo = np.array(lower, dtype=float)
        hi = np.array(upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or len(lo) < 2:
            raise ArgumentError("box needs matching lower/upper corners in dimension >= 2")
        if np.any(hi <= lo):
            raise ArgumentError("box side lengths must be positive")
        self.d = len(lo)
        self.lower, self.upper = lo, hi
        self.sides = hi - lo
        self.volume = float(np.prod(self.sides))
        self.perimeter = float(sum(np.prod(np.delete(self.sides, i)) for i in range(self.d)) * 2)
        self.inradius = float(self.sides.min() / 2)

    @classmethod
    def from_sides(cls, sides):
        sides = np.asarray(sides, float)
        return cls(np.zeros_like(sides), sides)

    def __repr__(self):
        return f"Box(sides={self.sides.tolist()})"

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def translated(self, shift):
        shift = np.asarray(shift, float)
        return Box(self.lower + shift, self.upper + shift)

    def sample_uniform(self, rng, n):
        return self.lower + self.sides * rng.random((n, self.d))

    def signed_distance(self, x):
        pts, single = _as_points(x, self.d)
        a = pts - self.lower
        b = self.upper - pts
        inside = np.minimum(a, b).min(axis=1)
        outside = np.linalg.norm(np.maximum(np.maximum(-a, -b), 0), axis=1)
        out = np.where(inside > 0, inside, np.where(outside > 0, -outside, inside))
        return float(out[0]) if single else out

    def _faces(self, x):
        """Distances to the 2d face hyperplanes, ordered (lower_0, upper_0, lower_1, ...)."""
        return np.column_stack([c for i in range(self.d)
                                for c in (x[:, i] - self.lower[i], self.upper[i] - x[:, i])])

    def nearest_boundary_point(self, x):
        pts, _ = _as_points(x, self.d)
        p = pts[0]
        if not np.all((p > self.lower) & (p < self.upper)):
            q = np.clip(p, self.lower, self.upper)
            if np.any(q != p):
                return NearestPoint(q, None, float(-np.linalg.norm(q - p)), False)
        f = self._faces(pts)[0]
        dmin = f.min()
        tol = BOUNDARY_TOL * max(1.0, float(self.sides.max()))
        cand = np.flatnonzero(f <= dmin + tol)
        qs = []
        for k in cand:
            i, upper = divmod(int(k), 2)
            q = p.copy()
            q[i] = self.upper[i] if upper else self.lower[i]
            v = np.zeros(self.d)
            v[i] = -1.0 if upper else 1.0
            qs.append((tuple(q), q, v))
        qs.sort(key=lambda z: z[0])
        _, q, v = qs[0]
        on_edge = np.sum((np.abs(q - self.lower) <= tol) | (np.abs(q - self.upper) <= tol)) > 1
        return NearestPoint(q, None if on_edge else v, float(dmin), len(qs) > 1)

    def boundary_normal(self, q):
        q = np.asarray(q, float)
        tol = 1e-12 * max(1.0, float(self.sides.max()))
        if np.any(q < self.lower - tol) or np.any(q > self.upper + tol):
            raise ArgumentError(f"point {q} is not on the boundary")
        on_lo = np.abs(q - self.lower) <= tol
        on_hi = np.abs(q - self.upper) <= tol
        count = int(on_lo.sum() + on_hi.sum())
        if count == 0:
            raise ArgumentError(f"point {q} is not on the boundary")
        if count > 1:
            return None, -1
        i = int(np.flatnonzero(on_lo | on_hi)[0])
        v = np.zeros(self.d)
        v[i] = 1.0 if on_lo[i] else -1.0
        return v, 2 * i + int(on_hi[i])

    def is_good_point(self, q, eps, r):
        if not eps > 0 or not r > 0:
            raise ArgumentError("need eps > 0 and r > 0")
        q = np.asarray(q, float)
        v, face = self.boundary_normal(q)
        if v is None:
            return False
        i = face // 2
        if self.sides[i] < r:
            return False  # the opposite face point q + L v sits on the normal axis
        for j in range(self.d):
            if j == i:
                continue
            for a in (q[j] - self.lower[j], self.upper[j] - q[j]):
                if a >= r:
                    continue
                h = min(self.sides[i], math.sqrt(r * r - a * a))
                if h / math.hypot(h, a) >= eps:
                    return False
        return True

    def in_good_cone(self, x, eps, r):
        pts, _ = _as_points(x, self.d)
        slope = eps / math.sqrt(1 - eps * eps)
        result = np.zeros(len(pts), dtype=bool)
        for i in range(self.d):
            if self.sides[i] < r:
                continue
            others = [j for j in range(self.d) if j != i]
            glo = self.lower[others] + r
            ghi = self.upper[others] - r
            if np.any(glo > ghi):
                continue
            tan = pts[:, others]
            gap = np.linalg.norm(np.maximum(np.maximum(glo - tan, tan - ghi), 0), axis=1)
            for h in (pts[:, i] - self.lower[i], self.upper[i] - pts[:, i]):
                ok = (h > 0) & (h < r)
                half = np.minimum(h * slope, np.sqrt(np.maximum(r * r - h * h, 0)))
                result |= ok & (gap < half)
        return result

    def strip_area(self, s):
        s = float(s)
        if s <= 0:
            return 0.0
        return self.volume - float(np.prod(np.maximum(self.sides - 2 * s, 0)))

    def strip_area_derivative(self, s):
        s = float(s)
        if s < 0 or s >= self.inradius:
            return 0.0
        inner = self.sides - 2 * s
        return float(2 * sum(np.prod(np.delete(inner, i)) for i in range(self.d)))

    def strip_breakpoints(self):
        return np.array(sorted({0.0, *(self.sides / 2).tolist()}))


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------

class Ball(Domain):
    shape = "ball"

    def __init__(self, center=None, radius=1.0, d=None):
        if center is None:
            center = np.zeros(2 if d is None else d)
        c = np.array(center, dtype=float)
        if c.ndim != 1 or len(c) < 2:
            raise ArgumentError("ball centre must be a vector of dimension >= 2")
        if d is not None and d != len(c):
            raise ArgumentError("dimension does not match the centre")
        if not radius > 0:
            raise ArgumentError("ball radius must be positive")
        self.d = len(c)
        self.center = c
        self.radius = float(radius)
        self.volume = unit_ball_volume(self.d) * self.radius ** self.d
        self.perimeter = sphere_area(self.d) * self.radius ** (self.d - 1)
        self.inradius = self.radius

    def __repr__(self):
        return f"Ball(d={self.d}, R={self.radius:g})"

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def translated(self, shift):
        return Ball(self.center + np.asarray(shift, float), self.radius)

    def sample_uniform(self, rng, n):
        g = rng.standard_normal((n, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = self.radius * rng.random(n) ** (1.0 / self.d)
        return self.center + g * rad[:, None]

    def signed_distance(self, x):
        pts, single = _as_points(x, self.d)
        out = self.radius - np.linalg.norm(pts - self.center, axis=1)
        return float(out[0]) if single else out

    def nearest_boundary_point(self, x):
        pts, _ = _as_points(x, self.d)
        w = pts[0] - self.center
        n = float(np.linalg.norm(w))
        if n <= BOUNDARY_TOL * self.radius:
            e = np.zeros(self.d)
            e[0] = 1.0
            return NearestPoint(self.center - self.radius * e, e, self.radius, True)
        u = w / n
        return NearestPoint(self.center + self.radius * u, -u, abs(self.radius - n), False)

    def boundary_normal(self, q):
        w = np.asarray(q, float) - self.center
        n = float(np.linalg.norm(w))
        if abs(n - self.radius) > 1e-12 * max(1.0, self.radius):
            raise ArgumentError(f"point {q} is not on the sphere")
        return -w / n, 0

    def is_good_point(self, q, eps, r):
        """Exact: ``|(x-q).v| / |x-q| = |x-q| / (2R)`` on the sphere, so good iff ``r <= 2 R eps``."""
        if not eps > 0 or not r > 0:
            raise ArgumentError("need eps > 0 and r > 0")
        self.boundary_normal(q)
        return r <= 2 * self.radius * eps

    def in_good_cone(self, x, eps, r):
        pts, _ = _as_points(x, self.d)
        if r > 2 * self.radius * eps:
            return np.zeros(len(pts), dtype=bool)
        h = self.radius - np.linalg.norm(pts - self.center, axis=1)
        return (h > 0) & (h < r)

    def strip_area(self, s):
        s = float(s)
        if s <= 0:
            return 0.0
        return self.volume - unit_ball_volume(self.d) * max(self.radius - s, 0.0) ** self.d

    def strip_area_derivative(self, s):
        s = float(s)
        if s < 0 or s >= self.radius:
            return 0.0
        return sphere_area(self.d) * (self.radius - s) ** (self.d - 1)

    def strip_breakpoints(self):
        return np.array([0.0, self.radius])


# ---------------------------------------------------------------------------
# cones and half-spaces
# ---------------------------------------------------------------------------

def gamma_contains(q, v, eps, r, x):
    """Exact membership in ``Gamma_r(q, eps)``; vectorised over rows of ``x``."""
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    x = np.asarray(x, float)
    w = x - q
    n = np.linalg.norm(w, axis=-1)
    return ((w @ v) > math.sqrt(1 - eps * eps) * n) & (n < r)


def inner_outer_cones(q, v, eps, r):
    """Predicates for the inner cone ``I_r(q)`` and outer cone ``U_r(q)``."""
    q = np.asarray(q, float)
    v = np.asarray(v, float)

    def inner(y):
        w = np.asarray(y, float) - q
        n = np.linalg.norm(w, axis=-1)
        return ((w @ v) > eps * n) & (n < r)

    def outer(y):
        w = np.asarray(y, float) - q
        n = np.linalg.norm(w, axis=-1)
        return ((w @ v) < -eps * n) & (n < r)

    return inner, outer


def _sample_ball(rng, center, r, n):
    d = len(center)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return center + g * (r * rng.random(n) ** (1.0 / d))[:, None]


def matched_halfspace(domain, x, q, v, eps, r, n_check=1000, seed=0):
    """Half-space with inward normal ``v`` whose boundary lies ``delta_D(x)`` below ``x``.

    The sandwich ``I_r(q) in H* in complement(U_r(q))`` and ``x in H*`` are
    checked on ``n_check`` random points of ``B(q, r)`` each.
    """
    x = np.asarray(x, float)
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    if not gamma_contains(q, v, eps, r, x):
        raise ArgumentError("x must lie in Gamma_r(q, eps)")
    delta = float(domain.signed_distance(x))
    H = HalfSpace(x - delta * v, v / np.linalg.norm(v))
    if not H.contains(x) or abs(H.signed_distance(x) - delta) > 1e-12 * max(1.0, delta):
        raise GeometryError("matched half-space does not contain x at distance delta_D(x)")
    inner, outer = inner_outer_cones(q, v, eps, r)
    rng = np.random.default_rng(seed)
    checked = 0
    while checked < n_check:
        y = _sample_ball(rng, q, r, 4 * n_check)
        yi = y[inner(y)]
        if np.any(~H.contains(yi)):
            raise GeometryError("inner cone sample falls outside H*; bad (q, v) pairing")
        yu = y[outer(y)]
        if np.any(H.contains(yu)):
            raise GeometryError("outer cone sample falls inside H*; bad (q, v) pairing")
        checked += min(len(yi), len(yu))
    return H


@dataclass
class BadStripReport:
    measure: float
    stderr: float
    bound: float
    within_bound: bool
    n: int
    fractions: dict = field(default_factory=dict)


def bad_strip_measure(domain, spec: GoodSetSpec, n=200_000, seed=0, s0=None):
    """Monte Carlo area of ``{delta < s} & D1`` against ``s eps (4 + perimeter)``.

    Points are drawn uniformly in the strip by rejection from the bounding
    box, so the estimate is ``strip_area * fraction_D1``.
    """
    s0 = domain.s0() if s0 is None else s0
    if spec.s > s0:
        raise ArgumentError(f"strip width s={spec.s:g} exceeds s0={s0:g}")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    strip = domain.strip_area(spec.s)
    bad = 0
    total = 0
    while total < n:
        x = lo + (hi - lo) * rng.random((min(1 << 16, 4 * n), domain.d))
        dd = domain.signed_distance(x)
        x = x[(dd > 0) & (dd < spec.s)][: n - total]
        if len(x) == 0:
            continue
        lab = domain.classify(spec, x)
        bad += int(np.sum(lab == int(Region.D1)))
        total += len(x)
    frac = bad / total
    measure = strip * frac
    stderr = strip * math.sqrt(max(frac * (1 - frac), 0.0) / total)
    bound = spec.s * spec.eps * (4 + domain.perimeter)
    return BadStripReport(measure, stderr, bound, measure <= bound + 3 * stderr, total,
                          {"D1": frac, "D2": 1 - frac})


def measures(domain):
    """``(volume, perimeter, inradius)``."""
    return domain.volume, domain.perimeter, domain.inradius
