"""Nonnegative test functions on R^d.

Every variant is an immutable value object that can be evaluated at an
array of points, reports a bounding ball of its support, and serializes to
a JSON-compatible dict with a ``"kind"`` tag.

Points are passed as arrays of shape ``(..., d)``; in one dimension a plain
array of shape ``(...)`` is also accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize


class SpecError(ValueError):
    """Raised when a function spec (or a request on it) is malformed."""


INV_E = math.exp(-1.0)

# Kernel piece codes shared with the 1D quadrature kernels.
PIECE_INTERVAL = 0
PIECE_POWERLOG = 1
PIECE_BUMP = 2
PIECE_GRID = 3
PIECE_ONE = 4


def sphere_area(d):
    """Surface area of the unit sphere in R^d (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def ball_volume(d, r=1.0):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * r ** d


def _point(v, name="point"):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1 or a.size == 0 or not np.all(np.isfinite(a)):
        raise SpecError(f"{name} must be a finite point, got {v!r}")
    return tuple(float(c) for c in a)


def _as_points(x, d):
    """Coerce ``x`` to an array of shape (n, d); also return the batch shape."""
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        shape = x.shape
        return x.reshape(-1, 1), shape
    if x.shape[-1] != d:
        raise SpecError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x.reshape(-1, d), x.shape[:-1]


class FunctionSpec:
    """Base class of all function variants."""

    kind = "abstract"

    @property
    def dim(self):
        raise NotImplementedError

    def _values(self, pts):
        raise NotImplementedError

    def __call__(self, x):
        pts, shape = _as_points(x, self.dim)
        return self._values(pts).reshape(shape)

    def support_ball(self):
        """(center, radius) of a closed ball containing the support."""
        raise NotImplementedError

    def bounding_box(self):
        c, r = self.support_ball()
        c = np.asarray(c)
        return c - r, c + r

    def to_dict(self):
        raise NotImplementedError

    def pieces_1d(self):
        """Kernel encoding for d=1: list of 6-float rows and grid value arrays."""
        raise SpecError(f"{self.kind} has no 1D kernel encoding")


@dataclass(frozen=True)
class IndicatorBall(FunctionSpec):
    center: tuple
    radius: float

    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center, "center"))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise SpecError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    @property
    def measure(self):
        return ball_volume(self.dim, self.radius)

    def _values(self, pts):
        r2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=1)
        return (r2 <= self.radius ** 2).astype(float)

    def support_ball(self):
        return np.asarray(self.center), self.radius

    def interval(self):
        c = self.center[0]
        return c - self.radius, c + self.radius

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}

    def pieces_1d(self):
        lo, hi = self.interval()
        return [[PIECE_INTERVAL, 1.0, lo, hi, 0.0, 0.0]], []


@dataclass(frozen=True)
class IndicatorBox(FunctionSpec):
    corner: tuple
    sides: tuple

    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "corner", _point(self.corner, "corner"))
        sides = _point(self.sides, "sides")
        if len(sides) != len(self.corner) or min(sides) <= 0:
            raise SpecError("box sides must be positive, one per coordinate")
        object.__setattr__(self, "sides", sides)

    @property
    def dim(self):
        return len(self.corner)

    @property
    def measure(self):
        return float(np.prod(self.sides))

    def _values(self, pts):
        lo = np.asarray(self.corner)
        hi = lo + np.asarray(self.sides)
        return np.all((pts >= lo) & (pts <= hi), axis=1).astype(float)

    def support_ball(self):
        lo = np.asarray(self.corner)
        half = 0.5 * np.asarray(self.sides)
        return lo + half, float(np.linalg.norm(half))

    def bounding_box(self):
        lo = np.asarray(self.corner)
        return lo, lo + np.asarray(self.sides)

    def interval(self):
        return self.corner[0], self.corner[0] + self.sides[0]

    def to_dict(self):
        return {"kind": self.kind, "corner": list(self.corner), "sides": list(self.sides)}

    def pieces_1d(self):
        lo, hi = self.interval()
        return [[PIECE_INTERVAL, 1.0, lo, hi, 0.0, 0.0]], []


def _sets_disjoint(s1, s2):
    """Conservative disjointness test (False means 'may overlap')."""
    lo1, hi1 = s1.bounding_box()
    lo2, hi2 = s2.bounding_box()
    if np.any(hi1 < lo2) or np.any(hi2 < lo1):
        return True
    if isinstance(s1, IndicatorBall) and isinstance(s2, IndicatorBall):
        dist = np.linalg.norm(np.subtract(s1.center, s2.center))
        return dist >= s1.radius + s2.radius
    if isinstance(s1, IndicatorBox) and isinstance(s2, IndicatorBox):
        return bool(np.any(hi1 <= lo2) or np.any(hi2 <= lo1))
    ball, box = (s1, s2) if isinstance(s1, IndicatorBall) else (s2, s1)
    lo, hi = box.bounding_box()
    nearest = np.clip(ball.center, lo, hi)
    return np.linalg.norm(nearest - np.asarray(ball.center)) >= ball.radius


@dataclass(frozen=True)
class SimpleFunction(FunctionSpec):
    """Finite nonnegative combination of ball/box indicators; overlaps add."""

    terms: tuple
    d: int = 0

    kind = "simple"

    def __post_init__(self):
        terms = []
        for coef, s in self.terms:
            if not isinstance(s, (IndicatorBall, IndicatorBox)):
                raise SpecError("simple-function sets must be balls or boxes")
            if not (coef >= 0 and math.isfinite(coef)):
                raise SpecError(f"coefficients must be nonnegative, got {coef}")
            terms.append((float(coef), s))
        dims = {s.dim for _, s in terms}
        if self.d:
            dims.add(int(self.d))
        if len(dims) != 1:
            raise SpecError("simple function needs one consistent dimension")
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "d", dims.pop())

    @property
    def dim(self):
        return self.d

    def _values(self, pts):
        out = np.zeros(len(pts))
        for coef, s in self.terms:
            out += coef * s._values(pts)
        return out

    def support_ball(self):
        if not self.terms:
            return np.zeros(self.d), 0.0
        lo = np.min([s.bounding_box()[0] for _, s in self.terms], axis=0)
        hi = np.max([s.bounding_box()[1] for _, s in self.terms], axis=0)
        return 0.5 * (lo + hi), float(np.linalg.norm(0.5 * (hi - lo)))

    def bounding_box(self):
        if not self.terms:
            return np.zeros(self.d), np.zeros(self.d)
        lo = np.min([s.bounding_box()[0] for _, s in self.terms], axis=0)
        hi = np.max([s.bounding_box()[1] for _, s in self.terms], axis=0)
        return lo, hi

    def to_dict(self):
        return {
            "kind": self.kind,
            "d": self.d,
            "terms": [{"coef": c, "set": s.to_dict()} for c, s in self.terms],
        }

    def pieces_1d(self):
        rows = []
        for coef, s in self.terms:
            lo, hi = s.interval()
            rows.append([PIECE_INTERVAL, coef, lo, hi, 0.0, 0.0])
        return rows, []

    def level_pieces(self):
        """Exact (value, measure) decomposition, or None when not available.

        Available in d=1, for boxes in any dimension (coordinate
        compression) and for pairwise disjoint sets.
        """
        terms = [(c, s) for c, s in self.terms if c > 0]
        if not terms:
            return []
        if self.d == 1 or all(isinstance(s, IndicatorBox) for _, s in terms):
            los = [s.bounding_box()[0] for _, s in terms]
            his = [s.bounding_box()[1] for _, s in terms]
            axes = [np.unique(np.concatenate([[lo[k] for lo in los], [hi[k] for hi in his]]))
                    for k in range(self.d)]
            mids = np.meshgrid(*[0.5 * (a[1:] + a[:-1]) for a in axes], indexing="ij")
            vols = np.ones_like(mids[0])
            for k, a in enumerate(axes):
                shape = [1] * self.d
                shape[k] = -1
                vols = vols * np.diff(a).reshape(shape)
            pts = np.stack([m.ravel() for m in mids], axis=1)
            vals = np.zeros(len(pts))
            for (c, _), lo, hi in zip(terms, los, his):
                vals += c * np.all((pts > lo) & (pts < hi), axis=1)
            return _merge_levels(vals, vols.ravel())
        for i in range(len(terms)):
            for k in range(i + 1, len(terms)):
                if not _sets_disjoint(terms[i][1], terms[k][1]):
                    return None
        return _merge_levels(np.array([c for c, _ in terms]),
                             np.array([s.measure for _, s in terms]))


def _merge_levels(vals, measures):
    keep = (vals > 0) & (measures > 0)
    vals, measures = vals[keep], measures[keep]
    if vals.size == 0:
        return []
    uniq, inv = np.unique(vals, return_inverse=True)
    tot = np.bincount(inv, weights=measures)
    return [(float(v), float(m)) for v, m in zip(uniq[::-1], tot[::-1])]


class _Radial(FunctionSpec):
    """Shared machinery for radial profiles centred at ``center``."""

    def _center(self):
        return np.asarray(self.center) if self.center is not None else np.zeros(self.d)

    @property
    def dim(self):
        return self.d

    def profile(self, r):
        raise NotImplementedError

    def _values(self, pts):
        # hypot avoids the underflow of summed squares at tiny radii
        r = np.hypot.reduce(np.abs(pts - self._center()), axis=1)
        return self.profile(r)

    def outer_radius(self):
        raise NotImplementedError

    def support_ball(self):
        return self._center(), self.outer_radius()


@dataclass(frozen=True)
class RadialPowerLog(_Radial):
    """``|x|^-alpha (log 1/|x|)^-kappa`` on ``|x| <= cutoff``.

    ``kappa = 0`` drops the logarithm, and then any cutoff is allowed.
    """

    d: int
    alpha: float
    kappa: float
    cutoff: float = INV_E
    center: tuple = None

    kind = "powerlog"

    def __post_init__(self):
        if int(self.d) < 1:
            raise SpecError("dimension must be >= 1")
        object.__setattr__(self, "d", int(self.d))
        if not 0 < self.alpha < self.d:
            raise SpecError(f"alpha must lie in (0, d), got {self.alpha}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise SpecError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.cutoff > 0:
            raise SpecError("cutoff must be positive")
        if self.kappa > 0 and self.cutoff > INV_E * (1 + 1e-12):
            raise SpecError(f"cutoff must be <= 1/e when kappa > 0, got {self.cutoff}")
        if self.center is not None:
            c = _point(self.center, "center")
            if len(c) != self.d:
                raise SpecError("center dimension mismatch")
            object.__setattr__(self, "center", c)
        for name in ("alpha", "kappa", "cutoff"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r > 0) & (r <= self.cutoff)
        ri = r[inside]
        v = ri ** -self.alpha
        if self.kappa:
            v = v * np.log(1.0 / ri) ** -self.kappa
        out[inside] = v
        out[r == 0] = np.inf
        return out

    def outer_radius(self):
        return self.cutoff

    def _turning_radius(self):
        # profile decreases on (0, r_min) and increases on (r_min, cutoff]
        if self.kappa == 0:
            return self.cutoff
        return min(self.cutoff, math.exp(-self.kappa / self.alpha))

    def superlevel_measure(self, lam):
        """Exact measure of {h > lam} by root finding on the monotone branches."""
        if lam <= 0:
            return ball_volume(self.d, self.cutoff)
        if self.kappa == 0:
            return ball_volume(self.d, min(self.cutoff, lam ** (-1.0 / self.alpha)))
        # with r = e^-s the log-profile is phi(s) = alpha s - kappa log s
        a, k = self.alpha, self.kappa
        phi = lambda s: a * s - k * math.log(s)
        L = math.log(lam)
        st = -math.log(self._turning_radius())
        if L <= phi(st):
            return ball_volume(self.d, self.cutoff)
        hi = st + 1.0
        while phi(hi) <= L:
            hi = st + 2.0 * (hi - st)
        s1 = optimize.brentq(lambda s: phi(s) - L, st, hi, xtol=1e-14, rtol=1e-15)
        vol = ball_volume(self.d) * math.exp(-self.d * s1)
        sc = -math.log(self.cutoff)
        if sc < st and phi(sc) > L:
            s2 = optimize.brentq(lambda s: phi(s) - L, sc, st, xtol=1e-14, rtol=1e-15)
            vol += ball_volume(self.d, self.cutoff) - ball_volume(self.d, math.exp(-s2))
        return vol

    def to_dict(self):
        out = {"kind": self.kind, "d": self.d, "alpha": self.alpha,
               "kappa": self.kappa, "cutoff": self.cutoff}
        if self.center is not None:
            out["center"] = list(self.center)
        return out

    def pieces_1d(self):
        if self.d != 1:
            raise SpecError("1D encoding requested for a multi-dimensional function")
        c = self._center()[0]
        return [[PIECE_POWERLOG, 1.0, c, self.alpha, self.kappa, self.cutoff]], []


@lru_cache(maxsize=None)
def _bump_mass(d):
    # mass of exp(-1/(1-|8x|^2)) on |x| < 1/8
    val, _ = integrate.quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (d - 1),
                            0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    return sphere_area(d) * val * 8.0 ** -d


@lru_cache(maxsize=None)
def bump_lp_norm(d, p):
    """``||Phi||_p`` of the built-in unit-mass bump."""
    c = 1.0 / _bump_mass(d)
    if math.isinf(p):
        return c * math.exp(-1.0)
    val, _ = integrate.quad(
        lambda r: (c * math.exp(-1.0 / (1.0 - (8 * r) ** 2))) ** p * r ** (d - 1),
        0.0, 0.125, epsabs=0, epsrel=1e-13, limit=200)
    return (sphere_area(d) * val) ** (1.0 / p)


@dataclass(frozen=True)
class SmoothBump(_Radial):
    """``t^(-d/p) Phi(x/t)`` for the built-in mollifier ``Phi``.

    ``Phi`` is proportional to ``exp(-1/(1-|8x|^2))`` on ``|x| < 1/8`` and
    has unit mass.  ``p = inf`` means no normalization factor.
    """

    d: int
    t: float = 1.0
    p: float = 1.0
    center: tuple = None

    kind = "bump"

    def __post_init__(self):
        if int(self.d) < 1:
            raise SpecError("dimension must be >= 1")
        object.__setattr__(self, "d", int(self.d))
        if not (self.t > 0 and math.isfinite(self.t)):
            raise SpecError(f"bump scale must be positive, got {self.t}")
        if not self.p >= 1:
            raise SpecError(f"normalization exponent must be >= 1, got {self.p}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "p", float(self.p))
        if self.center is not None:
            c = _point(self.center, "center")
            if len(c) != self.d:
                raise SpecError("center dimension mismatch")
            object.__setattr__(self, "center", c)

    @property
    def amplitude(self):
        scale = 1.0 if math.isinf(self.p) else self.t ** (-self.d / self.p)
        return scale / _bump_mass(self.d)

    def profile(self, r):
        z = 8.0 * np.asarray(r, dtype=float) / self.t
        out = np.zeros_like(z)
        inside = z < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - z[inside] ** 2))
        return out

    def profile_inverse(self, lam):
        """Radius where the (decreasing) profile equals ``lam``."""
        rel = lam / self.amplitude
        if rel >= math.exp(-1.0):
            return 0.0
        if rel <= 0:
            return self.outer_radius()
        return self.t / 8.0 * math.sqrt(1.0 + 1.0 / math.log(rel))

    def superlevel_measure(self, lam):
        return ball_volume(self.d, self.profile_inverse(lam))

    def outer_radius(self):
        return self.t / 8.0

    def to_dict(self):
        out = {"kind": self.kind, "d": self.d, "t": self.t,
               "p": "inf" if math.isinf(self.p) else self.p}
        if self.center is not None:
            out["center"] = list(self.center)
        return out

    def pieces_1d(self):
        if self.d != 1:
            raise SpecError("1D encoding requested for a multi-dimensional function")
        c = self._center()[0]
        return [[PIECE_BUMP, self.amplitude, c, self.t, 0.0, 0.0]], []


@dataclass(frozen=True, eq=False)
class GridFunction(FunctionSpec):
    """Multilinear interpolant of nodal values.

    Node ``i`` sits at ``origin + i * spacing``; the function vanishes
    outside the node box.
    """

    origin: tuple
    spacing: float
    values: np.ndarray

    kind = "grid"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        origin = _point(self.origin, "origin")
        if vals.ndim != len(origin):
            raise SpecError("values must be a d-dimensional array matching origin")
        if min(vals.shape) < 2:
            raise SpecError("grid needs at least two nodes per axis")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise SpecError("grid values must be finite and nonnegative")
        if not self.spacing > 0:
            raise SpecError("grid spacing must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", float(self.spacing))

    def __eq__(self, other):
        return (isinstance(other, GridFunction) and self.origin == other.origin
                and self.spacing == other.spacing
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.origin, self.spacing, self.values.tobytes()))

    @property
    def dim(self):
        return len(self.origin)

    def bounding_box(self):
        lo = np.asarray(self.origin)
        return lo, lo + self.spacing * (np.asarray(self.values.shape) - 1)

    def support_ball(self):
        lo, hi = self.bounding_box()
        return 0.5 * (lo + hi), float(np.linalg.norm(0.5 * (hi - lo)))

    def _values(self, pts):
        pos = (pts - np.asarray(self.origin)) / self.spacing
        n = np.asarray(self.values.shape)
        inside = np.all((pos >= 0) & (pos <= n - 1), axis=1)
        out = np.zeros(len(pts))
        if not inside.any():
            return out
        pos = pos[inside]
        idx = np.minimum(np.floor(pos).astype(int), n - 2)
        w = pos - idx
        acc = np.zeros(len(pos))
        for corner in range(2 ** self.dim):
            bits = [(corner >> k) & 1 for k in range(self.dim)]
            weight = np.ones(len(pos))
            for k, b in enumerate(bits):
                weight *= w[:, k] if b else 1.0 - w[:, k]
            acc += weight * self.values[tuple(idx[:, k] + bits[k] for k in range(self.dim))]
        out[inside] = acc
        return out

    def to_dict(self):
        return {"kind": self.kind, "origin": list(self.origin), "spacing": self.spacing,
                "values": self.values.tolist()}

    def pieces_1d(self):
        if self.dim != 1:
            raise SpecError("1D encoding requested for a multi-dimensional function")
        n = self.values.shape[0]
        return [[PIECE_GRID, 1.0, self.origin[0], self.spacing, float(n), 0.0]], [self.values]


@dataclass(frozen=True)
class ConstantOne(FunctionSpec):
    """The constant 1 on R^d.  Internal helper for linear operators."""

    d: int

    kind = "one"

    @property
    def dim(self):
        return self.d

    def _values(self, pts):
        return np.ones(len(pts))

    def support_ball(self):
        return None

    def to_dict(self):
        return {"kind": self.kind, "d": self.d}

    def pieces_1d(self):
        return [[PIECE_ONE, 1.0, 0.0, 0.0, 0.0, 0.0]], []


def zero(d):
    return SimpleFunction((), d=d)


def bump(d):
    """The unit-mass mollifier ``Phi`` itself."""
    return SmoothBump(d, 1.0, 1.0)


def encode_1d(f):
    """Flatten a 1D spec into (pieces[n, 6], grid_values) for the kernels."""
    rows, grids = f.pieces_1d()
    offset = 0
    out = []
    for row in rows:
        row = list(row)
        if row[0] == PIECE_GRID:
            row[5] = float(offset)
            offset += int(row[4])
        out.append(row)
    pieces = np.asarray(out, dtype=float).reshape(-1, 6)
    gvals = np.concatenate(grids) if grids else np.zeros(1)
    return np.ascontiguousarray(pieces), np.ascontiguousarray(gvals, dtype=float)


def evaluate(f, x):
    """Value of ``f`` at a single point ``x`` (scalar accepted when d=1)."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (f.dim,):
        raise SpecError(f"expected a point in R^{f.dim}, got {x!r}")
    if not np.all(np.isfinite(pt)):
        raise SpecError("evaluation point must be finite")
    return float(f._values(pt.reshape(1, -1))[0])


def dilate(f, t, p):
    """Rescale a bump: ``t^(-d/p) f(x/t)`` for ``f`` a :class:`SmoothBump`.

    The L^p norm of the result equals that of ``Phi`` for every ``t``.
    """
    if not isinstance(f, SmoothBump):
        raise SpecError("dilate expects a SmoothBump")
    if not t > 0:
        raise SpecError(f"dilation factor must be positive, got {t}")
    return SmoothBump(f.d, f.t * t, p, f.center)


def make_h(d, alpha):
    """Sharpness witness with ``kappa = (d + alpha) / (2 d)`` and cutoff 1/e."""
    if not 0 < alpha < d:
        raise SpecError(f"alpha must lie in (0, d), got {alpha}")
    return RadialPowerLog(d, alpha, (d + alpha) / (2.0 * d), INV_E)


def translate(f, z):
    """Shift ``f`` by ``z``: returns the spec of ``x -> f(x - z)``."""
    z = np.asarray(_point(z, "shift"))
    if isinstance(f, IndicatorBall):
        return IndicatorBall(np.asarray(f.center) + z, f.radius)
    if isinstance(f, IndicatorBox):
        return IndicatorBox(np.asarray(f.corner) + z, f.sides)
    if isinstance(f, SimpleFunction):
        return SimpleFunction(tuple((c, translate(s, z)) for c, s in f.terms), d=f.d)
    if isinstance(f, RadialPowerLog):
        return RadialPowerLog(f.d, f.alpha, f.kappa, f.cutoff, f._center() + z)
    if isinstance(f, SmoothBump):
        return SmoothBump(f.d, f.t, f.p, f._center() + z)
    if isinstance(f, GridFunction):
        return GridFunction(np.asarray(f.origin) + z, f.spacing, f.values)
    raise SpecError(f"cannot translate {f.kind}")


def rescale(f, lam):
    """Spec of ``x -> f(lam x)`` for indicator-based specs."""
    if not lam > 0:
        raise SpecError("scale must be positive")
    if isinstance(f, IndicatorBall):
        return IndicatorBall(np.asarray(f.center) / lam, f.radius / lam)
    if isinstance(f, IndicatorBox):
        return IndicatorBox(np.asarray(f.corner) / lam, np.asarray(f.sides) / lam)
    if isinstance(f, SimpleFunction):
        return SimpleFunction(tuple((c, rescale(s, lam)) for c, s in f.terms), d=f.d)
    if isinstance(f, GridFunction):
        return GridFunction(np.asarray(f.origin) / lam, f.spacing / lam, f.values)
    raise SpecError(f"cannot rescale {f.kind}")


# -- rearrangement ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rearrangement:
    """Step approximation of a decreasing rearrangement.

    ``values[k]`` is the value of f* on ``[edges[k-1], edges[k])`` with
    ``edges[-1] = 0``; f* vanishes beyond ``edges[-1]``.
    """

    edges: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.edges, t, side="right")
        vals = np.append(self.values, 0.0)
        return vals[np.minimum(idx, len(self.values))]

    @property
    def total_measure(self):
        return float(self.edges[-1]) if len(self.edges) else 0.0


def rearrangement_from_levels(levels):
    """Build a rearrangement from (value, measure) pairs in any order."""
    levels = sorted(((v, m) for v, m in levels if v > 0 and m > 0), key=lambda vm: -vm[0])
    vals = np.array([v for v, _ in levels], dtype=float)
    edges = np.cumsum([m for _, m in levels], dtype=float)
    return Rearrangement(edges, vals)


def rearrangement_from_samples(values, measures):
    """Sort cell values (weighted by cell measure) into a rearrangement."""
    values = np.asarray(values, dtype=float).ravel()
    measures = np.broadcast_to(np.asarray(measures, dtype=float), values.shape).ravel()
    keep = values > 0
    values, measures = values[keep], measures[keep]
    order = np.argsort(-values, kind="stable")
    return Rearrangement(np.cumsum(measures[order]), values[order])


def sample_cells(f, lo, hi, n):
    """Cell-centre values of ``f`` on a uniform grid with ``n`` cells per axis."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    h = (hi - lo) / n
    axes = [lo[k] + h[k] * (np.arange(n) + 0.5) for k in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, f._values(pts), float(np.prod(h))


def decreasing_rearrangement_samples(f, n, domain):
    """Piecewise-constant decreasing rearrangement of ``f``.

    Parameters
    ----------
    f : FunctionSpec
    n : int
        Cells per axis for sampled variants; number of steps for radial
        profiles whose inverse is known in closed form.
    domain : (lo, hi)
        Box that must contain the support of ``f``.

    Returns
    -------
    Rearrangement
        Exact for indicator and simple-function specs.
    """
    if n < 1:
        raise SpecError("n must be >= 1")
    lo = np.atleast_1d(np.asarray(domain[0], dtype=float))
    hi = np.atleast_1d(np.asarray(domain[1], dtype=float))
    if lo.shape != (f.dim,) or hi.shape != (f.dim,) or np.any(hi <= lo):
        raise SpecError("domain must be a nondegenerate box in R^d")
    blo, bhi = f.bounding_box()
    if np.any(blo < lo - 1e-12) or np.any(bhi > hi + 1e-12):
        raise SpecError("domain does not cover the support of f")
    levels = exact_levels(f)
    if levels is not None:
        return rearrangement_from_levels(levels)
    if isinstance(f, RadialPowerLog) and f.kappa == 0:
        # f*(t) = (t / omega_d)^(-alpha/d) on (0, omega_d cutoff^d]
        total = ball_volume(f.d, f.cutoff)
        edges = total * np.arange(1, n + 1) / n
        return Rearrangement(edges, (edges / ball_volume(f.d)) ** (-f.alpha / f.d))
    if isinstance(f, SmoothBump):
        total = ball_volume(f.d, f.outer_radius())
        edges = total * np.arange(1, n + 1) / n
        radii = (edges / ball_volume(f.d)) ** (1.0 / f.d)
        vals = f.profile(radii)
        keep = vals > 0
        return Rearrangement(edges[keep], vals[keep])
    _, vals, cell = sample_cells(f, lo, hi, n)
    return rearrangement_from_samples(vals, cell)


def exact_levels(f):
    """(value, measure) decomposition when ``f`` is piecewise constant."""
    if isinstance(f, (IndicatorBall, IndicatorBox)):
        return [(1.0, f.measure)]
    if isinstance(f, SimpleFunction):
        return f.level_pieces()
    return None


# -- serialization ---------------------------------------------------------


def to_dict(f):
    return f.to_dict()


def from_dict(obj):
    """Inverse of :meth:`FunctionSpec.to_dict`."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError("function spec must be an object with a 'kind' field")
    kind = obj["kind"]
    allowed = {
        "ball": {"center", "radius"},
        "box": {"corner", "sides"},
        "simple": {"d", "terms"},
        "powerlog": {"d", "alpha", "kappa", "cutoff", "center"},
        "bump": {"d", "t", "p", "center"},
        "grid": {"origin", "spacing", "values"},
        "one": {"d"},
    }
    if kind not in allowed:
        raise SpecError(f"unknown function kind {kind!r}")
    extra = set(obj) - allowed[kind] - {"kind"}
    if extra:
        raise SpecError(f"unknown keys for {kind}: {sorted(extra)}")
    try:
        if kind == "ball":
            return IndicatorBall(obj["center"], obj["radius"])
        if kind == "box":
            return IndicatorBox(obj["corner"], obj["sides"])
        if kind == "simple":
            terms = tuple((t["coef"], from_dict(t["set"])) for t in obj["terms"])
            return SimpleFunction(terms, d=obj.get("d", 0))
        if kind == "powerlog":
            return RadialPowerLog(obj["d"], obj["alpha"], obj["kappa"],
                                  obj.get("cutoff", INV_E), obj.get("center"))
        if kind == "bump":
            p = obj.get("p", 1.0)
            return SmoothBump(obj["d"], obj.get("t", 1.0),
                              math.inf if p in ("inf", None) else p, obj.get("center"))
        if kind == "grid":
            return GridFunction(obj["origin"], obj["spacing"], np.asarray(obj["values"]))
        return ConstantOne(int(obj["d"]))
    except (KeyError, TypeError) as exc:
        raise SpecError(f"malformed {kind} spec: {exc}") from None


def parse_spec(text, d=1, alpha=None):
    """Parse the compact CLI notation.

    ``ball:c1,..,cd,r``  ``box:corner..,sides..``  ``h`` (sharpness witness,
    needs ``alpha``)  ``powerlog:alpha,kappa[,cutoff]``  ``bump:t[,p]``
    ``zero``, or a JSON object.
    """
    import json

    text = text.strip()
    if text.startswith("{"):
        try:
            return from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"bad JSON function spec: {exc}") from None
    name, _, rest = text.partition(":")
    try:
        nums = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise SpecError(f"bad numbers in function spec {text!r}") from None
    if name == "ball":
        if len(nums) != d + 1:
            raise SpecError(f"ball needs {d} center coordinates and a radius")
        return IndicatorBall(nums[:d], nums[d])
    if name == "box":
        if len(nums) != 2 * d:
            raise SpecError(f"box needs {d} corner coordinates and {d} sides")
        return IndicatorBox(nums[:d], nums[d:])
    if name == "h":
        a = nums[0] if nums else alpha
        if a is None:
            raise SpecError("h needs alpha")
        return make_h(d, a)
    if name == "powerlog":
        if len(nums) not in (2, 3):
            raise SpecError("powerlog needs alpha,kappa[,cutoff]")
        return RadialPowerLog(d, *nums)
    if name == "bump":
        if len(nums) not in (0, 1, 2):
            raise SpecError("bump takes t[,p]")
        return SmoothBump(d, *nums)
    if name == "zero":
        return zero(d)
    raise SpecError(f"unknown function spec {text!r}")


def lp_norm_radial(f, p):
    """L^p norm of a radial spec by one-dimensional quadrature."""
    if isinstance(f, SmoothBump):
        base = bump_lp_norm(f.d, p)
        if math.isinf(p):
            return base * (f.t ** (-f.d / f.p) if not math.isinf(f.p) else 1.0)
        scale = 0.0 if math.isinf(f.p) else f.d / f.p
        return base * f.t ** (f.d / p - scale)
    if not isinstance(f, RadialPowerLog):
        raise SpecError("radial norm requested for a non-radial spec")
    d, a, k, c = f.d, f.alpha, f.kappa, f.cutoff
    if math.isinf(p):
        return math.inf
    if a * p > d or (a * p == d and k * p <= 1):
        return math.inf
    if k == 0:
        return (sphere_area(d) * c ** (d - a * p) / (d - a * p)) ** (1.0 / p)
    # r = e^-s turns the integral into int e^{-s(d - a p)} s^{-k p} ds
    beta = d - a * p
    s0 = -math.log(c)
    val, _ = integrate.quad(lambda s: math.exp(-beta * (s - s0)) * s ** (-k * p),
                            s0, math.inf, epsabs=0, epsrel=1e-12, limit=400)
    return (sphere_area(d) * math.exp(-beta * s0) * val) ** (1.0 / p)

