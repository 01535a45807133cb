"""Lebesgue, weak-Lebesgue and Lorentz L^{p,1} quasi-norms.

Inputs are either a :class:`SampledField` (cell measures and values, the
discretization of an operator output on a box) or a function spec.
Piecewise-constant inputs are handled exactly through their level
decomposition; radial specs use their superlevel-set measures.

Conventions:

* ``||f||_{r,inf} = sup_lam lam |{f > lam}|^(1/r)``; for a step function the
  sup is the left limit at each level, ``max_k v_k M_k^(1/r)`` where ``M_k``
  is the measure of ``{f >= v_k}``.
* ``||f||_{p,1} = int_0^inf t^(1/p - 1) f*(t) dt = p int_0^inf |{f > lam}|^(1/p) dlam``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .functions import (FunctionSpec, GridFunction, RadialPowerLog, SmoothBump, SpecError,
                        ball_volume, exact_levels, lp_norm_radial, sample_cells)


@dataclass(frozen=True, eq=False)
class SampledField:
    """Nonnegative values on cells of a box.

    Attributes
    ----------
    centers : (n, d) array
    measures : (n,) array of positive cell measures summing to the box volume
    values : (n,) array
    box : (lo, hi) tuple of arrays
    """

    centers: np.ndarray
    measures: np.ndarray
    values: np.ndarray
    box: tuple

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        m = np.asarray(self.measures, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        lo = np.atleast_1d(np.asarray(self.box[0], dtype=float))
        hi = np.atleast_1d(np.asarray(self.box[1], dtype=float))
        if not (len(c) == len(m) == len(v)):
            raise SpecError("centers, measures and values must have equal length")
        if np.any(m <= 0):
            raise SpecError("cell measures must be positive")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise SpecError("field values must be finite and nonnegative")
        vol = float(np.prod(hi - lo))
        if len(m) and abs(np.sum(m) - vol) > 1e-9 * vol:
            raise SpecError(f"cell measures sum to {np.sum(m)}, box volume is {vol}")
        for name, val in (("centers", c), ("measures", m), ("values", v)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "box", (lo, hi))

    @property
    def d(self):
        return self.centers.shape[1]

    @property
    def n_cells(self):
        return len(self.values)

    def scaled(self, c):
        return SampledField(self.centers, self.measures, c * self.values, self.box)

    def to_csv(self, path):
        """Write ``x0..x{d-1}, cell_measure, value`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k}" for k in range(self.d)] + ["cell_measure", "value"])
            for c, m, v in zip(self.centers, self.measures, self.values):
                w.writerow([format(float(t), ".17g") for t in c]
                           + [format(float(m), ".17g"), format(float(v), ".17g")])


# -- meshes ----------------------------------------------------------------


def uniform_cells(box, n):
    """Cell centres and measures of a uniform grid with ``n`` cells per axis."""
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    if np.any(hi <= lo) or n < 1:
        raise SpecError("need a nondegenerate box and n >= 1")
    h = (hi - lo) / n
    axes = [lo[k] + h[k] * (np.arange(n) + 0.5) for k in range(len(lo))]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([g.ravel() for g in mesh], axis=1)
    return centers, np.full(len(centers), float(np.prod(h)))


def refined_cells_1d(box, n, focus=None):
    """Uniform cells on ``box`` merged with ``n`` uniform cells on ``focus``.

    ``focus = (lo, hi)`` is a subinterval where the field varies on a much
    smaller scale; its edges are added to the coarse ones.
    """
    lo, hi = float(np.ravel(box[0])[0]), float(np.ravel(box[1])[0])
    if not hi > lo or n < 1:
        raise SpecError("need a nondegenerate interval and n >= 1")
    edges = np.linspace(lo, hi, n + 1)
    if focus is not None:
        a, b = max(focus[0], lo), min(focus[1], hi)
        if b > a:
            edges = np.unique(np.concatenate([edges, np.linspace(a, b, n + 1)]))
            # drop slivers left by nearly coincident edges
            keep = np.concatenate([[True], np.diff(edges) > 1e-12 * (hi - lo)])
            edges = edges[keep]
            edges[-1] = hi
    return (0.5 * (edges[:-1] + edges[1:]))[:, None], np.diff(edges)


def sample_function(f, box, n):
    """Cell-centre samples of a spec on a uniform grid."""
    pts, vals, cell = sample_cells(f, np.ravel(box[0]), np.ravel(box[1]), n)
    return SampledField(pts, np.full(len(vals), cell), vals, box)


# -- level data ------------------------------------------------------------


def _levels(obj):
    """(values, measures) of a piecewise-constant input, else None."""
    if isinstance(obj, SampledField):
        return obj.values, obj.measures
    if isinstance(obj, FunctionSpec):
        lv = exact_levels(obj)
        if lv is None:
            return None
        if not lv:
            return np.zeros(0), np.zeros(0)
        v, m = zip(*lv)
        return np.asarray(v, dtype=float), np.asarray(m, dtype=float)
    raise SpecError(f"expected a SampledField or FunctionSpec, got {type(obj).__name__}")


def _sorted_levels(obj):
    v, m = _levels(obj)
    keep = v > 0
    v, m = v[keep], m[keep]
    order = np.argsort(-v, kind="stable")
    return v[order], np.cumsum(m[order])


def _grid_field(f):
    # refine the node grid so the piecewise-linear interpolant is well sampled
    lo, hi = f.bounding_box()
    n = 8 * max(f.values.shape)
    return sample_function(f, (lo, hi), n)


def _radial(obj):
    return isinstance(obj, (RadialPowerLog, SmoothBump))


# -- public API ------------------------------------------------------------


def distribution_function(obj, lam):
    """Measure of ``{x : value > lam}``."""
    if not lam > 0:
        raise SpecError("lambda must be positive")
    if _radial(obj):
        return float(obj.superlevel_measure(lam))
    if isinstance(obj, GridFunction):
        obj = _grid_field(obj)
    v, m = _levels(obj)
    return float(np.sum(m[v > lam]))


def lebesgue_norm(obj, p):
    """``||f||_p`` for ``0 < p <= inf``."""
    if not p > 0:
        raise SpecError("exponent must be positive")
    if _radial(obj):
        return lp_norm_radial(obj, p)
    if isinstance(obj, GridFunction):
        obj = _grid_field(obj)
    v, m = _levels(obj)
    if math.isinf(p):
        return float(np.max(v)) if len(v) else 0.0
    return float(np.sum(m * v ** p) ** (1.0 / p))


def weak_norm(obj, r):
    """``sup_lam lam |{f > lam}|^(1/r)`` for ``0 < r < inf``."""
    if not 0 < r < math.inf:
        raise SpecError("weak exponent must lie in (0, inf)")
    if _radial(obj):
        return _weak_radial(obj, r)
    if isinstance(obj, GridFunction):
        obj = _grid_field(obj)
    v, M = _sorted_levels(obj)
    if not len(v):
        return 0.0
    return float(np.max(v * M ** (1.0 / r)))


def weak_norm_from_rearrangement(rearr, r):
    """``sup_t t^(1/r) f*(t)`` for a step rearrangement."""
    if not len(rearr.values):
        return 0.0
    return float(np.max(rearr.values * rearr.edges ** (1.0 / r)))


def lorentz_p1_norm(obj, p):
    """``int_0^inf t^(1/p - 1) f*(t) dt`` for ``0 < p < inf``."""
    if not 0 < p < math.inf:
        raise SpecError("Lorentz exponent must lie in (0, inf)")
    if _radial(obj):
        return _lorentz_radial(obj, p)
    if isinstance(obj, GridFunction):
        obj = _grid_field(obj)
    v, M = _sorted_levels(obj)
    if not len(v):
        return 0.0
    prev = np.concatenate([[0.0], M[:-1]])
    return float(np.sum(v * p * (M ** (1.0 / p) - prev ** (1.0 / p))))


def lorentz_from_rearrangement(rearr, p):
    if not len(rearr.values):
        return 0.0
    prev = np.concatenate([[0.0], rearr.edges[:-1]])
    return float(np.sum(rearr.values * p * (rearr.edges ** (1.0 / p) - prev ** (1.0 / p))))


@dataclass(frozen=True)
class SetBound:
    """Set-family estimator next to the weak norm it bounds from below."""

    estimator: float
    weak_norm: float
    best_measure: float

    @property
    def ratio(self):
        return self.estimator / self.weak_norm if self.weak_norm else math.nan


def weak_norm_set_lower_bound(obj, r, s, candidate_sets=None):
    """``max_E |E|^(1/r - 1/s) ||f chi_E||_s`` over a finite family of sets.

    Parameters
    ----------
    obj : SampledField or piecewise-constant spec
    r, s : float
        ``0 < s < r < inf``.
    candidate_sets : iterable, optional
        Boolean cell masks (SampledField input) or thresholds ``lam``
        meaning ``{f >= lam}``.  Default: every superlevel set.

    Returns
    -------
    SetBound
    """
    if not 0 < s < r < math.inf:
        raise SpecError("need 0 < s < r < inf")
    if isinstance(obj, GridFunction):
        obj = _grid_field(obj)
    v, m = _levels(obj) if not _radial(obj) else (None, None)
    if v is None:
        raise SpecError("sample radial specs into a SampledField first")
    wn = weak_norm(obj, r)
    if candidate_sets is None:
        vs, M = _sorted_levels(obj)
        if not len(vs):
            return SetBound(0.0, wn, 0.0)
        order = np.argsort(-v[v > 0], kind="stable")
        partial = np.cumsum((m[v > 0] * v[v > 0] ** s)[order])
        vals = M ** (1.0 / r - 1.0 / s) * partial ** (1.0 / s)
        k = int(np.argmax(vals))
        return SetBound(float(vals[k]), wn, float(M[k]))
    sets = list(candidate_sets)
    if not sets:
        raise SpecError("candidate set family is empty")
    best, best_m = 0.0, 0.0
    for E in sets:
        mask = np.asarray(E, dtype=bool) if np.ndim(E) else v >= float(E)
        meas = float(np.sum(m[mask]))
        if meas <= 0:
            continue
        val = meas ** (1.0 / r - 1.0 / s) * float(np.sum(m[mask] * v[mask] ** s)) ** (1.0 / s)
        if val > best:
            best, best_m = val, meas
    return SetBound(best, wn, best_m)


@dataclass(frozen=True)
class NormKind:
    """``kind`` is ``"lebesgue"``, ``"weak"`` or ``"lorentz"``."""

    kind: str
    exponent: float

    def __post_init__(self):
        if self.kind not in ("lebesgue", "weak", "lorentz"):
            raise SpecError(f"unknown norm kind {self.kind!r}")
        if not self.exponent > 0:
            raise SpecError("exponent must be positive")

    def __call__(self, obj):
        if self.kind == "lebesgue":
            return lebesgue_norm(obj, self.exponent)
        if self.kind == "weak":
            return weak_norm(obj, self.exponent)
        return lorentz_p1_norm(obj, self.exponent)


# -- radial specs ----------------------------------------------------------


def _weak_finite(f, r):
    if isinstance(f, RadialPowerLog):
        return r <= f.d / f.alpha
    return True


def _weak_radial(f, r):
    if not _weak_finite(f, r):
        return math.inf
    if isinstance(f, RadialPowerLog) and f.kappa == 0:
        # lam |{f > lam}|^(1/r) increases up to lam = cutoff^-alpha
        return f.cutoff ** -f.alpha * ball_volume(f.d, f.cutoff) ** (1.0 / r)
    g = lambda t: -math.exp(t) * f.superlevel_measure(math.exp(t)) ** (1.0 / r)
    if isinstance(f, SmoothBump):
        top = math.log(_profile_max(f))
        ts = np.linspace(top - 40.0, top, 801)
    else:
        # below the profile minimum the superlevel set is constant
        rt = f._turning_radius()
        low = -f.alpha * math.log(rt) - f.kappa * math.log(math.log(1.0 / rt))
        ts = np.linspace(low, low + 60.0, 801)
    vals = np.array([g(t) for t in ts])
    k = int(np.argmin(vals))
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    res = optimize.minimize_scalar(g, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return float(max(-res.fun, -vals[k]))


def _profile_max(f):
    if isinstance(f, SmoothBump):
        return f.amplitude * math.exp(-1.0)
    return math.inf


def _lorentz_radial(f, p):
    if isinstance(f, RadialPowerLog):
        ratio = f.d / f.alpha
        if p > ratio or (p == ratio and f.kappa <= 1):
            return math.inf
        return _lorentz_powerlog(f, p)
    top = _profile_max(f)
    val, _ = integrate.quad(lambda lam: f.superlevel_measure(lam) ** (1.0 / p), 0.0, top,
                            limit=400, epsrel=1e-10)
    return p * val


def _lorentz_powerlog(f, p):
    d, a, k, c = f.d, f.alpha, f.kappa, f.cutoff
    omega = ball_volume(d)
    if k == 0:
        beta = d / (a * p)
        return p * omega ** (1.0 / p) * c ** (d / p - a) * beta / (beta - 1.0)
    # below the minimum of the profile the superlevel set is the whole ball;
    # above it, parametrize lam by r = e^-s on the decreasing branch
    rt = f._turning_radius()
    st = -math.log(rt)
    lam_t = rt ** -a * math.log(1.0 / rt) ** -k
    head = lam_t * ball_volume(d, c) ** (1.0 / p)

    def near(s):
        lam = math.exp(a * s) * s ** -k
        return f.superlevel_measure(lam) ** (1.0 / p) * lam * (a - k / s)

    def far(s):
        # outer band is empty here, so |{f > lam}| = omega e^(-d s)
        return omega ** (1.0 / p) * math.exp((a - d / p) * s) * s ** -k * (a - k / s)

    split = st + 50.0
    v1, _ = integrate.quad(near, st, split, limit=400, epsrel=1e-10)
    v2, _ = integrate.quad(far, split, math.inf, limit=400, epsrel=1e-10)
    return p * (head + v1 + v2)
