"""Integration engines for the weight |y|^(alpha - d).

Three methods are available:

``Deterministic1D``
    d = 1 only.  Fold onto u = |y|, then adaptive Gauss-Legendre on a mesh
    graded towards the singular breakpoints; cells touching u = 0 integrate
    the weight u^(alpha-1) exactly through v = u^alpha.  Each cell's error
    estimate is the gap between the n-point and (n-1)-point rules.
``MonteCarloRadial``
    Radius drawn with density proportional to u^(alpha-1) on (0, R],
    direction uniform on the sphere.  Reproducible from ``seed``.
``TensorGrid``
    Product Gauss rules (polar for the singular integral, Cartesian for
    boxes) compared against the half-resolution rule for an error estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import integrate

from . import _pykernels
from .functions import sphere_area

METHODS = ("Deterministic1D", "MonteCarloRadial", "TensorGrid")


class QuadratureError(ArithmeticError):
    """Numerical failure: non-finite samples or a divergent integral."""

    def __init__(self, message, point=None):
        super().__init__(message if point is None else f"{message} at {point}")
        self.point = point


class ConfigError(ValueError):
    """Inconsistent or out-of-range quadrature configuration."""


class BudgetWarning(RuntimeWarning):
    """The evaluation budget ran out before the tolerance was met."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Integration settings.

    ``truncation_radius = inf`` means the radius is derived from the
    supports of the inputs.  ``samples`` is the Monte Carlo sample count, the
    tensor-grid point budget, or the per-point evaluation budget of the
    deterministic method.  ``inner_cut`` bounds the width of the innermost
    graded cell from below.  ``order`` is the Gauss-Legendre order per cell
    and ``levels`` the depth of geometric grading.
    """

    method: str = "Deterministic1D"
    truncation_radius: float = math.inf
    inner_cut: float = 0.0
    samples: int = 100_000
    seed: int = 42
    rel_tol: float = 1e-3
    abs_tol: float = 1e-12
    order: int = 4
    levels: int = 40

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (isinstance(self.samples, (int, np.integer)) and self.samples >= 1):
            raise ConfigError(f"samples must be a positive integer, got {self.samples!r}")
        if not self.inner_cut >= 0:
            raise ConfigError("inner_cut must be >= 0")
        if not self.truncation_radius > self.inner_cut:
            raise ConfigError("truncation_radius must exceed inner_cut")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be positive")
        if not 2 <= self.order <= 64:
            raise ConfigError("order must lie in [2, 64]")
        if not 0 <= self.levels <= 200:
            raise ConfigError("levels must lie in [0, 200]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = asdict(self)
        if math.isinf(self.truncation_radius):
            out["truncation_radius"] = "inf"
        return out

    @classmethod
    def from_dict(cls, obj):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown quadrature keys: {sorted(extra)}")
        kw = dict(obj)
        if kw.get("truncation_radius") in ("inf", None):
            kw.pop("truncation_radius", None)
        for k in ("samples", "seed", "order", "levels"):
            if k in kw:
                if isinstance(kw[k], float) and kw[k].is_integer():
                    kw[k] = int(kw[k])
                if not isinstance(kw[k], int):
                    raise ConfigError(f"{k} must be an integer")
        return cls(**kw)


@dataclass(frozen=True)
class Estimate:
    """Result of an integration.

    ``std_error`` is the Monte Carlo standard error (0 for deterministic
    rules); ``abs_error`` is the deterministic error estimate (0 for Monte
    Carlo).
    """

    value: float
    std_error: float = 0.0
    samples_used: int = 0
    abs_error: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.std_error)):
            raise QuadratureError(f"non-finite estimate {self.value} +/- {self.std_error}")

    @property
    def error(self):
        """Combined error scale: deterministic bound plus three standard errors."""
        return self.abs_error + 3.0 * self.std_error

    def scaled(self, c):
        c = float(c)
        return Estimate(c * self.value, abs(c) * self.std_error, self.samples_used,
                        abs(c) * self.abs_error)

    def __add__(self, other):
        return Estimate(self.value + other.value,
                        math.hypot(self.std_error, other.std_error),
                        self.samples_used + other.samples_used,
                        self.abs_error + other.abs_error)

    def to_dict(self):
        return {"value": self.value, "std_error": self.std_error,
                "samples_used": self.samples_used, "abs_error": self.abs_error}


ZERO = Estimate(0.0)


def gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_pair(order):
    """Nodes and weights of the ``order``-point rule and its ``order-1`` companion."""
    n, w = gauss_legendre(order)
    nl, wl = gauss_legendre(order - 1)
    return n, w, nl, wl


def _check_alpha(alpha, d, allow_d=False):
    if not (0 < alpha < d or (allow_d and alpha == d)):
        raise ConfigError(f"alpha must lie in (0, d), got alpha={alpha}, d={d}")


def _radius(config, radius):
    R = config.truncation_radius if radius is None else min(radius, config.truncation_radius)
    if not math.isfinite(R):
        raise ConfigError("a finite truncation_radius is required for this integrand")
    return float(R)


def integrate_singular(integrand, alpha, d, config, radius=None, breakpoints=(),
                       _allow_full=False):
    """Estimate the integral of ``integrand(y) |y|^(alpha-d)`` over ``|y| <= R``.

    Parameters
    ----------
    integrand : callable
        Vectorized; receives ``y`` of shape ``(n,)`` when d = 1 and
        ``(n, d)`` otherwise.  Must be bounded and finite.
    alpha : float
        Exponent in (0, d).
    d : int
    config : QuadratureConfig
    radius : float, optional
        Radius beyond which the integrand vanishes; the effective radius is
        the smaller of this and ``config.truncation_radius``.
    breakpoints : sequence of float, optional
        d = 1 only: positions in y where the integrand has kinks or jumps.

    Returns
    -------
    Estimate
    """
    _check_alpha(alpha, d, allow_d=_allow_full)
    R = _radius(config, radius)
    if config.method == "Deterministic1D":
        if d != 1:
            raise ConfigError("Deterministic1D is only valid for d = 1")
        return _det_1d(integrand, alpha, R, config, breakpoints)
    if config.method == "MonteCarloRadial":
        return _mc_radial(integrand, alpha, d, R, config)
    return _tensor_radial(integrand, alpha, d, R, config)


def _det_1d(integrand, alpha, R, config, breakpoints):
    rule = gauss_pair(config.order)
    bp = np.abs(np.asarray(breakpoints, dtype=float)).reshape(1, -1)

    def G(own, u):
        return (np.asarray(integrand(u), dtype=float)
                + np.asarray(integrand(-u), dtype=float))

    val, err, nev, status, bad = _pykernels.radial_adaptive(
        G, alpha, np.array([R]), bp, np.zeros_like(bp, dtype=bool), config.rel_tol,
        config.abs_tol, *rule, config.levels, config.inner_cut, config.samples)
    if status[0] == _pykernels.STATUS_NONFINITE:
        raise QuadratureError("non-finite integrand sample", point=f"|y|={bad[0]!r}")
    if status[0] == _pykernels.STATUS_BUDGET:
        warnings.warn("evaluation budget exhausted before reaching the tolerance",
                      BudgetWarning, stacklevel=3)
    return Estimate(float(val[0]), 0.0, int(nev[0]), float(err[0]))


def radial_samples(alpha, d, R, n, seed):
    """Draw ``n`` points with density proportional to ``|y|^(alpha-d)`` on the ball.

    Returns the points (shape ``(n,)`` when d = 1) and the normalizing
    constant ``|S^(d-1)| R^alpha / alpha`` such that the integral equals
    ``const * E[integrand(Y)]``.
    """
    rng = np.random.default_rng(int(seed))
    u = R * rng.random(n) ** (1.0 / alpha)
    if d == 1:
        y = u * np.where(rng.random(n) < 0.5, -1.0, 1.0)
    else:
        z = rng.standard_normal((n, d))
        y = z / np.linalg.norm(z, axis=1, keepdims=True) * u[:, None]
    return y, sphere_area(d) * R ** alpha / alpha


def _mc_radial(integrand, alpha, d, R, config):
    n = int(config.samples)
    y, const = radial_samples(alpha, d, R, n, config.seed)
    vals = np.asarray(integrand(y), dtype=float)
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise QuadratureError("non-finite integrand sample", point=np.atleast_1d(y[i]).tolist())
    mean = np.sum(vals) / n
    se = np.std(vals, ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return Estimate(const * float(mean), const * float(se), n, 0.0)


def _sphere_rule(d, m):
    """Directions and weights integrating over the unit sphere in R^d."""
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if d == 2:
        phi = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2.0 * math.pi / m)
    if d == 3:
        k = max(1, m // 2)
        z, wz = gauss_legendre(k)
        phi = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        Z, P = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - Z ** 2)
        dirs = np.stack([s * np.cos(P), s * np.sin(P), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(m, 2.0 * math.pi / m)[None, :]).ravel()
        return dirs, w
    raise ConfigError("TensorGrid supports d <= 3")


def composite_gauss(a, b, panels, order=8):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on [a, b]."""
    z, w = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * z).ravel(), (half[:, None] * w).ravel()


def _polar_rule(integrand, alpha, d, R, nr, m):
    # v = u^alpha turns u^(alpha-1) du into dv / alpha
    v, wv = composite_gauss(0.0, R ** alpha, max(1, nr // 8))
    nr = len(v)
    u = v ** (1.0 / alpha)
    wu = wv / alpha
    dirs, wd = _sphere_rule(d, m)
    pts = (u[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    vals = np.asarray(integrand(pts[:, 0] if d == 1 else pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise QuadratureError("non-finite integrand sample", point=pts[i].tolist())
    return float(np.sum(vals.reshape(nr, -1) * wu[:, None] * wd[None, :])), len(vals)


def _tensor_radial(integrand, alpha, d, R, config):
    per = max(16, int(round(config.samples ** (1.0 / d))))
    m = per if d > 1 else 2
    coarse, n1 = _polar_rule(integrand, alpha, d, R, per // 2, max(2, m // 2))
    fine, n2 = _polar_rule(integrand, alpha, d, R, per, m)
    return Estimate(fine, 0.0, n1 + n2, abs(fine - coarse))


def integrate_box(integrand, box, config):
    """Estimate the integral of ``integrand`` over an axis-aligned box.

    ``box = (lo, hi)``; the integrand receives ``(n,)`` points in d = 1 and
    ``(n, d)`` otherwise.
    """
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    if lo.shape != hi.shape or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise ConfigError("box must be finite with matching corners")
    if np.any(hi < lo):
        raise ConfigError("box corners out of order")
    d = len(lo)
    vol = float(np.prod(hi - lo))
    if vol == 0:
        return ZERO

    def call(pts):
        vals = np.asarray(integrand(pts[:, 0] if d == 1 else pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            i = int(np.argmax(~np.isfinite(vals)))
            raise QuadratureError("non-finite integrand sample", point=pts[i].tolist())
        return vals

    if config.method == "Deterministic1D":
        if d != 1:
            raise ConfigError("Deterministic1D is only valid for d = 1")
        count = [0]

        def scalar(x):
            count[0] += 1
            return float(call(np.array([[x]]))[0])

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(scalar, lo[0], hi[0], epsabs=config.abs_tol,
                                          epsrel=max(config.rel_tol, 1e-13),
                                          limit=max(50, config.samples // 21))
            except integrate.IntegrationWarning as exc:
                warnings.warn(str(exc), BudgetWarning, stacklevel=2)
                val, err = integrate.quad(scalar, lo[0], hi[0], epsabs=config.abs_tol,
                                          epsrel=max(config.rel_tol, 1e-13),
                                          limit=max(50, config.samples // 21))
        return Estimate(float(val), 0.0, count[0], float(err))
    if config.method == "MonteCarloRadial":
        rng = np.random.default_rng(int(config.seed))
        n = int(config.samples)
        pts = lo + (hi - lo) * rng.random((n, d))
        vals = call(pts)
        se = np.std(vals, ddof=1) / math.sqrt(n) if n > 1 else 0.0
        return Estimate(vol * float(np.sum(vals) / n), vol * float(se), n, 0.0)

    # composite 8-point Gauss panels; the companion uses half as many panels
    per = max(2, int(round(config.samples ** (1.0 / d))) // 8)

    def rule(k):
        axes, wts = zip(*(composite_gauss(lo[i], hi[i], k) for i in range(d)))
        mesh = np.meshgrid(*axes, indexing="ij")
        W = wts[0]
        for i in range(1, d):
            W = np.multiply.outer(W, wts[i])
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        return float(np.sum(call(pts) * W.ravel())), len(pts)

    coarse, n1 = rule(max(1, per // 2))
    fine, n2 = rule(per)
    return Estimate(fine, 0.0, n1 + n2, abs(fine - coarse))
