"""Evaluation of the bilinear fractional integral and its relatives.

All operators share the integral

    J(x) = int_{|y| <= R} f(x + a y) g(x + b y) |y|^(k - d) dy

with ``(a, b) = (theta - 1, theta)`` for the bilinear family,
``(-1, 1)`` for the classical bilinear operator, ``(-1, 0)`` with ``g = 1``
for the Riesz potential, and ``k = d`` (no weight) for the dyadic pieces.
In d = 1 the compiled batch kernel is used; in higher dimensions the
integrand is handed to :func:`fraclab.quadrature.integrate_singular`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .functions import (PIECE_POWERLOG, ConstantOne, GridFunction, IndicatorBall,
                        IndicatorBox, SimpleFunction, SpecError, encode_1d)
from .quadrature import (ZERO, BudgetWarning, ConfigError, Estimate, QuadratureConfig,
                         QuadratureError, gauss_legendre, gauss_pair, integrate_singular)

THETA_WARN = 1e-6
THETA_NODES = 64


class ThetaWarning(RuntimeWarning):
    """theta is within 1e-6 of an endpoint but not equal to it."""


@dataclass(frozen=True)
class OperatorParams:
    alpha: float
    d: int = 1
    theta: float = 0.5
    j: int = 0

    def __post_init__(self):
        if int(self.d) < 1:
            raise ConfigError("dimension must be >= 1")
        object.__setattr__(self, "d", int(self.d))
        if not 0 < self.alpha < self.d:
            raise ConfigError(f"alpha must lie in (0, d), got {self.alpha}")
        if not 0 <= self.theta <= 1:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        object.__setattr__(self, "j", int(self.j))


# -- support geometry ------------------------------------------------------


def _ball(f):
    b = f.support_ball()
    if b is None:
        return None
    c, r = b
    return np.asarray(c, dtype=float), float(r)


def auto_radius(f, g, a, b, x):
    """Smallest radius outside which ``f(x + a y) g(x + b y)`` vanishes.

    ``x`` has shape (n, d).  Returns inf where no support information
    bounds the integrand.
    """
    x = np.asarray(x, dtype=float)
    R = np.full(len(x), np.inf)
    bf, bg = _ball(f), _ball(g)
    if bf is not None and a != 0:
        R = np.minimum(R, (np.linalg.norm(x - bf[0], axis=1) + bf[1]) / abs(a))
    if bg is not None and b != 0:
        R = np.minimum(R, (np.linalg.norm(x - bg[0], axis=1) + bg[1]) / abs(b))
    if bf is not None and bg is not None and a != b:
        # |(b - a) y| = |(x + b y) - (x + a y)| <= |c_g - c_f| + r_f + r_g
        R = np.minimum(R, (np.linalg.norm(bg[0] - bf[0]) + bf[1] + bg[1]) / abs(b - a))
    return R


def _singular_points(f):
    P, _ = encode_1d(f)
    rows = P[P[:, 0] == PIECE_POWERLOG]
    return rows[:, 2], rows[:, 3], rows[:, 4]


def _check_integrable_1d(f, g, a, b, k, xs):
    """Reject points where a power singularity sits at y = 0 and is too strong."""
    power = np.zeros(len(xs))
    logp = np.zeros(len(xs))
    for spec, coef in ((f, a), (g, b)):
        if coef == 0:
            continue
        c, al, ka = _singular_points(spec)
        for ci, ai, ki in zip(c, al, ka):
            hit = xs == ci
            power[hit] += ai
            logp[hit] += ki
    bad = (power > k) | ((power == k) & (power > 0) & (logp <= 1))
    if bad.any():
        x0 = float(xs[np.argmax(bad)])
        raise QuadratureError("integral diverges: singularity meets the kernel", point=x0)


# -- core batch evaluation -------------------------------------------------


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1:
        return x.reshape(-1, 1)
    return x.reshape(-1, d)


def integral_batch(f, g, a, b, k, d, xs, config, rmax=math.inf, backend=None):
    """Evaluate J at many points.

    Returns ``(values, abs_errors, std_errors, samples)`` arrays.
    """
    pts = _points(xs, d)
    n = len(pts)
    R = np.minimum(auto_radius(f, g, a, b, pts), min(config.truncation_radius, rmax))
    if not np.all(np.isfinite(R)):
        raise ConfigError("unbounded integrand: give a finite truncation_radius")
    values = np.zeros(n)
    errs = np.zeros(n)
    ses = np.zeros(n)
    used = np.zeros(n, dtype=np.int64)
    if d == 1 and config.method == "Deterministic1D":
        xs1 = pts[:, 0]
        _check_integrable_1d(f, g, a, b, k, xs1)
        v, e, nev, st, bad = _backend.bilinear_batch(
            xs1, R, encode_1d(f), encode_1d(g), a, b, k, config.rel_tol, config.abs_tol,
            gauss_pair(config.order), config.levels, config.inner_cut, config.samples, backend=backend)
        if np.any(st == 2):
            i = int(np.argmax(st == 2))
            raise QuadratureError("non-finite integrand sample",
                                  point=f"x={xs1[i]!r}, |y|={bad[i]!r}")
        if np.any(st == 1):
            warnings.warn(f"evaluation budget exhausted at {int(np.sum(st == 1))} point(s)",
                          BudgetWarning, stacklevel=3)
        return v, e, ses, nev
    if config.method == "Deterministic1D" and d != 1:
        raise ConfigError("Deterministic1D is only valid for d = 1")
    for i, x in enumerate(pts):
        if R[i] <= 0:
            continue
        est = integrate_singular(_product(f, g, a, b, x), k, d, config, radius=R[i],
                                 _allow_full=True)
        values[i], errs[i], ses[i], used[i] = est.value, est.abs_error, est.std_error, est.samples_used
    return values, errs, ses, used


def _product(f, g, a, b, x):
    x = np.asarray(x, dtype=float)

    def F(y):
        y = np.asarray(y, dtype=float).reshape(len(y), -1)
        return f._values(x + a * y) * g._values(x + b * y)

    return F


def _estimate(v, e, s, n):
    return Estimate(float(v), float(s), int(n), float(e))


def _zero_or(f, g):
    return _is_zero(f) or _is_zero(g)


def _is_zero(f):
    return isinstance(f, SimpleFunction) and all(c == 0 for c, _ in f.terms)


# -- public operators ------------------------------------------------------


def riesz_values(f, alpha, d, xs, config, backend=None):
    """Riesz potential of ``f`` at many points: (values, abs_err, std_err, samples)."""
    if not 0 < alpha < d:
        raise ConfigError(f"alpha must lie in (0, d), got {alpha}")
    n = len(_points(xs, d))
    if _is_zero(f):
        z = np.zeros(n)
        return z, z.copy(), z.copy(), np.zeros(n, dtype=np.int64)
    return integral_batch(f, ConstantOne(d), -1.0, 0.0, alpha, d, xs, config, backend=backend)


def eval_riesz(f, alpha, d, x, config=None):
    """Estimate of ``int f(x - y) |y|^(alpha - d) dy``."""
    config = config or QuadratureConfig()
    return _estimate(*(a[0] for a in riesz_values(f, alpha, d, [x], config)))


def _warn_theta(theta):
    if 0 < theta < THETA_WARN or 0 < 1 - theta < THETA_WARN:
        warnings.warn(f"theta={theta!r} is within {THETA_WARN} of an endpoint; "
                      "the value is computed by direct quadrature", ThetaWarning, stacklevel=3)


def bilinear_values(f, g, params, xs, config, backend=None):
    """The bilinear family at many points: (values, abs_err, std_err, samples).

    At theta = 0 and theta = 1 the exact product forms ``g I(f)`` and
    ``f I(g)`` are used.
    """
    d, alpha, theta = params.d, params.alpha, params.theta
    pts = _points(xs, d)
    n = len(pts)
    out = [np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int64)]
    if _zero_or(f, g):
        return tuple(out)
    if theta in (0.0, 1.0):
        lin, mult = (f, g) if theta == 0.0 else (g, f)
        m = mult._values(pts)
        live = m != 0
        if live.any():
            v, e, s, u = riesz_values(lin, alpha, d, pts[live], config, backend)
            out[0][live] = m[live] * v
            out[1][live] = m[live] * e
            out[2][live] = m[live] * s
            out[3][live] = u
        if not np.all(np.isfinite(out[0])):
            raise QuadratureError("non-finite product at a singular point of the multiplier")
        return tuple(out)
    _warn_theta(theta)
    return integral_batch(f, g, theta - 1.0, theta, alpha, d, pts, config, backend=backend)


def eval_bilinear(f, g, params, x, config=None):
    """Estimate of ``int f(x + (theta-1) y) g(x + theta y) |y|^(alpha-d) dy``."""
    config = config or QuadratureConfig()
    return _estimate(*(a[0] for a in bilinear_values(f, g, params, [x], config)))


def dyadic_values(f, g, params, xs, config, backend=None):
    """Truncated unweighted integral over ``|y| <= 2^j`` at many points."""
    d = params.d
    n = len(_points(xs, d))
    if _zero_or(f, g):
        z = np.zeros(n)
        return z, z.copy(), z.copy(), np.zeros(n, dtype=np.int64)
    return integral_batch(f, g, params.theta - 1.0, params.theta, float(d), d, xs, config,
                          rmax=2.0 ** params.j, backend=backend)


def eval_dyadic(f, g, params, x, config=None):
    """Estimate of ``int_{|y| <= 2^j} f(x + (theta-1) y) g(x + theta y) dy``."""
    config = config or QuadratureConfig()
    return _estimate(*(a[0] for a in dyadic_values(f, g, params, [x], config)))


def B_values(f, g, alpha, d, xs, config, backend=None):
    n = len(_points(xs, d))
    if _zero_or(f, g):
        z = np.zeros(n)
        return z, z.copy(), z.copy(), np.zeros(n, dtype=np.int64)
    if not 0 < alpha < d:
        raise ConfigError(f"alpha must lie in (0, d), got {alpha}")
    return integral_batch(f, g, -1.0, 1.0, alpha, d, xs, config, backend=backend)


def eval_B(f, g, alpha, d, x, config=None):
    """Estimate of ``int f(x - y) g(x + y) |y|^(alpha - d) dy``."""
    config = config or QuadratureConfig()
    return _estimate(*(a[0] for a in B_values(f, g, alpha, d, [x], config)))


# -- stress tensor ---------------------------------------------------------


@dataclass(frozen=True)
class MatrixEstimate:
    """Symmetric matrix estimate with entrywise error scales."""

    value: np.ndarray
    std_error: np.ndarray
    abs_error: np.ndarray

    @property
    def error(self):
        return self.abs_error + 3.0 * self.std_error

    def entry(self, i, k):
        return Estimate(float(self.value[i, k]), float(self.std_error[i, k]), 0,
                        float(self.abs_error[i, k]))


def _theta_rule():
    z, w = gauss_legendre(THETA_NODES)
    return 0.5 * (1.0 + z), 0.5 * w


def stress_values_1d(rho, alpha, xs, config, backend=None):
    """d = 1 stress (a scalar) at many points: (values, abs_errors).

    The theta-rule is symmetric about 1/2 and the integrand satisfies
    ``I^theta(rho, rho) = I^(1-theta)(rho, rho)``, so only half the nodes
    are evaluated.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if _is_zero(rho):
        return np.zeros(len(xs)), np.zeros(len(xs))
    th, w = _theta_rule()
    half = THETA_NODES // 2
    val = np.zeros(len(xs))
    err = np.zeros(len(xs))
    for t, wt in zip(th[:half], w[:half]):
        v, e, _, _ = integral_batch(rho, rho, t - 1.0, t, alpha, 1, xs, config, backend=backend)
        val += wt * v
        err += wt * e
    # 1/2 prefactor, doubled by the symmetric fold
    return val, err


def eval_stress_tensor(rho, alpha, d, x, config=None):
    """Stress tensor ``S(rho)(x)`` as a d x d :class:`MatrixEstimate`.

    ``S = 1/2 int_0^1 int rho(x+(theta-1)y) rho(x+theta y) |y|^(alpha-d-2) y (x) y dy dtheta``
    with a 64-point Gauss-Legendre rule in theta.
    """
    config = config or QuadratureConfig()
    if not 0 < alpha < d:
        raise ConfigError(f"alpha must lie in (0, d), got {alpha}")
    if d == 1 and config.method == "Deterministic1D":
        v, e = stress_values_1d(rho, alpha, [x], config)
        return MatrixEstimate(np.array([[v[0]]]), np.zeros((1, 1)), np.array([[e[0]]]))
    if _is_zero(rho):
        z = np.zeros((d, d))
        return MatrixEstimate(z, z.copy(), z.copy())
    xp = _points([x], d)
    th, w = _theta_rule()
    bx = _ball(rho)
    # the two arguments differ by y, so |y| never exceeds the support diameter
    R = min(2 * bx[1] if bx is not None else math.inf, config.truncation_radius)
    val = np.zeros((d, d))
    se = np.zeros((d, d))
    ae = np.zeros((d, d))
    if R <= 0:
        return MatrixEstimate(val, se, ae)
    x0 = xp[0]
    for i in range(d):
        for k in range(i, d):
            def F(y, i=i, k=k):
                y = np.asarray(y, dtype=float).reshape(len(y), -1)
                r2 = np.sum(y * y, axis=1)
                acc = np.zeros(len(y))
                for t, wt in zip(th, w):
                    acc += wt * rho._values(x0 + (t - 1.0) * y) * rho._values(x0 + t * y)
                ang = np.divide(y[:, i] * y[:, k], r2, out=np.zeros(len(y)), where=r2 > 0)
                return 0.5 * acc * ang

            est = integrate_singular(F, alpha, d, config, radius=R)
            val[i, k] = val[k, i] = est.value
            se[i, k] = se[k, i] = est.std_error
            ae[i, k] = ae[k, i] = est.abs_error
    return MatrixEstimate(val, se, ae)


# -- divergence identity ---------------------------------------------------


@dataclass(frozen=True)
class DivergenceReport:
    """Residual of ``rho (K * rho)' - S(rho)'`` on interior grid nodes."""

    n_cells: int
    spacing: float
    max_residual: float
    rel_max_residual: float
    rel_l2_residual: float
    x: np.ndarray
    force: np.ndarray
    div_stress: np.ndarray


def check_divergence_identity(rho, alpha, d=1, config=None):
    """Compare both sides of the divergence form of the nonlocal force.

    ``K = |x|^(alpha-d) / (d - alpha)``; ``K * rho`` is the Riesz potential
    divided by ``d - alpha``.  Both derivatives are centred differences on
    the nodes of ``rho``.
    """
    config = config or QuadratureConfig()
    if d != 1:
        raise ConfigError("the divergence identity check is implemented for d = 1")
    if not isinstance(rho, GridFunction) or rho.dim != 1:
        raise SpecError("rho must be a one-dimensional GridFunction")
    n_cells = rho.values.shape[0] - 1
    if n_cells < 64:
        raise SpecError(f"grid too coarse: {n_cells} cells, need at least 64")
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    h = rho.spacing
    xs = rho.origin[0] + h * np.arange(n_cells + 1)
    vals = rho.values
    if not np.any(vals):
        z = np.zeros(n_cells - 1)
        return DivergenceReport(n_cells, h, 0.0, 0.0, 0.0, xs[1:-1], z, z.copy())
    pot = riesz_values(rho, alpha, 1, xs, config)[0] / (1.0 - alpha)
    S = stress_values_1d(rho, alpha, xs, config)[0]
    dpot = (pot[2:] - pot[:-2]) / (2 * h)
    dS = (S[2:] - S[:-2]) / (2 * h)
    force = vals[1:-1] * dpot
    res = force - dS
    ref = np.sqrt(np.sum(dS ** 2))
    return DivergenceReport(
        n_cells, h, float(np.max(np.abs(res))),
        float(np.max(np.abs(res)) / np.max(np.abs(dS))),
        float(np.sqrt(np.sum(res ** 2)) / ref), xs[1:-1], force, dS)


# -- dyadic superposition --------------------------------------------------


def dyadic_superposition(f, g, params, x, j_range, config=None):
    """Both sides of the annulus bound.

    Returns ``(lhs, rhs)`` where ``lhs`` is the bilinear value and
    ``rhs = 2^(d-alpha) sum_j 2^((alpha-d) j) I_j(f, g)(x)`` over ``j_range``.
    """
    config = config or QuadratureConfig()
    js = list(j_range)
    if not js:
        raise ConfigError("j_range must be nonempty")
    d, alpha = params.d, params.alpha
    lhs = eval_bilinear(f, g, params, x, config)
    rhs = ZERO
    for j in js:
        p = OperatorParams(alpha, d, params.theta, j)
        rhs = rhs + eval_dyadic(f, g, p, x, config).scaled(2.0 ** ((alpha - d) * j))
    return lhs, rhs.scaled(2.0 ** (d - alpha))


# -- exact profiles for indicator data in d = 1 ------------------------------


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Nonnegative function, linear on each ``[x[k], x[k+1]]``.

    ``left[k]`` and ``right[k]`` are the one-sided limits at the ends of
    segment ``k``; the function vanishes outside ``[x[0], x[-1]]``.
    """

    x: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, max(len(self.x) - 2, 0))
        if len(self.x) < 2:
            return np.zeros_like(t)
        x0, x1 = self.x[k], self.x[k + 1]
        lam = (t - x0) / (x1 - x0)
        v = (1 - lam) * self.left[k] + lam * self.right[k]
        return np.where((t >= self.x[0]) & (t <= self.x[-1]), v, 0.0)

    def clip(self, lo, hi):
        """Restriction to ``[lo, hi]`` (zero elsewhere)."""
        if len(self.x) < 2 or hi <= self.x[0] or lo >= self.x[-1]:
            return PiecewiseLinear(np.array([lo, hi]), np.zeros(1), np.zeros(1))
        a, b = max(lo, self.x[0]), min(hi, self.x[-1])
        inner = self.x[(self.x > a) & (self.x < b)]
        xs = np.concatenate([[a], inner, [b]])
        mids = 0.5 * (xs[:-1] + xs[1:])
        k = np.clip(np.searchsorted(self.x, mids, side="right") - 1, 0, len(self.x) - 2)
        x0, x1 = self.x[k], self.x[k + 1]
        slope = (self.right[k] - self.left[k]) / (x1 - x0)
        left = self.left[k] + slope * (xs[:-1] - x0)
        right = self.left[k] + slope * (xs[1:] - x0)
        return PiecewiseLinear(xs, np.maximum(left, 0.0), np.maximum(right, 0.0))

    def integral_power(self, s):
        """Exact ``int F^s``."""
        if len(self.x) < 2:
            return 0.0
        L = np.diff(self.x)
        v0, v1 = self.left, self.right
        diff = v1 - v0
        flat = np.abs(diff) <= 1e-14 * np.maximum(v0, v1)
        with np.errstate(divide="ignore", invalid="ignore"):
            seg = np.where(flat, L * np.maximum(v0, v1) ** s,
                           L * (v1 ** (s + 1) - v0 ** (s + 1)) / ((s + 1) * diff))
        return float(np.sum(seg))

    def lebesgue_norm(self, p):
        if math.isinf(p):
            return self.sup()
        return self.integral_power(p) ** (1.0 / p)

    def sup(self):
        if len(self.left) == 0:
            return 0.0
        return float(max(self.left.max(), self.right.max()))

    def measure_above(self, lam):
        """``|{F > lam}|``."""
        if len(self.x) < 2:
            return 0.0
        L = np.diff(self.x)
        lo = np.minimum(self.left, self.right)
        hi = np.maximum(self.left, self.right)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(hi > lo, (hi - lam) / (hi - lo), (lo > lam).astype(float))
        return float(np.sum(L * np.clip(frac, 0.0, 1.0)))


def interval_terms(f):
    """``[(coef, lo, hi), ...]`` for an indicator-based 1D spec."""
    if isinstance(f, (IndicatorBall, IndicatorBox)):
        if f.dim != 1:
            raise SpecError("exact profiles need one-dimensional data")
        lo, hi = f.interval()
        return [(1.0, lo, hi)]
    if isinstance(f, SimpleFunction):
        if f.dim != 1:
            raise SpecError("exact profiles need one-dimensional data")
        out = []
        for c, s in f.terms:
            out += [(c * cc, lo, hi) for cc, lo, hi in interval_terms(s)]
        return out
    raise SpecError(f"exact profiles need indicator or simple functions, got {f.kind}")


def _pair_profile(alo, ahi, blo, bhi, theta, R):
    """Lines bounding the y-interval, plus an optional indicator window in x."""
    lows, ups = [(0.0, -R)], [(0.0, R)]
    window = None
    if theta < 1:
        s = 1.0 - theta
        lows.append((1.0 / s, -ahi / s))
        ups.append((1.0 / s, -alo / s))
    else:
        window = (alo, ahi)
    if theta > 0:
        lows.append((-1.0 / theta, blo / theta))
        ups.append((-1.0 / theta, bhi / theta))
    else:
        window = (blo, bhi)
    return lows, ups, window


def _crossings(lines):
    out = []
    for i in range(len(lines)):
        for k in range(i + 1, len(lines)):
            (p1, q1), (p2, q2) = lines[i], lines[k]
            if p1 != p2:
                out.append((q2 - q1) / (p1 - p2))
    return out


def dyadic_indicator_profile(f, g, theta, j):
    """Exact ``I_j^theta(f, g)`` on the line for indicator/simple ``f, g``.

    For each pair of intervals the admissible ``y`` form an interval whose
    ends are linear in ``x``; the length is piecewise linear with kinks at
    pairwise crossings of those lines.
    """
    if not 0 <= theta <= 1:
        raise ConfigError("theta must lie in [0, 1]")
    R = 2.0 ** j
    pairs = []
    cuts = []
    for c, alo, ahi in interval_terms(f):
        for e, blo, bhi in interval_terms(g):
            if c * e == 0:
                continue
            lows, ups, win = _pair_profile(alo, ahi, blo, bhi, theta, R)
            pairs.append((c * e, lows, ups, win))
            cuts += _crossings(lows + ups)
            if win is not None:
                cuts += list(win)
    if not pairs:
        return PiecewiseLinear(np.array([0.0, 1.0]), np.zeros(1), np.zeros(1))
    xs = np.unique(np.asarray(cuts, dtype=float))
    mids = 0.5 * (xs[:-1] + xs[1:])
    left = np.zeros(len(mids))
    right = np.zeros(len(mids))
    for coef, lows, ups, win in pairs:
        def length(t):
            lo = np.max([p * t + q for p, q in lows], axis=0)
            hi = np.min([p * t + q for p, q in ups], axis=0)
            return np.maximum(hi - lo, 0.0)

        ind = np.ones(len(mids)) if win is None else ((mids >= win[0]) & (mids <= win[1]))
        left += coef * length(xs[:-1]) * ind
        right += coef * length(xs[1:]) * ind
    return PiecewiseLinear(xs, left, right)
