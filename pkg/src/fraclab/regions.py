"""Exponent geometry in the (1/p, 1/q) plane.

With ``a = alpha/d`` the uniform square is ``[a, 1]^2`` and the strong-type
pentagon is the open hull of ``(a,0), (1,0), (1,1), (0,1), (0,a)``.  Points
are classified by exact rational comparisons when every input is rational
(``int``, ``Fraction`` or a decimal/fraction string) and with a ``1e-12``
tolerance otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

TOL = 1e-12
TERM_CUTOFF = 1e-30

REGIONS = ("SquareInterior", "EdgeTop", "EdgeRight", "EdgeBottom", "EdgeLeft", "CornerSW",
           "CornerNE", "PentagonInterior", "PentagonBoundaryLower", "Outside")
BOUNDS = ("UniformStrong", "UniformWeak", "WeakUniformAwayFromTheta1",
          "WeakUniformAwayFromTheta0", "WeakUniformAwayFromBoth", "StrongNonuniform",
          "LorentzRestrictedUniform", "None")


class InvalidExponent(ValueError):
    """The exponent point lies below the critical line ``1/p + 1/q = alpha/d``."""


class DivergentSeries(ArithmeticError):
    """The requested dyadic series does not converge."""


def _num(v):
    """Exact Fraction for rational input, float otherwise; ``inf`` stays float."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ValueError("boolean is not an exponent")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return math.inf
        try:
            return Fraction(s)
        except ValueError:
            raise ValueError(f"cannot parse exponent {v!r}") from None
    v = float(v)
    if math.isnan(v):
        raise ValueError("exponent is NaN")
    return v


def _inv(v):
    if v == math.inf:
        return Fraction(0)
    return 1 / v if isinstance(v, Fraction) else 1.0 / v


def _exact(*vals):
    return all(isinstance(v, Fraction) for v in vals)


def _cmp(x, y, exact):
    if exact:
        return (x > y) - (x < y)
    d = float(x) - float(y)
    return 0 if abs(d) <= TOL else (1 if d > 0 else -1)


def _check_pq(p, q, alpha, d):
    for name, v in (("p", p), ("q", q)):
        if not (v == math.inf or v >= 1):
            raise ValueError(f"{name} must lie in [1, inf], got {v}")
    if int(d) != d or d < 1:
        raise ValueError("dimension must be a positive integer")
    if not 0 < alpha < d:
        raise ValueError(f"alpha must lie in (0, d), got {alpha}")


def compute_r(p, q, alpha, d):
    """Target exponent from ``1/p + 1/q = 1/r + alpha/d``.

    Returns ``math.inf`` on the critical line, a Fraction for exact input and
    a float otherwise.

    Raises
    ------
    InvalidExponent
        When ``1/p + 1/q < alpha/d``.
    """
    p, q, alpha = _num(p), _num(q), _num(alpha)
    _check_pq(p, q, alpha, d)
    a = alpha / int(d)
    inv_r = _inv(p) + _inv(q) - a
    exact = _exact(_inv(p), _inv(q), a)
    c = _cmp(inv_r, 0, exact)
    if c < 0:
        raise InvalidExponent(f"1/p + 1/q = {float(inv_r + a):.6g} is below alpha/d = {float(a):.6g}")
    if c == 0:
        return math.inf
    return 1 / inv_r


@dataclass(frozen=True)
class ExponentPoint:
    p: object
    q: object
    alpha: object
    d: int

    def __post_init__(self):
        for name in ("p", "q", "alpha"):
            object.__setattr__(self, name, _num(getattr(self, name)))
        object.__setattr__(self, "d", int(self.d))
        _check_pq(self.p, self.q, self.alpha, self.d)

    @classmethod
    def from_inverse(cls, x, y, alpha, d):
        """Point with ``1/p = x`` and ``1/q = y``."""
        x, y = _num(x), _num(y)
        return cls(math.inf if x == 0 else 1 / x, math.inf if y == 0 else 1 / y, alpha, d)

    @property
    def x(self):
        return _inv(self.p)

    @property
    def y(self):
        return _inv(self.q)

    @property
    def a(self):
        return self.alpha / self.d

    @property
    def exact(self):
        return _exact(self.x, self.y, self.a)

    @property
    def r(self):
        """``r`` or None below the critical line."""
        try:
            return compute_r(self.p, self.q, self.alpha, self.d)
        except InvalidExponent:
            return None


_BOUND = {
    "SquareInterior": ("UniformStrong", "uniform strong-type", "uniform in theta"),
    "EdgeTop": ("UniformWeak", "weak-type, g in L^1", "uniform in theta"),
    "EdgeRight": ("UniformWeak", "weak-type, f in L^1", "uniform in theta"),
    "EdgeBottom": ("WeakUniformAwayFromTheta1", "weak-type, g in L^(d/alpha)",
                   "theta in [0, 1 - delta]"),
    "EdgeLeft": ("WeakUniformAwayFromTheta0", "weak-type, f in L^(d/alpha)",
                 "theta in [delta, 1]"),
    "CornerSW": ("WeakUniformAwayFromBoth", "weak-type at the critical corner",
                 "theta in [delta, 1 - delta]"),
    "CornerNE": ("UniformWeak", "weak-type, f and g in L^1", "uniform in theta"),
    "PentagonInterior": ("StrongNonuniform", "strong-type in the pentagon",
                         "theta in [delta, 1 - delta]"),
    "PentagonBoundaryLower": ("None", "restricted weak-type endpoints (metadata only)", "none"),
    "Outside": ("None", "none", "none"),
}


@dataclass(frozen=True)
class RegionClass:
    """Classification of an exponent point.

    ``lorentz`` is ``"LorentzRestrictedUniform"`` where Lorentz-space inputs
    restore full uniformity in theta, else ``None``.
    """

    region: str
    bound: str
    theorem: str
    uniformity: str
    lorentz: str = None
    notes: dict = field(default_factory=dict)

    def to_dict(self, point=None):
        out = {}
        if point is not None:
            r = point.r
            out.update({"p": _json_num(point.p), "q": _json_num(point.q),
                        "alpha": _json_num(point.alpha), "d": point.d,
                        "r": "invalid" if r is None else _json_num(r)})
        out.update({"region": self.region, "bound": self.bound, "theorem": self.theorem,
                    "uniformity": self.uniformity})
        if self.lorentz:
            out["lorentz"] = self.lorentz
        if self.notes:
            out["notes"] = dict(self.notes)
        return out


def _json_num(v):
    if v == math.inf:
        return "inf"
    return float(v)


def _region(pt):
    x, y, a, ex = pt.x, pt.y, pt.a, pt.exact
    cx_a, cy_a = _cmp(x, a, ex), _cmp(y, a, ex)
    cx_1, cy_1 = _cmp(x, 1, ex), _cmp(y, 1, ex)
    if cx_a >= 0 and cy_a >= 0:  # closed square (x, y <= 1 always)
        if cx_a == 0 and cy_a == 0:
            return "CornerSW"
        if cx_1 == 0 and cy_1 == 0:
            return "CornerNE"
        if cy_a == 0:
            return "EdgeBottom"
        if cx_a == 0:
            return "EdgeLeft"
        if cy_1 == 0:
            return "EdgeTop"
        if cx_1 == 0:
            return "EdgeRight"
        return "SquareInterior"
    s = _cmp(x + y, a, ex)
    if s == 0:
        return "PentagonBoundaryLower"
    if s > 0 and _cmp(x, 0, ex) > 0 and _cmp(y, 0, ex) > 0 and cx_1 < 0 and cy_1 < 0:
        return "PentagonInterior"
    return "Outside"


def classify(point):
    """Region, bound kind and governing estimate for an :class:`ExponentPoint`."""
    region = _region(point)
    bound, theorem, uniformity = _BOUND[region]
    lorentz = ("LorentzRestrictedUniform"
               if region in ("EdgeBottom", "EdgeLeft", "CornerSW") else None)
    notes = {}
    if region == "PentagonBoundaryLower":
        notes["restricted_weak"] = [
            "||I(chi_A, chi_B)||_inf <= c (1 - theta)^-alpha |A|^(alpha/d)",
            "||I(chi_A, chi_B)||_inf <= c theta^-alpha |B|^(alpha/d)",
        ]
    if region == "CornerNE":
        notes["open"] = "strong-type bound at this corner is not settled"
    return RegionClass(region, bound, theorem, uniformity, lorentz, notes)


def mirror(region):
    """Region tag under the swap ``(p, q) -> (q, p)``."""
    swap = {"EdgeTop": "EdgeRight", "EdgeRight": "EdgeTop",
            "EdgeBottom": "EdgeLeft", "EdgeLeft": "EdgeBottom"}
    return swap.get(region, region)


# -- dyadic series ---------------------------------------------------------


def _dyadic_sum(log2_term, j_peak):
    """Sum ``2^log2_term(j)`` over the integers, walking out from ``j_peak``
    until terms drop below ``TERM_CUTOFF`` of the running maximum.

    ``log2_term`` must be piecewise linear with its kinks next to
    ``j_peak``; once three consecutive exponents are collinear the rest of
    that side is summed as a truncated geometric series, so slowly decaying
    series near the divergence threshold cost O(1).
    """
    total, peak = 0.0, -math.inf
    floor = math.log2(TERM_CUTOFF)
    for step in (1, -1):
        j = j_peak if step == 1 else j_peak - 1
        prev = []
        while True:
            e = log2_term(j)
            peak = max(peak, e)
            if e < peak + floor:
                break
            prev = (prev + [e])[-3:]
            if len(prev) == 3:
                s1, s2 = prev[1] - prev[0], prev[2] - prev[1]
                if s2 < 0 and abs(s2 - s1) <= 1e-12 * max(1.0, abs(s2)):
                    # terms 2^(e + k s2), k >= 0, down to the cutoff
                    count = math.floor((e - peak - floor) / -s2) + 1
                    ln2 = math.log(2.0)
                    total += 2.0 ** e * math.expm1(s2 * count * ln2) / math.expm1(s2 * ln2)
                    break
            total += 2.0 ** e
            j += step
    return total


def series_A1(p, alpha, d, R):
    """``(sum_j 2^((alpha - d/p) j/2) min(2^(dj), R)^(1/(2p)))^2``.

    Raises
    ------
    DivergentSeries
        When ``p >= d/alpha``.
    """
    p, alpha, d, R = float(p), float(alpha), int(d), float(R)
    if not 0 < alpha < d:
        raise ValueError("alpha must lie in (0, d)")
    if p < 1:
        raise ValueError("p must be >= 1")
    if p * alpha >= d:
        raise DivergentSeries(f"series diverges for p >= d/alpha = {d / alpha:g}")
    if not R > 0:
        raise ValueError("R must be positive")
    lr = math.log2(R)
    e = lambda j: (alpha - d / p) * j / 2.0 + min(d * j, lr) / (2.0 * p)
    return _dyadic_sum(e, math.floor(lr / d)) ** 2


def series_A2(p, alpha, S, R):
    """``sum_j 2^(alpha (1-p) j) min(2^(alpha p j) S, R)``.

    Raises
    ------
    DivergentSeries
        When ``p <= 1``.
    """
    p, alpha, S, R = float(p), float(alpha), float(S), float(R)
    if p <= 1:
        raise DivergentSeries("series diverges for p <= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not (S > 0 and R > 0):
        raise ValueError("S and R must be positive")
    ls, lr = math.log2(S), math.log2(R)
    e = lambda j: alpha * (1 - p) * j + min(alpha * p * j + ls, lr)
    return _dyadic_sum(e, math.floor((lr - ls) / (alpha * p)))


def series_A1_normalized(p, alpha, d, R):
    return series_A1(p, alpha, d, R) / R ** (alpha / d)


def series_A2_normalized(p, alpha, S, R):
    return series_A2(p, alpha, S, R) * S ** (1.0 / p - 1.0) * R ** (-1.0 / p)
