"""Reproducible experiment drivers and their persistence.

Every driver returns a list of :class:`ExperimentRecord` rows ordered by
parameter.  Operator outputs are sampled on cells, then measured with the
quasi-norms of :mod:`fraclab.norms`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .functions import (GridFunction, IndicatorBall, IndicatorBox, SimpleFunction, SmoothBump,
                        SpecError, make_h)
from .norms import SampledField, lebesgue_norm, refined_cells_1d, uniform_cells, weak_norm
from .operators import (OperatorParams, bilinear_values, check_divergence_identity,
                        dyadic_indicator_profile, eval_riesz, interval_terms)
from .quadrature import ConfigError, QuadratureConfig
from .regions import ExponentPoint, InvalidExponent, classify

COLUMNS = ("experiment", "alpha", "d", "p", "q", "r", "theta", "t", "j", "seed", "quantity",
           "value", "stderr", "walltime_ms")
DEFAULT_THETAS = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ExperimentRecord:
    """One measured quantity.  Parameters that do not apply are None."""

    experiment: str
    alpha: float
    d: int
    quantity: str
    value: float
    stderr: float = 0.0
    p: float = None
    q: float = None
    r: float = None
    theta: float = None
    t: float = None
    j: int = None
    seed: int = None
    walltime_ms: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.experiment}/{self.quantity}: value is not finite")
        if not (self.stderr >= 0 and math.isfinite(self.stderr)):
            raise ValueError(f"{self.experiment}/{self.quantity}: bad error estimate")

    def row(self):
        return [_fmt(getattr(self, c)) for c in COLUMNS]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


_INT = {"d", "j", "seed"}
_STR = {"experiment", "quantity"}


def _parse(name, s):
    if name in _STR:
        return s
    if s == "" or s is None:
        return None
    if name in _INT:
        return int(s)
    return float(s)


# -- persistence -----------------------------------------------------------


def persist(records, path, format="csv", timings=False):
    """Write records as CSV or a JSON array.

    Floats use 17 significant digits and rows keep their input order.  Wall
    times are written as 0 unless ``timings`` is set, so that identical runs
    produce identical bytes.
    """
    if format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {format!r}")
    recs = [r if timings else replace(r, walltime_ms=0.0) for r in records]
    try:
        with open(path, "w", newline="") as fh:
            fh.write(dumps(recs, format))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def dumps(records, format="csv"):
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for rec in records:
            w.writerow(rec.row())
        return buf.getvalue()
    rows = [{c: (s if s != "" else None) if c in _STR else _json_val(c, s)
             for c, s in zip(COLUMNS, rec.row())} for rec in records]
    return json.dumps(rows, indent=1) + "\n"


def _json_val(name, s):
    if s == "":
        return None
    if s in ("inf", "-inf"):
        return s
    return int(s) if name in _INT else float(s)


def read_records(path):
    """Inverse of :func:`persist`; the format is taken from the content."""
    with open(path, newline="") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        rows = [{k: ("" if v is None else str(v)) if not isinstance(v, float) else _fmt(v)
                 for k, v in row.items()} for row in json.loads(text)]
    else:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected CSV header")
        rows = [dict(zip(COLUMNS, row)) for row in reader]
    out = []
    for row in rows:
        kw = {c: _parse(c, row.get(c, "")) for c in COLUMNS}
        if kw["stderr"] is None:
            kw["stderr"] = 0.0
        if kw["walltime_ms"] is None:
            kw["walltime_ms"] = 0.0
        out.append(ExperimentRecord(**kw))
    return out


# -- sampling operator outputs ---------------------------------------------


def _interval(f):
    c, r = f.support_ball()
    return float(c[0]) - r, float(c[0]) + r


def output_cells(f, g, theta, n):
    """Cells covering the support of the bilinear output in d = 1.

    The output vanishes outside ``theta A + (1 - theta) B`` for supports
    ``A, B``.  When the two mapped supports differ in scale, ``n`` extra
    cells resolve the smaller one.
    """
    (a0, a1), (b0, b1) = _interval(f), _interval(g)
    box = (np.array([theta * a0 + (1 - theta) * b0]), np.array([theta * a1 + (1 - theta) * b1]))
    wa, wb = theta * (a1 - a0), (1 - theta) * (b1 - b0)
    focus = None
    if 0 < min(wa, wb) < 0.05 * max(wa, wb):
        mid = theta * 0.5 * (a0 + a1) + (1 - theta) * 0.5 * (b0 + b1)
        w = min(wa, wb)
        focus = (mid - 2 * w, mid + 2 * w)
    centers, measures = refined_cells_1d(box, n, focus)
    return centers, measures, box


def sample_output(f, g, params, config, cells=None, n=2 ** 14, box=None):
    """Sample the bilinear output on cells.

    Returns
    -------
    (SampledField, errors)
        ``errors`` holds the per-cell error scale ``abs_err + 3 std_err``.
    """
    if cells is None:
        if params.d == 1 and box is None:
            centers, measures, box = output_cells(f, g, params.theta, n)
        else:
            if box is None:
                box = (np.full(params.d, -2.0), np.full(params.d, 2.0))
            centers, measures = uniform_cells(box, n)
    else:
        centers, measures = cells
    v, e, s, _ = bilinear_values(f, g, params, centers, config)
    return SampledField(centers, measures, np.maximum(v, 0.0), box), e + 3.0 * s


def _weak_with_error(field, err, r):
    w = weak_norm(field, r)
    hi = weak_norm(SampledField(field.centers, field.measures, field.values + err, field.box), r)
    return w, hi - w


# -- theta sweep -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepPlan:
    """Inputs of a theta sweep.

    ``cells`` is the cell count per axis of the sampling mesh; in d = 1 the
    mesh covers the support of the output (see :func:`output_cells`).
    """

    f: object
    g: object
    point: ExponentPoint
    thetas: tuple
    config: QuadratureConfig = field(default_factory=QuadratureConfig)
    cells: int = 2 ** 14
    box: tuple = None
    name: str = "theta_sweep"

    def __post_init__(self):
        th = tuple(float(t) for t in self.thetas)
        if not th:
            raise ConfigError("theta grid is empty")
        if any(not 0 <= t <= 1 for t in th):
            raise ConfigError("theta values must lie in [0, 1]")
        object.__setattr__(self, "thetas", th)
        if self.f.dim != self.point.d or self.g.dim != self.point.d:
            raise ConfigError("function dimension does not match the exponent point")


def theta_sweep(plan):
    """Ratios ``||I^theta(f, g)||_{r,inf} / (||f||_p ||g||_q)`` over a theta grid.

    Raises
    ------
    InvalidExponent
        When the exponent point has no finite ``r``; the classification is
        attached as ``exc.region``.
    """
    pt = plan.point
    r = pt.r
    if r is None or r == math.inf:
        cls = classify(pt)
        exc = InvalidExponent(f"no finite target exponent at this point (region {cls.region})")
        exc.region = cls
        raise exc
    alpha, d = float(pt.alpha), pt.d
    p, q, r = float(pt.p), float(pt.q), float(r)
    denom = lebesgue_norm(plan.f, p) * lebesgue_norm(plan.g, q)
    out = []
    for theta in plan.thetas:
        t0 = time.perf_counter()
        if denom == 0:
            ratio, err = 0.0, 0.0
        else:
            field_, e = sample_output(plan.f, plan.g, OperatorParams(alpha, d, theta),
                                      plan.config, n=plan.cells, box=plan.box)
            w, werr = _weak_with_error(field_, e, r)
            ratio, err = w / denom, werr / denom
        out.append(ExperimentRecord(plan.name, alpha, d, "weak_ratio", ratio, err, p, q, r,
                                    theta, seed=plan.config.seed,
                                    walltime_ms=1e3 * (time.perf_counter() - t0)))
    return out


# -- sharpness -------------------------------------------------------------


CASES = ("I", "II", "III", "IV", "V")


@dataclass(frozen=True)
class GrowthReport:
    """Growth of a sharpness sequence against ``(log 1/t)^exponent``."""

    ts: tuple
    values: tuple
    predicted_exponent: float
    fitted_exponent: float
    ratios: tuple
    increasing: bool
    diverges: bool

    @property
    def ratio_spread(self):
        return max(self.ratios) / min(self.ratios)


def growth_report(ts, values, exponent):
    """Least-squares fit of ``log value`` against ``log log(1/t)``.

    ``diverges`` follows the blow-up rule: the last value exceeds the first
    by at least 50% and the sequence (ordered by decreasing t) increases with
    at most one inversion.
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(values, dtype=float)
    order = np.argsort(-ts)
    ts, vals = ts[order], vals[order]
    ll = np.log(np.log(1.0 / ts))
    slope = float(np.polyfit(ll, np.log(vals), 1)[0]) if len(ts) > 1 else math.nan
    ratios = vals / np.log(1.0 / ts) ** exponent
    steps = np.diff(vals)
    increasing = bool(np.all(steps > 0))
    diverges = bool(len(vals) > 1 and vals[-1] >= 1.5 * vals[0] and np.sum(steps <= 0) <= 1)
    return GrowthReport(tuple(map(float, ts)), tuple(map(float, vals)), exponent, slope,
                        tuple(map(float, ratios)), increasing, diverges)


def _case_setup(case, alpha, d, p):
    """(f, g, theta_endpoint, norm exponent, bump exponent) of a sharpness case."""
    crit = d / alpha
    if case in ("I", "II"):
        bump_p, r = 1.0, 1.0
    elif case in ("III", "IV"):
        if p is None:
            raise ConfigError(f"case {case} needs the exponent p")
        if not 1 <= p <= crit:
            raise ConfigError(f"case {case} needs 1 <= p <= d/alpha")
        bump_p = r = float(p)
    else:
        bump_p = r = crit
    return bump_p, r, (0.0 if case in ("I", "IV") else 1.0)


def sharpness_case(case, t_grid, theta_grid=None, config=None, alpha=0.5, d=1, p=None,
                   cells=2 ** 12):
    """Sharpness witnesses built from ``h`` and dilated bumps.

    Cases I and IV put ``h`` first and the bump second (blow-up at
    theta = 0); cases II, III and V swap them (theta = 1).  The measured
    quantity is the weak norm of the output with exponent 1 (I, II),
    ``p`` (III, IV) or ``d/alpha`` (V).

    Returns
    -------
    (records, GrowthReport)
        The report uses the first theta of the grid.
    """
    if case not in CASES:
        raise ConfigError(f"unknown case {case!r}; expected one of {CASES}")
    if d != 1:
        raise ConfigError("sharpness experiments are implemented for d = 1")
    config = config or QuadratureConfig()
    ts = [float(t) for t in t_grid]
    if not ts:
        raise ConfigError("t grid is empty")
    for t in ts:
        if not 0 < t < 0.125:
            raise ConfigError(f"t must lie in (0, 1/8), got {t}")
    bump_p, r, endpoint = _case_setup(case, alpha, d, p)
    thetas = [endpoint] if theta_grid is None else [float(x) for x in theta_grid]
    if not thetas or any(not 0 <= x <= 1 for x in thetas):
        raise ConfigError("theta grid must be nonempty and inside [0, 1]")
    h = make_h(d, alpha)
    crit = d / alpha
    bump_first = case in ("II", "III", "V")
    label = "sharpness_" + case
    records = []
    for theta in thetas:
        for t in ts:
            t0 = time.perf_counter()
            psi = SmoothBump(d, t, bump_p)
            f, g = (psi, h) if bump_first else (h, psi)
            field_, e = sample_output(f, g, OperatorParams(alpha, d, theta), config, n=cells)
            w, werr = _weak_with_error(field_, e, r)
            records.append(ExperimentRecord(
                label, alpha, d, "weak_norm", w, werr,
                p=(bump_p if bump_first else crit), q=(crit if bump_first else bump_p), r=r,
                theta=theta, t=t, seed=config.seed,
                walltime_ms=1e3 * (time.perf_counter() - t0)))
    first = [rec for rec in records if rec.theta == thetas[0]]
    kappa = (d + alpha) / (2.0 * d)
    report = growth_report([rec.t for rec in first], [rec.value for rec in first],
                           (1 - kappa) / 2.0)
    return records, report


def mirror_record(rec):
    """Relabel a record under ``(f, g, theta) -> (g, f, 1 - theta)``."""
    swap = {"sharpness_I": "sharpness_II", "sharpness_II": "sharpness_I",
            "sharpness_III": "sharpness_IV", "sharpness_IV": "sharpness_III"}
    return replace(rec, experiment=swap.get(rec.experiment, rec.experiment), p=rec.q, q=rec.p,
                   theta=None if rec.theta is None else 1.0 - rec.theta)


# -- pointwise lower bound for the potential of h ---------------------------


def lower_bound_fit(alpha=0.5, d=1, ks=range(4, 13), config=None):
    """Potential of ``h`` at ``|x| = 2^-k`` over ``(log 1/|x|)^(1 - kappa)``.

    Returns
    -------
    (records, c)
        ``c`` is the largest constant below every measured ratio.
    """
    if d != 1:
        raise ConfigError("implemented for d = 1")
    config = config or QuadratureConfig(rel_tol=1e-8)
    h = make_h(d, alpha)
    kappa = h.kappa
    records, ratios = [], []
    for k in ks:
        t0 = time.perf_counter()
        x = 2.0 ** -k
        est = eval_riesz(h, alpha, d, x, config)
        scale = math.log(1.0 / x) ** (1.0 - kappa)
        ratios.append((est.value - est.error) / scale)
        records.append(ExperimentRecord("lower_bound", alpha, d, "potential_ratio",
                                        est.value / scale, est.error / scale, t=x,
                                        walltime_ms=1e3 * (time.perf_counter() - t0)))
    return records, float(min(ratios))


# -- divergence identity ----------------------------------------------------


def gaussian_density(n_cells):
    """``exp(-4 x^2 / (1 - x^2))`` on ``[-1, 1]`` sampled at ``n_cells + 1`` nodes."""
    x = np.linspace(-1.0, 1.0, n_cells + 1)
    v = np.zeros_like(x)
    inside = np.abs(x) < 1
    v[inside] = np.exp(-4 * x[inside] ** 2 / (1 - x[inside] ** 2))
    return GridFunction([-1.0], 2.0 / n_cells, v)


def divergence_study(alpha=0.5, sizes=(1024, 2048), config=None):
    """Relative L2 residual of the divergence identity for each grid size.

    The grid spacing is stored in the ``t`` column.
    """
    config = config or QuadratureConfig(rel_tol=1e-10, samples=10 ** 6)
    out = []
    for n in sizes:
        t0 = time.perf_counter()
        rep = check_divergence_identity(gaussian_density(n), alpha, 1, config)
        out.append(ExperimentRecord("divergence", alpha, 1, "rel_l2_residual",
                                    rep.rel_l2_residual, t=rep.spacing,
                                    walltime_ms=1e3 * (time.perf_counter() - t0)))
    return out


# -- lemma suites ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LemmaInstance:
    """Indicator data for one lemma evaluation; ``E`` is an interval."""

    f: object
    g: object
    j: int = 0
    E: tuple = (-1.0, 1.0)
    p: float = 2.0

    def __post_init__(self):
        for name in ("f", "g"):
            v = getattr(self, name)
            if not isinstance(v, (IndicatorBall, IndicatorBox, SimpleFunction)) or v.dim != 1:
                raise SpecError(f"lemma data must be one-dimensional indicators ({name})")
        if not self.E[1] > self.E[0]:
            raise SpecError("E must be a nondegenerate interval")
        if not self.p >= 1:
            raise SpecError("p must be >= 1")


GROUPS = {
    "basic": ("aux0", "aux1"),
    "mixed": ("aux20", "aux21"),
    "local": ("L0", "L00", "L000", "L0000"),
    "lorentz": ("aux1_lor", "aux2_lor"),
}
INEQUALITIES = tuple(k for v in GROUPS.values() for k in v)


def _norm1(f, p):
    """``||f||_p`` of an indicator/simple spec from its exact level data."""
    if math.isinf(p):
        return max((c for c, _, _ in interval_terms(f)), default=0.0)
    return lebesgue_norm(f, p)


def _measure(f):
    return sum(hi - lo for _, lo, hi in interval_terms(f))


def _sides(name, inst, theta, alpha, d):
    """(lhs, rhs without the constant) of one inequality."""
    prof = dyadic_indicator_profile(inst.f, inst.g, theta, inst.j)
    p, two = inst.p, 2.0 ** (d * inst.j)
    E = inst.E[1] - inst.E[0]
    crit = d / alpha
    if name == "aux0":
        return prof.integral_power(1.0), _norm1(inst.f, 1) * _norm1(inst.g, 1)
    if name == "aux1":
        return prof.integral_power(0.5) ** 2, two * _norm1(inst.f, 1) * _norm1(inst.g, 1)
    if name in ("aux20", "aux21"):
        s = 1.0 if math.isinf(p) else p / (p + 1.0)
        lhs = prof.integral_power(s) ** (1.0 / s)
        nf, ng = (_norm1(inst.f, 1), _norm1(inst.g, p)) if name == "aux20" else \
                 (_norm1(inst.f, p), _norm1(inst.g, 1))
        return lhs, two * nf * ng
    ip = 0.0 if math.isinf(p) else 1.0 / p
    local = prof.clip(*inst.E).integral_power(0.5) ** 2
    if name in ("L0", "L00"):
        nf, ng = (_norm1(inst.f, p), _norm1(inst.g, 1)) if name == "L0" else \
                 (_norm1(inst.f, 1), _norm1(inst.g, p))
        return local, (two * E) ** (1 - ip) * nf * ng * min(two, E) ** ip
    if name in ("L000", "L0000"):
        if name == "L000":
            nf, ng, w = _norm1(inst.f, p), _norm1(inst.g, crit), 1.0 - theta
        else:
            nf, ng, w = _norm1(inst.f, crit), _norm1(inst.g, p), theta
        cap = math.inf if w == 0 else E / w ** (d - alpha)
        return local, (two ** (1 - ip) * E ** (2 - alpha / d - ip) * nf * ng
                       * min(two, cap) ** ip)
    # Lorentz suite: int_E I_j(chi_A, chi_B) against the min-term bound, 1 <= p <= d/alpha
    if p > crit:
        raise SpecError("the Lorentz suite needs p <= d/alpha")
    A, B = _measure(inst.f), _measure(inst.g)
    lhs = prof.clip(*inst.E).integral_power(1.0)
    e = alpha * p / d
    other = A * B ** e if name == "aux1_lor" else A ** e * B
    return lhs, two ** (1 - e) * min(2.0 ** (alpha * p * inst.j) * E, other)


def default_instances():
    """Indicator suite used by the acceptance checks."""
    ivs = [IndicatorBox([0.0], [1.0]), IndicatorBox([-0.5], [0.75]), IndicatorBox([2.0], [1.5]),
           IndicatorBox([0.3], [0.1])]
    out = []
    for f in ivs:
        for g in ivs[:3]:
            for j in (-2, 0, 2):
                for E in ((-1.0, 1.0), (0.0, 0.5), (-3.0, 4.0)):
                    out.append(LemmaInstance(f, g, j, E, 1.5))
    return out


@dataclass(frozen=True)
class LemmaReport:
    """Smallest admissible constants per inequality and theta."""

    lemma: str
    constants: dict
    records: tuple

    @property
    def passed(self):
        return all(math.isfinite(c) for per in self.constants.values() for c in per.values())

    def spread(self, name):
        vals = [c for c in self.constants[name].values() if c > 0]
        return max(vals) / min(vals) if vals else 1.0


def lemma_suite(lemma, instances=None, thetas=DEFAULT_THETAS, alpha=0.5, d=1):
    """Evaluate both sides of lemma inequalities on exact indicator profiles.

    Parameters
    ----------
    lemma : str
        A group name from ``GROUPS`` or a single inequality label.
    """
    if lemma in GROUPS:
        names = GROUPS[lemma]
    elif lemma in INEQUALITIES:
        names = (lemma,)
    else:
        raise ConfigError(f"unknown lemma {lemma!r}")
    if d != 1:
        raise ConfigError("lemma suites are implemented for d = 1")
    insts = default_instances() if instances is None else list(instances)
    if not insts:
        raise ConfigError("instance list is empty")
    constants = {n: {} for n in names}
    records = []
    for name in names:
        for theta in thetas:
            best = 0.0
            for inst in insts:
                lhs, rhs = _sides(name, inst, float(theta), alpha, d)
                if lhs <= 0:
                    continue
                best = max(best, lhs / rhs if rhs > 0 else math.inf)
            constants[name][float(theta)] = best
            if math.isfinite(best):
                records.append(ExperimentRecord("lemma_" + name, alpha, d, "constant", best,
                                                theta=float(theta)))
    return LemmaReport(lemma, constants, tuple(records))
