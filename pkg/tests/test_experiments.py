import math
import os
import tempfile
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.experiments import (COLUMNS, DEFAULT_THETAS, GROUPS, INEQUALITIES,
                                 ExperimentRecord, LemmaInstance, SweepPlan, default_instances,
                                 dumps, growth_report, lemma_suite, lower_bound_fit,
                                 mirror_record, output_cells, persist, read_records,
                                 sample_output, sharpness_case, theta_sweep)
from fraclab.functions import IndicatorBall, IndicatorBox, SpecError, zero
from fraclab.operators import OperatorParams, eval_B
from fraclab.quadrature import ConfigError, QuadratureConfig
from fraclab.regions import ExponentPoint, InvalidExponent

UNIT = IndicatorBox([0.0], [1.0])
BALL = IndicatorBall([0.0], 1.0)


def rec(**kw):
    base = dict(experiment="x", alpha=0.5, d=1, quantity="q", value=1.25)
    base.update(kw)
    return ExperimentRecord(**base)


def test_record_rejects_nonfinite():
    with pytest.raises(ValueError):
        rec(value=math.nan)
    with pytest.raises(ValueError):
        rec(stderr=-1.0)


def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    persist([], path)
    assert path.read_text() == ",".join(COLUMNS) + "\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    rows = [rec(value=0.1 + 0.2, p=1.5, q=math.inf, theta=1 / 3, j=-2, seed=7),
            rec(experiment="y", value=-1e-300, stderr=2.5e-17, t=2.0 ** -40)]
    path = tmp_path / ("out." + fmt)
    persist(rows, path, fmt)
    assert read_records(path) == rows


def test_walltime_zeroed_unless_requested(tmp_path):
    rows = [rec(walltime_ms=12.5)]
    assert read_records(_write(tmp_path, rows))[0].walltime_ms == 0.0
    path = tmp_path / "t.csv"
    persist(rows, path, timings=True)
    assert read_records(path)[0].walltime_ms == 12.5


def _write(tmp_path, rows, name="w.csv"):
    path = tmp_path / name
    persist(rows, path)
    return path


def test_persist_reports_path():
    with pytest.raises(OSError, match="no/such/dir"):
        persist([rec()], "/no/such/dir/out.csv")
    with pytest.raises(ConfigError):
        persist([rec()], "x.txt", "xml")


def test_dumps_seventeen_digits():
    line = dumps([rec(value=1 / 3)]).splitlines()[1]
    assert "0.33333333333333331" in line


def test_read_rejects_foreign_csv(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_records(path)


FLOATS = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=100, deadline=None)
@given(FLOATS, st.floats(0, 1e6), st.one_of(st.none(), FLOATS),
       st.one_of(st.none(), st.integers(-50, 50)),
       st.text(alphabet="abc_,\"", min_size=1, max_size=8))
def test_round_trip_property(value, err, theta, j, name):
    rows = [rec(experiment=name, value=value, stderr=err, theta=theta, j=j)]
    with tempfile.TemporaryDirectory() as d:
        for fmt in ("csv", "json"):
            path = os.path.join(d, "r." + fmt)
            persist(rows, path, fmt)
            assert read_records(path) == rows


def test_output_cells_cover_mapped_support():
    centers, measures, box = output_cells(IndicatorBox([-1.0], [2.0]), IndicatorBox([3.0], [2.0]),
                                          0.25, 256)
    assert box[0][0] == pytest.approx(0.25 * -1 + 0.75 * 3)
    assert box[1][0] == pytest.approx(0.25 * 1 + 0.75 * 5)
    assert measures.sum() == pytest.approx(box[1][0] - box[0][0])


def test_sample_output_vanishes_outside_cells():
    f, g = IndicatorBox([-1.0], [2.0]), IndicatorBox([3.0], [2.0])
    params = OperatorParams(0.5, 1, 0.25)
    field, _ = sample_output(f, g, params, QuadratureConfig(), n=64)
    from fraclab.operators import eval_bilinear
    lo, hi = field.box[0][0], field.box[1][0]
    for x in (lo - 0.01, hi + 0.01):
        assert eval_bilinear(f, g, params, x).value == 0.0


def test_sweep_plan_validation():
    pt = ExponentPoint(Fraction(3, 2), 1, Fraction(1, 2), 1)
    with pytest.raises(ConfigError):
        SweepPlan(BALL, BALL, pt, ())
    with pytest.raises(ConfigError):
        SweepPlan(BALL, BALL, pt, (0.5, 1.2))


def test_sweep_refuses_invalid_point():
    pt = ExponentPoint(8, 8, Fraction(1, 2), 1)
    with pytest.raises(InvalidExponent) as info:
        theta_sweep(SweepPlan(BALL, BALL, pt, (0.5,)))
    assert info.value.region.region == "Outside"
    crit = ExponentPoint(4, 4, Fraction(1, 2), 1)
    with pytest.raises(InvalidExponent):
        theta_sweep(SweepPlan(BALL, BALL, crit, (0.5,)))


def test_sweep_zero_input():
    pt = ExponentPoint(Fraction(3, 2), 1, Fraction(1, 2), 1)
    out = theta_sweep(SweepPlan(zero(1), BALL, pt, DEFAULT_THETAS, cells=64))
    assert [r.value for r in out] == [0.0] * 5


def test_sweep_top_edge_small():
    pt = ExponentPoint(Fraction(3, 2), 1, Fraction(1, 2), 1)
    out = theta_sweep(SweepPlan(BALL, BALL, pt, np.linspace(0, 1, 5), cells=2 ** 10))
    vals = [r.value for r in out]
    assert all(v > 0 and math.isfinite(v) for v in vals)
    assert max(vals) / np.median(vals) <= 5
    assert all(r.r == pytest.approx(6 / 7) for r in out)


def test_sweep_midpoint_matches_B():
    # the theta = 1/2 output is 2^alpha times B evaluated on the same cells
    f, g = BALL, IndicatorBox([-0.5], [1.0])
    params = OperatorParams(0.5, 1, 0.5)
    field, _ = sample_output(f, g, params, QuadratureConfig(rel_tol=1e-9), n=32)
    for x, v in zip(field.centers[::7, 0], field.values[::7]):
        b = eval_B(f, g, 0.5, 1, x, QuadratureConfig(rel_tol=1e-9)).value
        assert v == pytest.approx(2 ** 0.5 * b, rel=1e-7, abs=1e-12)


def test_growth_report_rules():
    ts = [2.0 ** -k for k in range(4, 9)]
    rep = growth_report(ts, [1.0, 1.2, 1.1, 1.4, 1.6], 0.125)
    assert rep.diverges and not rep.increasing
    rep = growth_report(ts, [1.0, 1.2, 1.1, 1.4, 1.3], 0.125)
    assert not rep.diverges
    vals = [math.log(1 / t) ** 0.5 for t in ts]
    assert growth_report(ts, vals, 0.5).fitted_exponent == pytest.approx(0.5)
    assert growth_report(ts, vals, 0.5).ratio_spread == pytest.approx(1.0)


def test_sharpness_validation():
    with pytest.raises(ConfigError):
        sharpness_case("VI", [0.01])
    with pytest.raises(ConfigError):
        sharpness_case("I", [0.2])
    with pytest.raises(ConfigError):
        sharpness_case("III", [0.01])
    with pytest.raises(ConfigError):
        sharpness_case("III", [0.01], p=3.0)
    with pytest.raises(ConfigError):
        sharpness_case("I", [])


def test_case_I_small_grid_and_mirror():
    ts = [2.0 ** -k for k in (4, 7, 10)]
    recs, rep = sharpness_case("I", ts, cells=2 ** 10)
    assert rep.increasing
    assert [r.experiment for r in recs] == ["sharpness_I"] * 3
    mirrored, _ = sharpness_case("II", ts, cells=2 ** 10)
    for a, b in zip(recs, mirrored):
        m = mirror_record(a)
        assert (m.experiment, m.theta, m.p, m.q, m.t) == (b.experiment, b.theta, b.p, b.q, b.t)
        assert abs(m.value - b.value) <= a.stderr + b.stderr + 1e-9 * a.value


def test_case_V_is_case_III_at_critical_p():
    ts, th = [1e-2, 1e-3], [0.5, 0.99]
    v, _ = sharpness_case("V", ts, th, cells=2 ** 9)
    iii, _ = sharpness_case("III", ts, th, p=2.0, cells=2 ** 9)
    assert [(r.theta, r.t, r.value, r.r) for r in v] == [(r.theta, r.t, r.value, r.r) for r in iii]


def test_lower_bound_fit_small():
    recs, c = lower_bound_fit(ks=range(4, 7))
    assert c > 0
    assert all(r.value >= c for r in recs)


def test_lemma_instance_validation():
    with pytest.raises(SpecError):
        LemmaInstance(IndicatorBall([0.0, 0.0], 1.0), UNIT)
    with pytest.raises(SpecError):
        LemmaInstance(UNIT, UNIT, E=(1.0, 0.0))
    from fraclab.functions import SmoothBump
    with pytest.raises(SpecError):
        LemmaInstance(SmoothBump(1, 1.0, 1.0), UNIT)


def test_aux0_example_and_brute_force():
    rep = lemma_suite("aux0", [LemmaInstance(UNIT, UNIT, 0)])
    for theta, c in rep.constants["aux0"].items():
        assert c <= 1 + 1e-12
    # brute-force 2D Riemann sum of I_0 at theta = 1/4: int int chi(x-3y/4) chi(x+y/4) over |y| <= 1
    n = 2000
    x = (np.arange(n) + 0.5) / n * 3 - 1
    y = (np.arange(n) + 0.5) / n * 2 - 1
    X, Y = np.meshgrid(x, y, indexing="ij")
    inside = ((X - 0.75 * Y >= 0) & (X - 0.75 * Y <= 1) & (X + 0.25 * Y >= 0)
              & (X + 0.25 * Y <= 1))
    brute = inside.sum() * (3 / n) * (2 / n)
    assert rep.constants["aux0"][0.25] == pytest.approx(brute, rel=5e-3)


def test_lemma_zero_instance():
    rep = lemma_suite("basic", [LemmaInstance(zero(1), UNIT)])
    assert all(c == 0 for per in rep.constants.values() for c in per.values())


def test_lemma_unknown():
    with pytest.raises(ConfigError):
        lemma_suite("L99")


@pytest.mark.parametrize("name", INEQUALITIES)
def test_each_inequality_finite(name):
    rep = lemma_suite(name, default_instances()[:12])
    assert rep.passed


def test_local_constants_finite_up_to_endpoint():
    # at theta = 1 the min-term cap E / (1 - theta)^(d - alpha) is infinite
    rep = lemma_suite("L000", thetas=(0.0, 0.5, 0.9, 0.99, 1.0))
    c = rep.constants["L000"]
    assert all(math.isfinite(v) for v in c.values())


def test_groups_cover_all_labels():
    assert set(INEQUALITIES) == {k for v in GROUPS.values() for k in v}
