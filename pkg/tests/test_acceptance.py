"""End-to-end acceptance checks.

Each test prints one ``[PASS]`` or ``[FAIL]`` line (visible in ``pytest -v``
output) and also fails when its wall-clock limit is exceeded.
"""

import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from fraclab.experiments import (GROUPS, SweepPlan, divergence_study, dumps, lemma_suite,
                                 lower_bound_fit, mirror_record, persist, sharpness_case,
                                 theta_sweep)
from fraclab.functions import IndicatorBall, IndicatorBox, SmoothBump, make_h
from fraclab.norms import SampledField, lebesgue_norm, lorentz_p1_norm, weak_norm
from fraclab.operators import (OperatorParams, dyadic_superposition, eval_B, eval_bilinear,
                               eval_riesz)
from fraclab.quadrature import QuadratureConfig
from fraclab.regions import (DivergentSeries, ExponentPoint, classify, series_A1,
                             series_A1_normalized, series_A2, series_A2_normalized)

F = Fraction
TIGHT = QuadratureConfig(rel_tol=1e-10)


@contextmanager
def criterion(capsys, tag, title, limit):
    """Time the block and print a single result line."""
    info = {"detail": ""}
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        ok = ok and elapsed <= limit
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {tag} {title}: {info['detail']} "
                  f"({elapsed:.2f} s of {limit} s)")
    assert elapsed <= limit, f"{title} took {elapsed:.1f} s"


def close(a, b, slack):
    return abs(a.value - b.value) <= a.error + b.error + slack * max(1.0, abs(b.value))


def random_interval(rng):
    lo = rng.uniform(-2, 1)
    return IndicatorBox([lo], [rng.uniform(0.1, 2.5)])


def test_01_midpoint_identity(capsys):
    rng = np.random.default_rng(101)
    with criterion(capsys, "01", "midpoint identity", 5) as info:
        worst = 0.0
        for _ in range(10):
            f, g = random_interval(rng), random_interval(rng)
            x = rng.uniform(-1.5, 1.5)
            lhs = eval_bilinear(f, g, OperatorParams(0.5, 1, 0.5), x, TIGHT).value
            rhs = 2 ** 0.5 * eval_B(f, g, 0.5, 1, x, TIGHT).value
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
        info["detail"] = f"max rel diff {worst:.2e}"
        assert worst <= 1e-6


def test_02_riesz_closed_forms(capsys):
    with criterion(capsys, "02", "Riesz closed forms", 10) as info:
        one_d = eval_riesz(IndicatorBox([-1.0], [2.0]), 0.5, 1, 0.0,
                           QuadratureConfig(rel_tol=1e-8))
        mc = eval_riesz(IndicatorBall([0.0, 0.0], 1.0), 1.0, 2, [0.0, 0.0],
                        QuadratureConfig(method="MonteCarloRadial", samples=10 ** 6))
        info["detail"] = (f"1D {one_d.value:.10f} vs 4, "
                          f"2D MC {mc.value:.6f} +- {mc.std_error:.1e} vs 2pi")
        assert one_d.value == pytest.approx(4.0, rel=1e-6)
        assert abs(mc.value - 2 * math.pi) <= 3 * mc.std_error + 1e-12


def test_03_symmetry(capsys):
    rng = np.random.default_rng(303)
    with criterion(capsys, "03", "theta symmetry", 10) as info:
        fails = 0
        for _ in range(50):
            f = random_interval(rng)
            g = SmoothBump(1, rng.uniform(0.2, 2.0), rng.uniform(1, 4), (rng.uniform(-1, 1),))
            theta, x = rng.uniform(0, 1), rng.uniform(-1.5, 1.5)
            a = eval_bilinear(f, g, OperatorParams(0.5, 1, theta), x, TIGHT)
            b = eval_bilinear(g, f, OperatorParams(0.5, 1, 1 - theta), x, TIGHT)
            fails += not close(a, b, 1e-8)
        info["detail"] = f"{fails} mismatches in 50"
        assert fails == 0


def test_04_dyadic_superposition(capsys):
    rng = np.random.default_rng(404)
    with criterion(capsys, "04", "dyadic superposition bound", 10) as info:
        worst = -math.inf
        for _ in range(20):
            f, g = random_interval(rng), random_interval(rng)
            params = OperatorParams(0.5, 1, rng.uniform(0, 1))
            lhs, rhs = dyadic_superposition(f, g, params, rng.uniform(-1, 1), range(-30, 5),
                                            TIGHT)
            excess = lhs.value - rhs.value - lhs.error - rhs.error
            worst = max(worst, excess)
        info["detail"] = f"largest lhs - rhs beyond error {worst:.2e}"
        assert worst <= 0


def test_05_lemma_suites(capsys):
    with criterion(capsys, "05", "lemma constants", 60) as info:
        spreads = {}
        for group in ("basic", "mixed", "local"):
            rep = lemma_suite(group)
            for name in GROUPS[group]:
                if name in ("aux0", "aux1", "aux20", "aux21", "L0", "L00"):
                    vals = rep.constants[name].values()
                    assert all(math.isfinite(c) for c in vals), name
                    spreads[name] = rep.spread(name)
                if name == "aux0":
                    aux0 = max(rep.constants[name].values())
        info["detail"] = (f"aux0 max {aux0:.6f}, largest spread "
                          f"{max(spreads.values()):.3f}")
        assert aux0 <= 1 + 1e-3
        assert all(s < 3 for s in spreads.values())


def test_06_series_bounds(capsys):
    with criterion(capsys, "06", "series bands and divergence", 1) as info:
        a1 = [series_A1_normalized(1.2, 0.5, 1, 2.0 ** k) for k in range(-20, 20)]
        a2 = [series_A2_normalized(2.0, 0.5, 1.0, 2.0 ** k) for k in range(-20, 20)]
        a2s = [series_A2_normalized(2.0, 0.5, 2.0 ** k, 1.0) for k in range(-20, 20)]
        spreads = [max(v) / min(v) for v in (a1, a2, a2s)]
        info["detail"] = "band widths " + ", ".join(f"{s:.3f}" for s in spreads)
        assert all(s <= 2 for s in spreads)
        series_A1(2 - 1e-9, 0.5, 1, 1.0)
        with pytest.raises(DivergentSeries):
            series_A1(2.0, 0.5, 1, 1.0)
        series_A2(1 + 1e-9, 0.5, 1.0, 1.0)
        with pytest.raises(DivergentSeries):
            series_A2(1.0, 0.5, 1.0, 1.0)


def test_07_norm_closed_forms(capsys):
    rng = np.random.default_rng(707)
    with criterion(capsys, "07", "norm closed forms", 1) as info:
        worst = 0.0
        for _ in range(100):
            d = int(rng.integers(1, 4))
            sides = rng.uniform(0.1, 3.0, d)
            box = IndicatorBox(rng.uniform(-2, 2, d), sides)
            m = float(np.prod(sides))
            p = rng.uniform(1, 6)
            for got, want in ((lebesgue_norm(box, p), m ** (1 / p)),
                              (weak_norm(box, p), m ** (1 / p)),
                              (lorentz_p1_norm(box, p), p * m ** (1 / p))):
                worst = max(worst, abs(got - want) / want)
        cheb = 0
        for _ in range(100):
            n = int(rng.integers(1, 50))
            field = SampledField(np.arange(n)[:, None] + 0.5, np.full(n, 1.0),
                                 rng.exponential(size=n), ([0.0], [float(n)]))
            p = rng.uniform(1, 6)
            cheb += weak_norm(field, p) > lebesgue_norm(field, p) * (1 + 1e-12)
        info["detail"] = f"max rel error {worst:.1e}, {cheb} Chebyshev violations"
        assert worst <= 1e-12 and cheb == 0


ATLAS = [
    ((F(7, 10), F(7, 10)), "SquareInterior", "UniformStrong"),
    ((F(7, 10), 1), "EdgeTop", "UniformWeak"),
    ((1, F(7, 10)), "EdgeRight", "UniformWeak"),
    ((F(7, 10), F(1, 2)), "EdgeBottom", "WeakUniformAwayFromTheta1"),
    ((F(1, 2), F(7, 10)), "EdgeLeft", "WeakUniformAwayFromTheta0"),
    ((F(1, 2), F(1, 2)), "CornerSW", "WeakUniformAwayFromBoth"),
    ((1, 1), "CornerNE", "UniformWeak"),
    ((F(1, 5), F(1, 2)), "PentagonInterior", "StrongNonuniform"),
    ((F(1, 5), F(1, 5)), "Outside", "None"),
]


def test_08_region_atlas(capsys):
    with criterion(capsys, "08", "region atlas", 1) as info:
        wrong = []
        for (x, y), region, bound in ATLAS:
            c = classify(ExponentPoint.from_inverse(x, y, F(1, 2), 1))
            if (c.region, c.bound) != (region, bound):
                wrong.append((x, y, c.region, c.bound))
        info["detail"] = f"{len(ATLAS) - len(wrong)}/{len(ATLAS)} points match"
        assert not wrong, wrong


@pytest.mark.slow
def test_09_sharpness_case_one(capsys):
    ts = [2.0 ** -k for k in range(4, 17)]
    with criterion(capsys, "09", "log blow-up along t = 2^-k", 300) as info:
        recs, rep = sharpness_case("I", ts)
        mirror, _ = sharpness_case("II", ts)
        mismatched = sum(
            abs(mirror_record(a).value - b.value) > a.stderr + b.stderr + 1e-9 * b.value
            for a, b in zip(recs, mirror))
        info["detail"] = (f"{rep.values[0]:.3f} -> {rep.values[-1]:.3f}, "
                          f"band {rep.ratio_spread:.3f}, {mismatched} mirror mismatches")
        assert rep.increasing
        assert rep.ratio_spread <= 2
        assert mismatched == 0
        assert [mirror_record(a).theta for a in recs] == [b.theta for b in mirror]


def test_10_pointwise_lower_bound(capsys):
    with criterion(capsys, "10", "pointwise lower bound", 30) as info:
        recs, c = lower_bound_fit()
        info["detail"] = f"c = {c:.4f} over {len(recs)} points"
        assert c > 0
        assert all(r.value - r.stderr >= c * (1 - 1e-12) for r in recs)


@pytest.mark.slow
def test_11_divergence_identity(capsys):
    with criterion(capsys, "11", "divergence identity", 60) as info:
        coarse, fine = divergence_study(sizes=(1024, 2048))
        ratio = fine.value / coarse.value
        info["detail"] = (f"residual {coarse.value:.3e} -> {fine.value:.3e}, "
                          f"ratio {ratio:.4f}")
        assert fine.value <= 5e-2
        assert 0.25 <= ratio <= 0.75


@pytest.mark.slow
def test_12_uniformity_sweep(capsys):
    with criterion(capsys, "12", "edge uniformity sweep", 600) as info:
        E = IndicatorBall([0.0], 1.0)
        top = theta_sweep(SweepPlan(E, E, ExponentPoint(F(3, 2), 1, F(1, 2), 1),
                                    tuple(np.linspace(0, 1, 21))))
        v = np.array([r.value for r in top])
        top_ratio = v.max() / np.median(v)
        plan = SweepPlan(SmoothBump(1, 1e-3, 4 / 3), make_h(1, 0.5),
                         ExponentPoint(F(4, 3), 2, F(1, 2), 1), (0.5, 0.9, 0.99, 0.999),
                         cells=4096)
        bottom = {r.theta: r.value for r in theta_sweep(plan)}
        growth = max(bottom[t] for t in (0.9, 0.99, 0.999)) / bottom[0.5]
        info["detail"] = f"top max/median {top_ratio:.3f}, bottom growth {growth:.2f}"
        assert top_ratio <= 5
        assert growth >= 1.5


def test_13_determinism(capsys, tmp_path):
    with criterion(capsys, "13", "byte-identical reruns", 30) as info:
        E = IndicatorBall([0.0], 1.0)

        def run(path):
            plan = SweepPlan(E, IndicatorBall([0.5], 0.5), ExponentPoint(F(3, 2), 1, F(1, 2), 1),
                             (0.0, 0.3, 1.0), QuadratureConfig(seed=9), cells=1024)
            recs, _ = sharpness_case("I", [2.0 ** -4, 2.0 ** -5], cells=1024)
            persist(theta_sweep(plan) + recs, path)
            return path.read_bytes()

        a, b = run(tmp_path / "a.csv"), run(tmp_path / "b.csv")
        mc = QuadratureConfig(method="MonteCarloRadial", samples=20_000, seed=5)
        ball2 = IndicatorBall([0.0, 0.0], 1.0)
        m1 = eval_riesz(ball2, 1.0, 2, [0.3, 0.1], mc)
        m2 = eval_riesz(ball2, 1.0, 2, [0.3, 0.1], mc)
        info["detail"] = f"{len(a)} CSV bytes, identical={a == b}, MC identical={m1 == m2}"
        assert a == b
        assert m1 == m2
        assert dumps([], "csv") == dumps([], "csv")
