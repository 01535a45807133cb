import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fraclab.functions import (ConstantOne, GridFunction, IndicatorBall, IndicatorBox,
                               RadialPowerLog, SimpleFunction, SmoothBump, SpecError, bump,
                               bump_lp_norm, decreasing_rearrangement_samples, dilate, evaluate,
                               from_dict, make_h, sample_cells, to_dict, translate)


def test_indicator_ball_inside_and_outside():
    f = IndicatorBall([0.0, 0.0, 0.0], 1.0)
    assert evaluate(f, [0.5, 0, 0]) == 1.0
    assert evaluate(f, [1.5, 0, 0]) == 0.0


def test_powerlog_value():
    h = RadialPowerLog(1, 0.5, 0.75, math.exp(-1))
    x = math.exp(-2)
    assert evaluate(h, x) == pytest.approx(math.e * 2 ** -0.75, rel=1e-14)
    assert evaluate(h, x) == pytest.approx(1.616, abs=5e-4)
    assert evaluate(h, 0.5) == 0.0


def test_powerlog_cutoff_validation():
    with pytest.raises(SpecError):
        RadialPowerLog(1, 0.5, 0.75, 0.5)
    with pytest.raises(SpecError):
        RadialPowerLog(1, 1.5, 0.75)


def test_make_h_kappa():
    assert make_h(1, 0.5).kappa == 0.75
    assert make_h(2, 1.0).kappa == 0.75
    with pytest.raises(SpecError):
        make_h(1, 1.0)


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_make_h_kappa_window(d):
    for alpha in np.linspace(0.05, d - 0.05, 9):
        k = make_h(d, alpha).kappa
        assert alpha / d < k < 1


def test_make_h_is_in_critical_space():
    # with |x| = e^-s the square integral is 2 int_1^inf s^-1.5 ds = 4
    h = make_h(1, 0.5)
    S = 600.0
    val, _ = integrate.quad(lambda s: 2 * evaluate(h, math.exp(-s)) ** 2 * math.exp(-s),
                            1, S, limit=200)
    assert val == pytest.approx(4.0 - 4.0 / math.sqrt(S), rel=1e-8)


def test_bump_mass_and_support():
    phi = bump(1)
    val, _ = integrate.quad(lambda x: evaluate(phi, x), -0.125, 0.125, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert evaluate(phi, 0.125) == 0.0
    assert phi.support_ball()[1] == pytest.approx(0.125)


def test_dilate_identity():
    phi = bump(1)
    assert dilate(phi, 1.0, 1.0) == phi


@pytest.mark.parametrize("t", [0.1, 0.01])
def test_dilate_preserves_mass(t):
    f = dilate(bump(1), t, 1.0)
    r = t / 8
    val, _ = integrate.quad(lambda x: evaluate(f, x), -r, r, epsabs=0, epsrel=1e-12)
    assert val == pytest.approx(1.0, rel=1e-9)


def test_dilate_preserves_l2_norm_grid_oracle():
    f = dilate(bump(1), 0.1, 2.0)
    x = np.linspace(-0.0125, 0.0125, 200001)
    vals = f(x[:, None])
    grid = math.sqrt(integrate.trapezoid(vals ** 2, x))
    assert grid == pytest.approx(bump_lp_norm(1, 2.0), rel=1e-8)


def test_dilate_rejects_bad_scale():
    with pytest.raises(SpecError):
        dilate(bump(1), 0.0, 1.0)


def test_grid_function_multilinear():
    g = GridFunction([0.0, 0.0], 1.0, np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert evaluate(g, [0.5, 0.5]) == pytest.approx(1.5)
    assert evaluate(g, [1.0, 0.0]) == pytest.approx(2.0)
    assert evaluate(g, [1.5, 0.5]) == 0.0


def test_grid_function_rejects_negative():
    with pytest.raises(SpecError):
        GridFunction([0.0], 1.0, np.array([0.0, -1.0]))


def test_simple_function_overlap_adds():
    s = SimpleFunction(((1.0, IndicatorBox([0.0], [2.0])), (2.0, IndicatorBox([1.0], [2.0]))))
    assert evaluate(s, 0.5) == 1.0
    assert evaluate(s, 1.5) == 3.0
    assert evaluate(s, 2.5) == 2.0


def test_rearrangement_indicator():
    f = IndicatorBox([0.0], [1.0])
    r = decreasing_rearrangement_samples(f, 10, ([-1.0], [2.0]))
    assert r(0.5) == 1.0
    assert r(1.0) == 0.0


def test_rearrangement_simple_function():
    s = SimpleFunction(((2.0, IndicatorBox([0.0], [1.0])), (1.0, IndicatorBox([2.0], [2.0]))))
    r = decreasing_rearrangement_samples(s, 10, ([-1.0], [5.0]))
    assert r(0.5) == 2.0
    assert r(2.0) == 1.0
    assert r(3.0) == 0.0


def test_rearrangement_power():
    f = RadialPowerLog(1, 0.5, 0.0, 1.0)
    r = decreasing_rearrangement_samples(f, 1000, ([-1.0], [1.0]))
    t = np.array([0.1, 0.5, 1.0, 1.9])
    # right-endpoint steps sit below the exact profile by at most one step
    exact = (t / 2) ** -0.5
    assert np.all(r(t) <= exact + 1e-12)
    assert np.allclose(r(t), exact, rtol=2e-2)


def test_rearrangement_domain_check():
    with pytest.raises(SpecError):
        decreasing_rearrangement_samples(IndicatorBox([0.0], [1.0]), 10, ([0.5], [2.0]))


def test_rearrangement_grid_matches_brute_force_sort():
    rng = np.random.default_rng(3)
    g = GridFunction([0.0], 0.25, rng.random(9))
    r = decreasing_rearrangement_samples(g, 64, ([0.0], [2.0]))
    _, vals, cell = sample_cells(g, [0.0], [2.0], 64)
    vals = np.sort(vals[vals > 0])[::-1]
    assert np.array_equal(r.values, vals)
    assert np.allclose(r.edges, cell * np.arange(1, len(vals) + 1))


@pytest.mark.parametrize("spec", [
    IndicatorBall([0.5], 2.0),
    IndicatorBox([0.0, 1.0], [1.0, 2.0]),
    SimpleFunction(((1.5, IndicatorBall([0.0], 1.0)), (0.5, IndicatorBox([2.0], [1.0])))),
    RadialPowerLog(2, 1.0, 0.75),
    SmoothBump(1, 0.1, 2.0),
    SmoothBump(2, 0.5, math.inf, (1.0, 1.0)),
    GridFunction([0.0], 0.5, np.array([0.0, 1.0, 0.5])),
])
def test_serialization_round_trip(spec):
    text = json.dumps(to_dict(spec))
    back = from_dict(json.loads(text))
    assert to_dict(back) == to_dict(spec)
    pts = np.linspace(-1, 2, 7)
    pts = pts[:, None] if spec.dim == 1 else np.stack([pts, pts], axis=1)
    assert np.array_equal(back(pts), spec(pts))


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(SpecError):
        from_dict({"kind": "ball", "center": [0], "radius": 1, "colour": "red"})
    with pytest.raises(SpecError):
        from_dict({"kind": "torus"})


def test_translate_shifts_values():
    f = SmoothBump(1, 0.5, 1.0)
    g = translate(f, [0.3])
    assert evaluate(g, 0.31) == pytest.approx(evaluate(f, 0.01))


def test_constant_one():
    one = ConstantOne(2)
    assert evaluate(one, [5.0, -3.0]) == 1.0


SPECS = st.one_of(
    st.builds(lambda c, r: IndicatorBall([c], r), st.floats(-3, 3), st.floats(0.01, 3)),
    st.builds(lambda a, k: RadialPowerLog(1, a, k), st.floats(0.05, 0.95), st.floats(0, 2)),
    st.builds(lambda t, p: SmoothBump(1, t, p), st.floats(0.01, 2), st.floats(1, 8)),
)


@settings(max_examples=60, deadline=None)
@given(SPECS, st.floats(-5, 5))
def test_evaluate_nonnegative_and_deterministic(f, x):
    v = evaluate(f, x)
    assert v >= 0
    assert evaluate(f, x) == v


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 3), st.floats(-3, 3), st.floats(0.05, 2)),
                min_size=1, max_size=5))
def test_rearrangement_nonincreasing(terms):
    s = SimpleFunction(tuple((c, IndicatorBox([lo], [w])) for c, lo, w in terms))
    r = decreasing_rearrangement_samples(s, 8, ([-4.0], [6.0]))
    assert np.all(np.diff(r.values) <= 0)
    total = sum(w for _, _, w in terms)
    assert r.total_measure <= total + 1e-12
