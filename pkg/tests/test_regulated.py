from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discflow.errors import InvalidFunction, UnresolvedZero
from discflow.regulated import (
    Constant,
    Custom,
    Polynomial,
    PowerLaw,
    RegulatedFn,
    piece_from_params,
)
from models import CANTOR_GAP_INTEGRAL, accumulating_zeros, cantor_f, ramp_then_flat, sqrt_abs, step


def test_eval_power_law_at_four():
    assert sqrt_abs().eval(4.0) == pytest.approx(4.0, abs=1e-15)


def test_step_takes_breakpoint_value():
    assert step(0.0).eval(0.0) == 0.0
    assert step(0.0).one_sided_limits(0.0) == (1.0, -1.0)


def test_cantor_vanishes_on_the_set():
    f = cantor_f()
    pts = np.array([0.0, 1.0, 1 / 3, 2 / 3, 1 / 9, 2 / 9, 7 / 9, 8 / 9, 1 / 4, 3 / 4, 2 / 27, 0.5 - 0.5 / 3 ** 10])
    # 1/4 and 3/4 lie in the set (ternary 0.0202...)
    assert np.all(f.eval(pts[:-1]) == 0.0)
    assert f.eval(0.5) == pytest.approx((1 / 6) ** (1 / 3))


def test_one_sided_limits():
    assert sqrt_abs().one_sided_limits(0.0) == (0.0, 0.0)
    left, right = ramp_then_flat().one_sided_limits(1.0)
    assert left == pytest.approx(1.0) and right == 0.0


def test_no_jamming_violation_is_reported_with_witness():
    rep = step(1.0).validate()
    assert not rep.valid
    v = rep.violations[0]
    assert v.rule == "no-jamming" and v.witness == 0.0
    with pytest.raises(InvalidFunction):
        step(1.0).require_valid()


def test_power_law_valid():
    assert sqrt_abs().validate().valid


def test_accumulating_breakpoints_rejected():
    rep = accumulating_zeros(50, flagged=True).validate()
    assert "regulated" in rep.rules()
    assert any("not regulated at 0" in v.message for v in rep.violations)
    assert accumulating_zeros(50, flagged=False).validate().valid


def test_breakpoint_cap():
    n = 1025
    f = RegulatedFn(tuple(range(n)), tuple(Constant(1.0) for _ in range(n + 1)), tuple(0.0 for _ in range(n)), 1.0)
    rep = f.validate()
    assert "regulated" in rep.rules()
    assert any("1024" in v.message for v in rep.violations)


def test_unbounded_on_window_rejected():
    f = RegulatedFn.single(Polynomial((0.0, 1.0)), 5.0, window=(-10.0, 10.0))
    assert "bounded" in f.validate().rules()


def test_reciprocal_integrals():
    f = RegulatedFn.single(PowerLaw(0.0, 2.0, 0.5), 1e3)
    assert f.reciprocal_integral(0.0, 1.0) == pytest.approx(1.0, rel=1e-12)
    g = RegulatedFn.single(PowerLaw(0.0, 1.0, 1.0), 1e3)
    assert math.isinf(g.reciprocal_integral(0.0, 1.0))
    assert cantor_f().reciprocal_integral(0.0, 1.0) == pytest.approx(CANTOR_GAP_INTEGRAL, rel=1e-11)


def test_wrong_side_is_infinite():
    f = sqrt_abs()
    assert math.isinf(f.reciprocal_integral(0.0, 1.0, "minus"))
    assert math.isinf(f.reciprocal_integral(-math.inf, 0.0))


def test_custom_piece_routes_agree():
    g = lambda x: 2.0 * np.sqrt(np.abs(x))
    with_anti = Custom(g, antiderivative=lambda x: math.sqrt(abs(x)), zeros=(), edge_exponents=(0.5, None))
    probed = Custom(g, zeros=(), edge_exponents=(None, None))
    annotated = Custom(g, zeros=(), edge_exponents=(0.5, None))
    ref = 1.0
    for piece in (with_anti, probed, annotated):
        f = RegulatedFn((0.0,), (Constant(0.0), piece), (0.0,), 1e3, (-10.0, 10.0))
        assert f.reciprocal_integral(0.0, 1.0) == pytest.approx(ref, rel=1e-8)


def test_custom_probe_detects_divergence():
    lin = Custom(lambda x: np.asarray(x, dtype=float), zeros=(), edge_exponents=(None, None))
    f = RegulatedFn((0.0,), (Constant(0.0), lin), (0.0,), 1e3, (-10.0, 10.0))
    assert math.isinf(f.reciprocal_integral(0.0, 1.0))


def test_custom_undeclared_zero_is_unresolved():
    c = Custom(np.sin, zeros=None)
    with pytest.raises(UnresolvedZero):
        c.zeros_inside(1.0, 5.0)


def test_custom_not_serializable():
    with pytest.raises(TypeError):
        Custom(np.cos).params()


def test_piece_params_round_trip():
    for piece in (Constant(2.0), PowerLaw(1.0, 3.0, 0.25, -1), Polynomial((1.0, 0.0, 2.0)), cantor_f().pieces[1]):
        assert piece_from_params(piece.form, piece.params()) == piece


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3, unique=True), st.sampled_from([1, -1]))
def test_reciprocal_integral_additive(xs, left_sign):
    a, b, c = sorted(xs)
    f = sqrt_abs(left_sign, 1)
    for side in ("plus", "minus"):
        whole = f.reciprocal_integral(a, c, side)
        parts = f.reciprocal_integral(a, b, side) + f.reciprocal_integral(b, c, side)
        if math.isinf(whole) or math.isinf(parts):
            assert math.isinf(whole) and math.isinf(parts)
        else:
            assert whole == pytest.approx(parts, rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(-10, 10),
    st.floats(0.1, 10),
    st.floats(0.0, 0.95),
    st.floats(1e-3, 10),
)
def test_power_law_closed_form(anchor, coeff, alpha, length):
    f = RegulatedFn.single(PowerLaw(anchor, coeff, alpha), 1e6, window=(anchor - 20, anchor + 20))
    b = anchor + length
    expect = (b - anchor) ** (1 - alpha) / (coeff * (1 - alpha))
    assert f.reciprocal_integral(anchor, b) == pytest.approx(expect, rel=1e-9)


def _random_fn(rng: np.random.Generator) -> RegulatedFn:
    n = int(rng.integers(1, 6))
    bps = np.sort(rng.choice(np.arange(-10, 11), n, replace=False)).astype(float)
    pieces = tuple(Constant(float(rng.choice([-1.0, 0.0, 2.0]))) for _ in range(n + 1))
    values = tuple(float(rng.choice([-1.0, 0.0, 2.0])) for _ in range(n))
    return RegulatedFn(tuple(bps), pieces, values, 3.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_validated_functions_vanish_where_forced(seed):
    f = _random_fn(np.random.default_rng(seed))
    if not f.validate().valid:
        return
    for y in f.breakpoints:
        lm, lp = f.one_sided_limits(y)
        if lm * lp == 0 or (lm > 0 > lp):
            assert f.eval(y) == 0.0


def test_eval_matches_pieces_at_random_points():
    f = sqrt_abs(-1, 1)
    x = np.random.default_rng(1).uniform(-50, 50, 10_000)
    direct = np.sign(x) * 2 * np.sqrt(np.abs(x))
    np.testing.assert_allclose(f.eval(x), direct, rtol=1e-15, atol=0)
    lims = np.array([f.one_sided_limits(v) for v in x[:200]])
    np.testing.assert_allclose(lims[:, 0], direct[:200], rtol=1e-12)
    np.testing.assert_allclose(lims[:, 1], direct[:200], rtol=1e-12)

