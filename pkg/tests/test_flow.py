from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discflow.errors import OutsideDomain, PhiMissing, SemanticError
from discflow.flow import (
    BISECT_RTOL,
    FlowSpec,
    build_domains,
    caratheodory_residual,
    flow,
    time_to_reach,
    trajectory,
)
from discflow.measure import AtomlessMeasure, cantor_measure
from models import CANTOR_GAP_INTEGRAL, cantor_f, generic_f, sqrt_abs, sqrt_to_one


def test_domain_without_stops_glues_through_zero():
    dom = build_domains(FlowSpec(sqrt_abs()))
    assert len(dom.increase) == 1 and not dom.decrease
    iv = dom.increase[0]
    assert iv.contains(0.0) and iv.contains(5.0)
    # 0 is passed through, so the interval of increase extends below it
    assert iv.lo == -math.inf and iv.hi == math.inf


def test_domain_with_stop_is_left_open():
    dom = build_domains(FlowSpec(sqrt_abs(), stop_set=(0.0,)))
    right = [iv for iv in dom.increase if iv.lo == 0.0]
    assert len(right) == 1 and not right[0].closed_start
    assert not right[0].contains(0.0)


def test_two_sided_domains():
    dom = build_domains(FlowSpec(sqrt_abs(-1, 1)))
    (inc,) = dom.increase
    (dec,) = dom.decrease
    assert (inc.lo, inc.hi, inc.closed_start) == (0.0, math.inf, True)
    assert (dec.lo, dec.hi, dec.closed_start) == (-math.inf, 0.0, True)
    assert FlowSpec(sqrt_abs(-1, 1)).engine.branch_points() == (0.0,)


def test_time_to_reach():
    spec = FlowSpec(sqrt_abs())
    assert time_to_reach(spec, 0.0, 1.0, 1) == pytest.approx(1.0, rel=1e-12)
    assert time_to_reach(spec, 0.3, 0.3, 1) == 0.0


@pytest.mark.parametrize("c", [0.0, 1.0, 2.5])
def test_cantor_travel_time(c):
    mu = cantor_measure(mass=c) if c else AtomlessMeasure()
    spec = FlowSpec(cantor_f(), mu)
    assert time_to_reach(spec, 0.0, 1.0, 1) == pytest.approx(CANTOR_GAP_INTEGRAL + c, abs=1e-8)


def test_unreachable_raises():
    spec = FlowSpec(sqrt_abs())
    with pytest.raises(OutsideDomain):
        time_to_reach(spec, 1.0, 0.0, 1)
    with pytest.raises(OutsideDomain):
        time_to_reach(spec, 1.0, 0.0, -1)


def test_square_law():
    t = np.linspace(0, 10, 1001)
    x = flow(FlowSpec(sqrt_abs()), np.zeros_like(t), t)
    np.testing.assert_allclose(x, t**2, rtol=1e-10, atol=1e-12)


def test_stopped_at_zero():
    t = np.linspace(0, 10, 101)
    x = flow(FlowSpec(sqrt_abs(), stop_set=(0.0,)), np.zeros_like(t), t)
    assert np.all(x == 0.0)


def test_saturation():
    spec = FlowSpec(sqrt_to_one(), stop_set=(1.0,))
    assert flow(spec, 0.0, 0.5) == pytest.approx(1 - 0.25, rel=1e-10)
    for t in (1.0, 1.5, 100.0):
        assert flow(spec, 0.0, t) == 1.0


def test_trajectory_rows():
    rows = trajectory(FlowSpec(sqrt_abs()), 0.0, [0, 1, 2])
    assert [r[0] for r in rows] == [0, 1, 2]
    np.testing.assert_allclose([r[1] for r in rows], [0, 1, 4], rtol=1e-10)


def test_mirrored_branch():
    spec = FlowSpec(sqrt_abs(-1, 1), phi={0.0: -1})
    t = np.linspace(0, 3, 31)
    np.testing.assert_allclose(flow(spec, np.zeros_like(t), t), -(t**2), rtol=1e-10, atol=1e-12)
    with pytest.raises(PhiMissing):
        flow(FlowSpec(sqrt_abs(-1, 1)), 0.0, 1.0)


def test_dead_point_constant():
    spec = FlowSpec(sqrt_abs(1, -1))
    assert flow(spec, 0.0, 7.0) == 0.0


def test_stop_outside_zero_set_rejected():
    with pytest.raises(SemanticError) as e:
        FlowSpec(sqrt_abs(), stop_set=(1.0,))
    assert e.value.rule == "stop-set-in-zeros"


def test_measure_off_zero_set_rejected():
    with pytest.raises(SemanticError) as e:
        FlowSpec(sqrt_abs(), mu=cantor_measure())
    assert e.value.rule == "support-in-zeros"


def test_bisection_tolerance_constant():
    assert BISECT_RTOL == 1e-12


def test_caratheodory_residuals():
    for spec, x0 in ((FlowSpec(sqrt_abs()), -3.0), (FlowSpec(generic_f()), -2.5), (FlowSpec(sqrt_to_one(), stop_set=(1.0,)), -1.0)):
        assert caratheodory_residual(spec, x0, 6.0) <= 1e-6


_SPECS = [FlowSpec(sqrt_abs()), FlowSpec(sqrt_abs(), stop_set=(0.0,)), FlowSpec(generic_f()), FlowSpec(sqrt_abs(-1, 1), phi={0.0: 1})]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(range(len(_SPECS))), st.floats(-20, 20), st.floats(0, 10), st.floats(0, 10))
def test_semigroup_law(k, x0, t, s):
    spec = _SPECS[k]
    lhs = flow(spec, flow(spec, x0, t), s)
    rhs = flow(spec, x0, t + s)
    assert abs(lhs - rhs) <= 1e-8 * (1 + abs(x0))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(range(len(_SPECS))), st.floats(-20, 20))
def test_monotone_in_time(k, x0):
    t = np.linspace(0, 10, 200)
    x = flow(_SPECS[k], np.full(t.shape, x0), t)
    d = np.diff(x)
    assert np.all(d >= 0) or np.all(d <= 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0, 10))
def test_order_preserved(a, b, t):
    spec = FlowSpec(generic_f())
    lo, hi = sorted((a, b))
    assert flow(spec, lo, t) <= flow(spec, hi, t)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-20, 1.99), min_size=3, max_size=3))
def test_time_additive(xs):
    spec = FlowSpec(generic_f())
    a, b, c = sorted(xs)
    ab = time_to_reach(spec, a, b, 1)
    bc = time_to_reach(spec, b, c, 1)
    ac = time_to_reach(spec, a, c, 1)
    assert ab + bc == pytest.approx(ac, abs=2e-10)


def test_cantor_flow_semigroup():
    spec = FlowSpec(cantor_f(), cantor_measure())
    rng = np.random.default_rng(5)
    x0 = rng.uniform(0, 1, 300)
    t, s = rng.uniform(0, 15, (2, 300))
    lhs = flow(spec, flow(spec, x0, t), s)
    rhs = flow(spec, x0, t + s)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_stop_at_branch_point_needs_no_direction():
    spec = FlowSpec(sqrt_abs(-1, 1), stop_set=(0.0,))
    assert flow(spec, 0.0, 5.0) == 0.0
    assert flow(spec, 1.0, 1.0) == pytest.approx(4.0, rel=1e-12)
    assert flow(spec, -1.0, 1.0) == pytest.approx(-4.0, rel=1e-12)
