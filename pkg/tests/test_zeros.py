from __future__ import annotations

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from discflow.flow import FlowSpec
from discflow.zeros import classify, right_integrable, left_integrable, zero_set
from models import cantor_f, generic_f, sqrt_abs, step


def test_isolated_zero_of_power_law():
    zs = zero_set(sqrt_abs())
    assert [p.x for p in zs.points] == [0.0]
    assert zs.is_countable


def test_cantor_structure():
    zs = zero_set(cantor_f())
    assert len(zs.cantor) == 1
    c = zs.cantor[0]
    assert (c.lo, c.hi, c.piece.ratio) == (0.0, 1.0, 1 / 3)
    assert [(iv.lo, iv.hi) for iv in zs.intervals] == [(-math.inf, 0.0), (1.0, math.inf)]
    assert not zs.points and not zs.is_countable


def test_step_zero():
    assert [p.x for p in zero_set(step(0.0)).points] == [0.0]


def test_two_sided_branch_point():
    zs = classify(sqrt_abs(-1, 1))
    assert zs.branch_points() == (0.0,)
    assert zs.dead_points() == ()


def test_repelled_on_neither_side_is_dead():
    zs = classify(sqrt_abs(1, -1))
    assert zs.dead_points() == (0.0,)
    assert zs.branch_points() == ()


def test_cantor_points_right_integrable():
    zs = classify(cantor_f())
    c = zs.cantor[0]
    assert c.right_integrable and not c.left_integrable
    assert c.lo_left_integrable is False and c.hi_right_integrable is False


def test_classify_idempotent():
    for f in (sqrt_abs(), sqrt_abs(-1, 1), generic_f(), cantor_f()):
        once = classify(f)
        assert classify(f, once) == once


def test_generic_flags():
    zs = classify(generic_f())
    flags = {p.x: (p.right_integrable, p.left_integrable) for p in zs.points}
    assert flags == {-1.0: (True, False), 0.0: (True, False), 1.0: (True, False), 2.0: (False, False)}


def test_dead_points_stay_put():
    f = sqrt_abs(1, -1)
    eng = FlowSpec(f).engine
    for x0 in classify(f).dead_points():
        t = np.linspace(0, 50, 11)
        np.testing.assert_array_equal(eng.flow(np.full(t.shape, x0), t), x0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 5.0), st.sampled_from([1, -1]))
def test_integrability_flags_open_to_the_side(delta, sign):
    f = sqrt_abs(-1, 1)
    x = 0.0
    assert right_integrable(f, x) and left_integrable(f, x)
    assert right_integrable(f, x + delta / 2)
    assert left_integrable(f, x - delta / 2)
