from __future__ import annotations

import math

import numpy as np
import pytest

from discflow.errors import NotConverged
from discflow.flow import FlowSpec
from discflow.kernel import MarkovSpec
from discflow.measure import cantor_measure
from discflow.sampler import sample_path
from discflow.verify import (
    Report,
    check_chapman_kolmogorov,
    check_closure,
    check_limits,
    check_semigroup,
    check_trajectories,
    run_ck_suite,
    sampled_residual,
)
from models import accumulating_zeros, branching_markov, cantor_f, example_markov, generic_markov, sqrt_abs


def test_ck_square_law_small_set():
    r = check_chapman_kolmogorov(example_markov(), 0.0, 0.5, 0.5, sets=[(0.0, 0.09)])
    assert r.passed and r.max_residual <= 1e-6
    # from 0 the mass of [0, 0.09] at time 1 is P(Y >= 0.7) = e^-0.7
    assert r.details[0]["rhs"] == pytest.approx(math.exp(-0.7), abs=1e-12)


def test_ck_dead_point_is_exact():
    r = check_chapman_kolmogorov(MarkovSpec(sqrt_abs(1, -1)), 0.0, 1.0, 2.0, sets=[(-1.0, 1.0), (0.0, 0.0)])
    assert r.max_residual == 0.0


def test_ck_branching_upper_half():
    r = check_chapman_kolmogorov(branching_markov(0.3), 0.0, 0.7, 0.6, sets=[(0.0, math.inf, False, False)])
    assert r.max_residual <= 1e-4
    assert r.details[0]["rhs"] == pytest.approx(0.3 * (1 - math.exp(-1.3)), abs=1e-12)


def test_ck_default_sets_generic():
    r = check_chapman_kolmogorov(generic_markov(), -1.5, 0.8, 1.1)
    assert r.passed and len(r.details) > 5


def test_ck_residual_shrinks_with_grid():
    # a low quadrature order makes the discretisation error visible
    res = [check_chapman_kolmogorov(generic_markov(), -0.5, 1.2, 0.9, grid_tol=g, order=2).max_residual for g in (3e-1, 1e-1, 3e-2)]
    assert res[0] > res[1] > res[2]
    assert res[2] <= 1e-8


def test_ck_rejects_zero_times():
    with pytest.raises(ValueError):
        check_chapman_kolmogorov(example_markov(), 0.0, 0.0, 1.0)


def test_ck_suite_deterministic():
    cases = [(0.0, 0.5, 0.5), (-1.0, 1.0, 0.3)]
    a = run_ck_suite(example_markov(), cases).to_dict()
    b = run_ck_suite(example_markov(), cases).to_dict()
    assert a == b and a["passed"]


def test_semigroup_square_law_with_stop():
    r = check_semigroup(FlowSpec(sqrt_abs(), stop_set=(0.0,)), samples=500, window=(-10, 10))
    assert r.passed, r.details


def test_semigroup_cantor():
    r = check_semigroup(FlowSpec(cantor_f(), cantor_measure()), samples=300, window=(0, 1), t_max=15, tol=1e-6)
    assert r.passed, r.details


def test_semigroup_given_points():
    r = check_semigroup(FlowSpec(sqrt_abs()), points=[(0.0, 1.0, 1.0), (-1.0, 0.5, 2.0)])
    assert r.passed and r.max_residual <= 1e-12


def test_trajectories_generic():
    r = check_trajectories(FlowSpec(generic_markov().f), samples=100, window=(-5, 5))
    assert r.passed, r.details


def test_sampled_residual_of_exact_path():
    t = np.linspace(0, 3, 301)
    assert sampled_residual(sqrt_abs(), t, t**2) <= 1e-12


def test_closure_constant_family():
    t = np.linspace(0, 2, 201)
    r = check_closure(sqrt_abs(), [(t, t**2)] * 4, (t, t**2))
    assert r.passed


def test_closure_fast_rates_reach_moving_solution():
    t = np.linspace(0, 4, 2001)
    paths = [sample_path(example_markov(2.0**k), 0.0, 4.0, 3, index=0) for k in range(4, 12)]
    r = check_closure(sqrt_abs(), paths, (t, t**2))
    assert r.passed
    d = [x["distance_to_limit"] for x in r.details]
    assert d[-1] < d[0] and d[-1] < 0.01


def test_closure_slow_rates_reach_stop_solution():
    t = np.linspace(0, 4, 401)
    paths = [sample_path(example_markov(2.0**-k), 0.0, 4.0, 3, index=0) for k in range(4, 12)]
    r = check_closure(sqrt_abs(), paths, (t, np.zeros_like(t)))
    assert r.passed and r.details[-1]["distance_to_limit"] == 0.0


def test_closure_fails_without_flagged_accumulation():
    t = np.linspace(0, 1, 1001)
    paths = [(t, np.minimum(1.0 / n, t)) for n in range(10, 60)]
    r = check_closure(accumulating_zeros(60, flagged=False), paths, (t, np.zeros_like(t)))
    assert not r.passed
    assert r.max_residual == pytest.approx(1.0, abs=1e-9)


def test_closure_not_converging():
    t = np.linspace(0, 1, 11)
    paths = [(t, t * 0.1), (t, t * 0.2), (t, t * 0.5)]
    with pytest.raises(NotConverged):
        check_closure(sqrt_abs(), paths, (t, t))


def test_limits_follow_rate_size():
    r = check_limits(example_markov())
    assert r.passed
    fast, slow = r.details
    assert fast["expected"] == "moving" and fast["w1_moving"] < fast["w1_stop"]
    assert slow["expected"] == "stop" and slow["w1_stop"] < slow["w1_moving"]


def test_limits_at_time_zero_are_exact():
    r = check_limits(example_markov(), t=0.0)
    assert r.max_residual == 0.0


def test_report_text():
    r = Report("semigroup", True, 1e-12, 1e-8)
    assert str(r).startswith("semigroup: PASS")
    assert r.to_dict()["max_residual"] == 1e-12


def test_semigroup_at_dead_point_is_exact():
    r = check_semigroup(FlowSpec(sqrt_abs(1, -1)), points=[(0.0, t, s) for t in (0.5, 3.0) for s in (1.0, 7.0)])
    assert r.max_residual == 0.0
