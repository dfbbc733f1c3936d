from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discflow.kernel import MarkovSpec, kernel, ks_distance
from discflow.sampler import (
    empirical_kernel,
    hitting_time,
    path_residual,
    path_state,
    sample_directions,
    sample_path,
)
from models import branching_markov, example_markov, generic_markov, sqrt_abs


def _same(p, q):
    return (
        np.array_equal(p.times, q.times)
        and np.array_equal(p.states, q.states)
        and np.array_equal(p.wait_len, q.wait_len)
        and p.direction == q.direction
    )


def test_bitwise_reproducible():
    spec = generic_markov()
    for i in range(5):
        assert _same(sample_path(spec, -2.0, 8.0, 11, index=i), sample_path(spec, -2.0, 8.0, 11, index=i))
    assert _same(sample_path(spec, -2.0, 8.0, 11), sample_path(spec, -2.0, 8.0, 11))


def test_hold_then_square_law():
    p = sample_path(example_markov(), 0.0, 5.0, 3, index=0)
    (y,) = p.wait_len
    t = np.linspace(0, 5, 501)
    expect = np.where(t <= y, 0.0, (t - y) ** 2)
    np.testing.assert_allclose(path_state(example_markov(), p, t), expect, rtol=1e-9, atol=1e-12)
    assert p.events()[0] == ("hold", 0.0, 0.0)


def test_dead_start_is_constant():
    spec = MarkovSpec(sqrt_abs(1, -1))
    p = sample_path(spec, 0.0, 4.0, 1)
    assert np.all(p.states == 0.0) and p.events() == []


def test_atom_frequency_binomial():
    n, t = 100_000, 1.0
    emp = empirical_kernel(example_markov(), 0.0, t, n, 2024)
    p = math.exp(-t)
    freq = float(np.mean(emp.samples == 0.0))
    assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_branch_frequency():
    n = 100_000
    d = sample_directions(branching_markov(0.3), 0.0, n, 9)
    assert abs(np.mean(d > 0) - 0.3) <= 3 * math.sqrt(0.21 / n)
    assert [sample_path(branching_markov(0.3), 0.0, 1.0, 9, index=i).direction for i in range(20)] == list(d[:20])


def test_single_path_ecdf():
    emp = empirical_kernel(example_markov(), 0.0, 2.0, 1, 5)
    assert emp.samples.size == 1
    x = float(emp.samples[0])
    assert emp.cdf(x) == 1.0 and emp.cdf(x, left=True) == 0.0


def test_empirical_matches_paths():
    spec = generic_markov()
    emp = empirical_kernel(spec, -1.5, 3.0, 200, 77)
    finals = [float(path_state(spec, sample_path(spec, -1.5, 3.0, 77, index=i), 3.0)[0]) for i in range(200)]
    np.testing.assert_array_equal(emp.samples, np.sort(finals))


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_ks_against_exact(t):
    n = 20_000
    spec = generic_markov()
    emp = empirical_kernel(spec, -1.5, t, n, 4)
    assert ks_distance(emp, kernel(spec, -1.5, t)) <= 1.63 / math.sqrt(n) + 1e-3


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([0, 1, 2]), st.floats(-5, 5), st.integers(0, 10_000))
def test_paths_solve_and_are_monotone(which, x0, seed):
    spec = (example_markov(), branching_markov(0.3), generic_markov())[which]
    p = sample_path(spec, x0, 6.0, seed, index=0)
    assert path_residual(spec, p) <= 1e-6
    d = np.diff(p.states)
    assert np.all(d >= 0) or np.all(d <= 0)


def test_mean_crossing_time_exceeds_summed_holding_means():
    spec = generic_markov()
    x, y, n = -1.5, 1.5, 1000
    hits = np.array([hitting_time(spec, sample_path(spec, x, 60.0, 13, index=i), y) for i in range(n)])
    assert np.all(np.isfinite(hits))
    inside = [w for w in spec.waiting if x <= w <= y]
    assert sum(1 / spec.waiting[w] for w in inside) <= hits.mean()
