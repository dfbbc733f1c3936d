"""Monte Carlo sample paths of the Markov semigroups.

Each path owns a random generator seeded from ``(seed, index)`` so a path
can be regenerated on its own and batches are reproducible bit for bit.
Per path the draws are, in order: one uniform deciding the branch at the
starting point, then one standard exponential per waiting point ahead on
the chosen leg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .flow import graded_nodes
from .kernel import LegWaits, MarkovSpec, TransitionKernel

MOTION_POINTS = 512


def _rng(seed: int, index: Optional[int]) -> np.random.Generator:
    if index is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(index),)))


@dataclass(frozen=True, eq=False)
class SamplePath:
    """One realisation on ``[0, horizon]``.

    ``wait_x``, ``wait_w`` and ``wait_len`` list the waiting points ahead of
    ``x0`` on the chosen leg, their clock distance from ``x0`` and the
    sampled holding times.  ``times``/``states`` sample the path on a grid
    of ``MOTION_POINTS`` points per stretch of motion plus every event.
    """

    x0: float
    horizon: float
    seed: int
    index: Optional[int]
    direction: int
    leg: Optional[LegWaits]
    wait_x: np.ndarray
    wait_w: np.ndarray
    wait_len: np.ndarray
    tau: float
    times: np.ndarray
    states: np.ndarray

    @property
    def arrivals(self) -> np.ndarray:
        return self.wait_w + np.concatenate([[0.0], np.cumsum(self.wait_len)[:-1]])

    @property
    def end_time(self) -> float:
        """Time at which the far end of the leg is reached (``inf`` if never)."""
        return self.tau + float(np.sum(self.wait_len))

    def events(self) -> list[tuple[str, float, float]]:
        out = [("hold", float(a), float(x)) for a, x in zip(self.arrivals, self.wait_x) if a <= self.horizon]
        if self.end_time <= self.horizon:
            out.append(("end", self.end_time, float(self.leg.end)))
        return out


def _elapsed(times: np.ndarray, wait_w: np.ndarray, wait_len: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clock distance covered by time ``t`` and the index of the wait in progress."""
    times = np.asarray(times, dtype=float)
    u = times.copy()
    holding = np.full(times.shape, -1)
    done = np.zeros(times.shape, dtype=bool)
    spent = 0.0
    for j, (w, y) in enumerate(zip(wait_w, wait_len)):
        arrive = w + spent
        before = ~done & (times < arrive)
        u[before] = times[before] - spent
        done |= before
        during = ~done & (times <= arrive + y)
        u[during] = w
        holding[during] = j
        done |= during
        spent += y
    u[~done] = times[~done] - spent
    return u, holding


def _positions(lw: LegWaits, x0: float, s0: float, tau: float, u: np.ndarray, holding: np.ndarray, wait_w: np.ndarray, wait_x: np.ndarray) -> np.ndarray:
    out = np.empty(u.shape)
    at_end = u >= tau
    out[at_end] = lw.end
    hold = (holding >= 0) & ~at_end
    out[hold] = wait_x[holding[hold]]
    move = ~(at_end | hold)
    if np.any(move):
        um = u[move]
        y = lw.leg.invert(lw.direction * (s0 + um))
        # below clock resolution the inverse may land behind the start or
        # past the next waiting point, so keep it between the two
        nxt = np.searchsorted(wait_w, um, side="right")
        stops = np.append(wait_x, lw.end)[nxt]
        lo, hi = (x0, stops) if lw.direction > 0 else (stops, x0)
        out[move] = np.clip(y, lo, hi)
    return out


@dataclass(frozen=True, eq=False)
class _Plan:
    lw: LegWaits
    s0: float
    wait_w: np.ndarray
    wait_x: np.ndarray
    rates: np.ndarray
    tau: float


def _plans(spec: MarkovSpec, x0: float) -> list[tuple[float, _Plan]]:
    out = []
    for w, lw in spec.engine.branches_at(x0):
        s0 = float(lw.dpos(x0)[0])
        ahead = lw.dclock >= s0
        out.append((w, _Plan(lw, s0, lw.dclock[ahead] - s0, lw.x[ahead], lw.rates[ahead], lw.dend - s0)))
    return out


def _draw(plans: list[tuple[float, _Plan]], rng: np.random.Generator) -> tuple[Optional[_Plan], np.ndarray]:
    pick = rng.random()
    if not plans:
        return None, np.empty(0)
    acc = 0.0
    chosen = plans[-1][1]
    for w, plan in plans:
        acc += w
        if pick < acc:
            chosen = plan
            break
    return chosen, rng.standard_exponential(chosen.wait_w.size) / chosen.rates


def sample_path(spec: MarkovSpec, x0: float, horizon: float, seed: int, index: Optional[int] = None) -> SamplePath:
    """Simulate one path from ``x0`` up to ``horizon``."""
    x0 = float(x0)
    plan, wait_len = _draw(_plans(spec, x0), _rng(seed, index))
    if plan is None:
        times = np.array([0.0, horizon])
        empty = np.empty(0)
        return SamplePath(x0, horizon, seed, index, 0, None, empty, empty, empty, math.inf, times, np.full(2, x0))
    lw, s0, wait_w, wait_x, tau = plan.lw, plan.s0, plan.wait_w, plan.wait_x, plan.tau
    arrivals = wait_w + np.concatenate([[0.0], np.cumsum(wait_len)[:-1]]) if wait_w.size else wait_w
    leaves = arrivals + wait_len
    end_time = tau + float(np.sum(wait_len))
    starts = np.concatenate([[0.0], leaves])
    stops = np.concatenate([arrivals, [end_time]])
    grids = []
    for a, b in zip(starts, stops):
        b = min(b, horizon)
        if a > horizon:
            break
        if b > a:
            grids.append(np.linspace(a, b, MOTION_POINTS))
        else:
            grids.append(np.array([a]))
    grids.append(np.array([horizon]))
    times = np.unique(np.concatenate(grids))
    times = times[times <= horizon]
    u, holding = _elapsed(times, wait_w, wait_len)
    states = _positions(lw, x0, s0, tau, u, holding, wait_w, wait_x)
    states[times == 0] = x0
    return SamplePath(x0, horizon, seed, index, lw.direction, lw, wait_x, wait_w, wait_len, tau, times, states)


def path_state(spec: MarkovSpec, path: SamplePath, times) -> np.ndarray:
    """Exact state of a sampled path at arbitrary times."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if path.leg is None:
        return np.full(times.shape, path.x0)
    s0 = float(path.leg.dpos(path.x0)[0])
    u, holding = _elapsed(times, path.wait_w, path.wait_len)
    out = _positions(path.leg, path.x0, s0, path.tau, u, holding, path.wait_w, path.wait_x)
    out[times == 0] = path.x0
    return out


def hitting_time(spec: MarkovSpec, path: SamplePath, y: float) -> float:
    """First time the path reaches ``y`` (``inf`` if it never does)."""
    if y == path.x0:
        return 0.0
    if path.leg is None:
        return math.inf
    lw = path.leg
    s0 = float(lw.dpos(path.x0)[0])
    w = float(lw.dpos(y)[0]) - s0
    if not (0 <= w <= path.tau) or not math.isfinite(w):
        return math.inf
    return w + float(np.sum(path.wait_len[path.wait_w < w]))


def path_residual(spec: MarkovSpec, path: SamplePath) -> float:
    """Largest ``|x(t) - x0 - int_0^t f(x(s)) ds|`` at the path's events.

    Holding intervals contribute nothing since waiting points are zeros of
    ``f``; stretches of motion are split where the path crosses a cell
    boundary and integrated with graded Gauss-Legendre rules.
    """
    f = spec.f
    if path.leg is None:
        return abs(f.eval(path.x0)) * path.horizon
    lw = path.leg
    s0 = float(lw.dpos(path.x0)[0])
    dbounds = np.sort(lw.direction * lw.leg.phi_bounds) - s0
    arrivals = path.arrivals
    cum = np.concatenate([[0.0], np.cumsum(path.wait_len)])
    cuts = [0.0, path.horizon]
    for w in dbounds[np.isfinite(dbounds) & (dbounds > 0)]:
        k = int(np.sum(path.wait_w < w))
        cuts.append(w + cum[k])
    cuts.extend(arrivals)
    cuts.extend(arrivals + path.wait_len)
    cuts = np.unique(np.clip(cuts, 0.0, path.horizon))
    integral = 0.0
    worst = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        nodes, weights = graded_nodes(a, b)
        integral += float(np.dot(weights, f.eval(path_state(spec, path, nodes))))
        xb = float(path_state(spec, path, b)[0])
        worst = max(worst, abs(xb - path.x0 - integral))
    return worst


def empirical_kernel(spec: MarkovSpec, x0: float, t: float, n: int, seed: int) -> TransitionKernel:
    """Empirical law of ``X(t)`` from ``n`` paths; path ``i`` equals ``sample_path(..., seed, index=i)`` at ``t``."""
    x0 = float(x0)
    finals = np.empty(n)
    plans = _plans(spec, x0)
    groups: dict[int, tuple[_Plan, list, list]] = {}
    for i in range(n):
        plan, wait_len = _draw(plans, _rng(seed, i))
        if plan is None:
            finals[i] = x0
            continue
        g = groups.setdefault(id(plan), (plan, [], []))
        g[1].append(i)
        g[2].append(wait_len)
    for plan, idx, lens in groups.values():
        lw, s0, wait_w, wait_x, tau = plan.lw, plan.s0, plan.wait_w, plan.wait_x, plan.tau
        idx = np.asarray(idx)
        Y = np.asarray(lens).reshape(len(idx), wait_w.size)
        u = np.full(len(idx), float(t))
        holding = np.full(len(idx), -1)
        done = np.zeros(len(idx), dtype=bool)
        spent = np.zeros(len(idx))
        for j, w in enumerate(wait_w):
            arrive = w + spent
            before = ~done & (t < arrive)
            u[before] = t - spent[before]
            done |= before
            during = ~done & (t <= arrive + Y[:, j])
            u[during] = w
            holding[during] = j
            done |= during
            spent = spent + Y[:, j]
        u[~done] = t - spent[~done]
        pos = _positions(lw, x0, s0, tau, u, holding, wait_w, wait_x)
        if t == 0:
            pos[:] = x0
        finals[idx] = pos
    return TransitionKernel.empirical(finals)


def sample_directions(spec: MarkovSpec, x0: float, n: int, seed: int) -> np.ndarray:
    """Direction (+1, -1, or 0 for a constant path) chosen by paths ``0..n-1``."""
    plans = _plans(spec, float(x0))
    out = np.zeros(n, dtype=int)
    for i in range(n):
        plan, _ = _draw(plans, _rng(seed, i))
        if plan is not None:
            out[i] = plan.lw.direction
    return out
