"""Deterministic semigroups built from a stop set and an atomless measure.

On each maximal interval where trajectories move in one direction the
travel time is an increasing *clock*

    clock(x) = int_ref^x dy / |f(y)| + mu((ref, x]),

and the flow is obtained by inverting it: ``S_t x0`` is the point whose
clock differs from that of ``x0`` by ``t`` (in the direction of motion),
saturating at the far end of the interval once it is reached.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import OutsideDomain, PhiMissing, SemanticError
from .measure import AtomlessMeasure
from .regulated import Piece, RegulatedFn
from .zeros import ZeroStructure, classify, critical_points

BISECT_RTOL = 1e-12
BISECT_MAX_ITER = 200
CLOCK_RTOL = 1e-14
T_MAX = 1e9


@dataclass(frozen=True)
class MonotoneInterval:
    """Maximal interval of increase (``direction=+1``) or decrease (``-1``).

    ``closed_start`` says whether the end trajectories start from (``lo``
    for increase, ``hi`` for decrease) belongs to the interval.  The other
    end never does.
    """

    lo: float
    hi: float
    direction: int
    closed_start: bool

    @property
    def start(self) -> float:
        return self.lo if self.direction > 0 else self.hi

    @property
    def end(self) -> float:
        return self.hi if self.direction > 0 else self.lo

    def contains(self, x: float) -> bool:
        if self.lo < x < self.hi:
            return True
        return self.closed_start and x == self.start

    def __str__(self):
        left = "[" if self.direction > 0 and self.closed_start else "("
        right = "]" if self.direction < 0 and self.closed_start else ")"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"


@dataclass(frozen=True)
class MonotoneDomains:
    increase: tuple[MonotoneInterval, ...]
    decrease: tuple[MonotoneInterval, ...]


@dataclass(frozen=True)
class _Cell:
    lo: float
    hi: float
    piece: Piece
    sign: int
    left_ok: bool = False
    right_ok: bool = False


def _probe(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


class Leg:
    """Clock and its inverse on one monotone interval."""

    def __init__(self, interval: MonotoneInterval, cells: Sequence[_Cell], mu: AtomlessMeasure):
        self.interval = interval
        self.direction = interval.direction
        self.cells = list(cells)
        self.mu = mu
        self.bounds = np.array([c.lo for c in cells] + [cells[-1].hi], dtype=float)
        n = len(cells)
        phi = np.empty(n + 1)
        if n >= 2:
            ref = self.bounds[1]
            phi[1] = 0.0
            for k in range(1, n):
                phi[k + 1] = phi[k] + self._cell_integral(k, self.bounds[k], self.bounds[k + 1])
            phi[0] = -self._cell_integral(0, self.bounds[0], self.bounds[1])
        else:
            ref = _probe(self.bounds[0], self.bounds[1])
            phi[0] = -self._cell_integral(0, self.bounds[0], ref)
            phi[1] = self._cell_integral(0, ref, self.bounds[1])
        self.ref = float(ref)
        self.phi_bounds = phi
        self._anchor_x = np.empty(n)
        self._anchor_phi = np.empty(n)
        for k in range(n):
            if math.isfinite(phi[k]) and math.isfinite(self.bounds[k]):
                self._anchor_x[k], self._anchor_phi[k] = self.bounds[k], phi[k]
            elif math.isfinite(phi[k + 1]) and math.isfinite(self.bounds[k + 1]):
                self._anchor_x[k], self._anchor_phi[k] = self.bounds[k + 1], phi[k + 1]
            else:
                self._anchor_x[k], self._anchor_phi[k] = self.ref, 0.0
        self._anchor_mu = np.asarray(self._mu_cdf(self._anchor_x), dtype=float)

    def _mu_cdf(self, x):
        if self.mu.is_zero:
            return np.zeros(np.shape(x))
        return self.mu.cdf(np.asarray(x, dtype=float))

    def _cell_integral(self, k: int, a: float, b: float) -> float:
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        cell = self.cells[k]
        val = cell.piece.recip_integral(a, b, cell.sign)
        if not self.mu.is_zero and math.isfinite(val):
            val += float(self._mu_cdf(b) - self._mu_cdf(a))
        return val

    @property
    def lo(self) -> float:
        return self.interval.lo

    @property
    def hi(self) -> float:
        return self.interval.hi

    def _cell_of(self, x: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.bounds, x, side="right") - 1
        return np.clip(k, 0, len(self.cells) - 1)

    def _clock_in(self, k: np.ndarray, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape)
        for kk in np.unique(k):
            m = k == kk
            cell = self.cells[kk]
            ax = self._anchor_x[kk]
            val = cell.piece.recip_cumulative(ax, x[m], cell.sign) + self._anchor_phi[kk]
            if not self.mu.is_zero:
                val = val + self._mu_cdf(x[m]) - self._anchor_mu[kk]
            out[m] = val
        return out

    def clock(self, x):
        """Clock value at ``x`` (scalar or array) within the closed interval."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._clock_in(self._cell_of(xa), xa)
        # exact values at cell boundaries
        hit = np.searchsorted(self.bounds, xa)
        hit = np.clip(hit, 0, len(self.bounds) - 1)
        on = self.bounds[hit] == xa
        out[on] = self.phi_bounds[hit[on]]
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def invert(self, target):
        """Point of the closed interval with the given clock value."""
        T = np.atleast_1d(np.asarray(target, dtype=float)).astype(float)
        out = np.empty(T.shape)
        lo_phi, hi_phi = self.phi_bounds[0], self.phi_bounds[-1]
        top = T >= hi_phi
        bot = T <= lo_phi
        out[top] = self.hi
        out[bot] = self.lo
        rest = ~(top | bot)
        if np.any(rest):
            out[rest] = self._bisect(T[rest])
        return float(out[0]) if np.ndim(target) == 0 else out.reshape(np.shape(target))

    def _bisect(self, T: np.ndarray) -> np.ndarray:
        k = np.clip(np.searchsorted(self.phi_bounds, T, side="right") - 1, 0, len(self.cells) - 1)
        a = self.bounds[k].copy()
        b = self.bounds[k + 1].copy()
        both = np.isinf(a) & np.isinf(b)
        if np.any(both):
            # a single cell covering the line is anchored at ref with clock 0
            a[both & (T >= 0)] = self.ref
            b[both & (T < 0)] = self.ref
        # open-ended cells: grow a bracket geometrically from a finite point
        for side in (+1, -1):
            m = np.isinf(b) if side > 0 else np.isinf(a)
            if not np.any(m):
                continue
            base = np.where(np.isfinite(a[m]) if side > 0 else np.isfinite(b[m]), a[m] if side > 0 else b[m], self.ref)
            near = base.copy()
            step = np.ones_like(base)
            idx = np.nonzero(m)[0]
            pending = np.ones(idx.size, dtype=bool)
            far = base + side * step
            while np.any(pending):
                c = self._clock_in(k[idx[pending]], far[pending])
                tgt = T[idx[pending]]
                done = c >= tgt if side > 0 else c <= tgt
                sub = np.nonzero(pending)[0]
                near[sub[~done]] = far[sub[~done]]
                step[sub[~done]] *= 2
                far[sub[~done]] = base[sub[~done]] + side * step[sub[~done]]
                pending[sub[done]] = False
                if np.any(~np.isfinite(far)):
                    raise OverflowError("clock inversion diverged")
            if side > 0:
                a[idx] = np.where(np.isfinite(a[idx]), np.maximum(a[idx], near), near)
                b[idx] = far
            else:
                b[idx] = np.where(np.isfinite(b[idx]), np.minimum(b[idx], near), near)
                a[idx] = far
        tol = BISECT_RTOL * (b - a)
        # where the clock is steep (next to an integrable zero) a short
        # bracket can still span a long time, so the clock gap must close too
        ctol = CLOCK_RTOL * np.maximum(1.0, np.abs(T))
        ca = self._clock_in(k, a)
        cb = self._clock_in(k, b)
        act = np.ones(T.shape, dtype=bool)
        for _ in range(BISECT_MAX_ITER):
            idx = np.nonzero(act)[0]
            if idx.size == 0:
                break
            mid = 0.5 * (a[idx] + b[idx])
            stuck = (mid == a[idx]) | (mid == b[idx])
            c = self._clock_in(k[idx], mid)
            below = c < T[idx]
            a[idx[below]] = mid[below]
            ca[idx[below]] = c[below]
            b[idx[~below]] = mid[~below]
            cb[idx[~below]] = c[~below]
            closed = (b[idx] - a[idx] <= tol[idx]) & (cb[idx] - ca[idx] <= ctol[idx])
            act[idx] = ~(closed | stuck)
        return 0.5 * (a + b)


@dataclass(frozen=True, eq=False)
class FlowSpec:
    """Data of a deterministic semigroup: ``f``, measure, stop set and branch choices.

    ``phi`` maps every branch point outside the stop set to ``+1`` (leave
    upwards) or ``-1`` (leave downwards).
    """

    f: RegulatedFn
    mu: AtomlessMeasure = field(default_factory=AtomlessMeasure)
    stop_set: tuple[float, ...] = ()
    phi: Mapping[float, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "stop_set", tuple(sorted(float(s) for s in self.stop_set)))
        object.__setattr__(self, "phi", {float(k): int(v) for k, v in dict(self.phi).items()})
        self.f.require_valid()
        check_support(self.f, self.mu, self.stop_set)
        for x, v in self.phi.items():
            if v not in (-1, 1):
                raise SemanticError(f"phi[{x:g}]", "direction-sign", "must be +1 or -1")

    @cached_property
    def zeros(self) -> ZeroStructure:
        return classify(self.f)

    @cached_property
    def engine(self) -> "DeterministicFlow":
        return DeterministicFlow(self.f, self.mu, self.stop_set, self.phi)


def check_support(f: RegulatedFn, mu: AtomlessMeasure, stop_set: Sequence[float], zeros: Optional[ZeroStructure] = None):
    """Stop points must be zeros; the measure must live on the zero set."""
    for s in stop_set:
        if not math.isfinite(s) or f.eval(s) != 0.0:
            raise SemanticError(f"stop_set[{s:g}]", "stop-set-in-zeros", "stop points must be zeros of f")
    msgs = mu.check()
    if msgs:
        raise SemanticError("measure", "measure-params", "; ".join(msgs))
    if mu.is_zero:
        return
    zs = zeros if zeros is not None else classify(f)
    for comp in mu.ac:
        if not any(iv.lo <= comp.lo and comp.hi <= iv.hi for iv in zs.intervals):
            raise SemanticError("measure", "support-in-zeros", f"density on [{comp.lo:g}, {comp.hi:g}] is not inside an interval of zeros")
    for comp in mu.ifs:
        inside = any(iv.lo <= comp.lo and comp.hi <= iv.hi for iv in zs.intervals)
        same = any(
            (c.lo, c.hi, c.piece.ratio, c.piece.offsets) == (comp.lo, comp.hi, comp.ratio, comp.offsets) for c in zs.cantor
        )
        if not (inside or same):
            raise SemanticError("measure", "support-in-zeros", f"self-similar component on [{comp.lo:g}, {comp.hi:g}] is not carried by zeros of f")


class DeterministicFlow:
    """Monotone domains, clocks and the flow map for one set of data."""

    def __init__(self, f: RegulatedFn, mu: AtomlessMeasure, stop_set: Sequence[float], phi: Mapping[float, int]):
        self.f = f
        self.mu = mu
        self.stop_set = tuple(stop_set)
        self._stop = set(self.stop_set)
        self.phi = dict(phi)
        crit = set(critical_points(f).tolist()) | set(self.stop_set)
        bounds = [-math.inf] + sorted(crit) + [math.inf]
        bp = np.asarray(f.breakpoints)
        cells = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            piece = f.pieces[int(np.searchsorted(bp, _probe(a, b), side="left"))]
            sign = 0 if piece.is_null else piece.sign_on(a, b)
            left_ok = right_ok = False
            if sign != 0:
                m = _probe(a, b)
                left_ok = math.isfinite(a) and math.isfinite(piece.recip_integral(a, m, sign))
                right_ok = math.isfinite(b) and math.isfinite(piece.recip_integral(m, b, sign))
            cells.append(_Cell(a, b, piece, sign, left_ok, right_ok))
        self.cells = cells
        self.increase = self._intervals(+1)
        self.decrease = self._intervals(-1)
        self._starts = {d: [leg.lo for leg in legs] for d, legs in ((1, self.increase), (-1, self.decrease))}

    def _intervals(self, d: int) -> list[Leg]:
        runs: list[list[_Cell]] = []
        prev = None
        for cell in self.cells:
            if cell.sign != d:
                prev = None
                continue
            glued = prev is not None and cell.lo not in self._stop and prev.right_ok and cell.left_ok
            if glued:
                runs[-1].append(cell)
            else:
                runs.append([cell])
            prev = cell
        legs = []
        for run in runs:
            lo, hi = run[0].lo, run[-1].hi
            if d > 0:
                closed = math.isfinite(lo) and lo not in self._stop and run[0].left_ok
            else:
                closed = math.isfinite(hi) and hi not in self._stop and run[-1].right_ok
            legs.append(Leg(MonotoneInterval(lo, hi, d, closed), run, self.mu))
        return legs

    @property
    def domains(self) -> MonotoneDomains:
        return MonotoneDomains(tuple(l.interval for l in self.increase), tuple(l.interval for l in self.decrease))

    def _find(self, x: float, d: int) -> Optional[Leg]:
        legs = self.increase if d > 0 else self.decrease
        i = bisect.bisect_right(self._starts[d], x) - 1
        for j in (i, i - 1):
            if 0 <= j < len(legs) and legs[j].interval.contains(x):
                return legs[j]
        return None

    def legs_at(self, x: float) -> tuple[Optional[Leg], Optional[Leg]]:
        """Increase and decrease legs containing ``x`` (stop points have none)."""
        if x in self._stop:
            return None, None
        return self._find(x, +1), self._find(x, -1)

    def branch_points(self) -> tuple[float, ...]:
        """Points lying both in an interval of increase and one of decrease."""
        out = []
        for leg in self.increase:
            if leg.interval.closed_start and self._find(leg.lo, -1) is not None:
                out.append(leg.lo)
        return tuple(sorted(out))

    def leg_for(self, x0: float) -> Optional[Leg]:
        up, down = self.legs_at(x0)
        if up is not None and down is not None:
            if x0 not in self.phi:
                raise PhiMissing(f"no direction given for branch point {x0:g}")
            return up if self.phi[x0] > 0 else down
        return up if up is not None else down

    def tau(self, x0: float) -> float:
        """Time for the trajectory from ``x0`` to reach the end of its interval."""
        leg = self.leg_for(x0)
        if leg is None:
            return math.inf
        end_phi = leg.phi_bounds[-1] if leg.direction > 0 else leg.phi_bounds[0]
        return abs(end_phi - leg.clock(x0))

    def flow(self, x0, t):
        x0a, ta = np.broadcast_arrays(np.asarray(x0, dtype=float), np.asarray(t, dtype=float))
        if np.any(ta < 0):
            raise ValueError("times must be nonnegative")
        x0f = x0a.ravel()
        tf = ta.ravel()
        out = x0f.copy()
        groups: dict[int, list[int]] = {}
        legs = {}
        cache: dict[float, Optional[Leg]] = {}
        for i, x in enumerate(x0f):
            if x not in cache:
                cache[x] = self.leg_for(float(x))
            leg = cache[x]
            if leg is not None and tf[i] > 0:
                groups.setdefault(id(leg), []).append(i)
                legs[id(leg)] = leg
        for key, idx in groups.items():
            leg = legs[key]
            idx = np.asarray(idx)
            target = leg.clock(x0f[idx]) + leg.direction * tf[idx]
            y = leg.invert(target)
            # below clock resolution the inverse can land behind the start
            out[idx] = np.maximum(y, x0f[idx]) if leg.direction > 0 else np.minimum(y, x0f[idx])
        if np.ndim(x0) == 0 and np.ndim(t) == 0:
            return float(out[0])
        return out.reshape(x0a.shape)

    def time_to_reach(self, x0: float, x: float, direction: int) -> float:
        if x == x0:
            return 0.0
        up, down = self.legs_at(x0)
        leg = up if direction > 0 else down
        if leg is None:
            raise OutsideDomain(f"{x0:g} does not lie in an interval of {'increase' if direction > 0 else 'decrease'}")
        ahead = x > x0 if direction > 0 else x < x0
        if not ahead or not (leg.interval.contains(x) or x == leg.interval.end):
            raise OutsideDomain(f"{x:g} is not reachable from {x0:g} inside {leg.interval}")
        return direction * (leg.clock(x) - leg.clock(x0))

    def crossing_times(self, x0: float, t_end: float) -> np.ndarray:
        """Times in ``(0, t_end)`` at which the trajectory passes a cell boundary."""
        leg = self.leg_for(x0)
        if leg is None:
            return np.empty(0)
        c0 = leg.clock(x0)
        times = leg.direction * (leg.phi_bounds - c0)
        times = times[np.isfinite(times) & (times > 0) & (times < t_end)]
        return np.unique(times)


def _flow_spec(spec) -> DeterministicFlow:
    return spec.engine if isinstance(spec, FlowSpec) else spec


def build_domains(spec: FlowSpec) -> MonotoneDomains:
    """Maximal intervals of increase and decrease."""
    return _flow_spec(spec).domains


def time_to_reach(spec: FlowSpec, x0: float, x: float, direction: int) -> float:
    """Travel time from ``x0`` to ``x`` inside a common monotone interval."""
    return _flow_spec(spec).time_to_reach(x0, x, direction)


def flow(spec: FlowSpec, x0, t):
    """``S_t x0``; broadcasts over arrays of starting points and times."""
    return _flow_spec(spec).flow(x0, t)


def trajectory(spec: FlowSpec, x0: float, grid: Sequence[float]) -> list[tuple[float, float]]:
    grid = np.asarray(grid, dtype=float)
    xs = np.atleast_1d(flow(spec, np.full(grid.shape, x0), grid))
    return [(float(t), float(x)) for t, x in zip(grid, xs)]


def graded_nodes(a: float, b: float, order: int = 8, levels: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on a mesh refined geometrically toward both ends."""
    h = b - a
    fr = np.concatenate([[0.0], 0.5 * 2.0 ** -np.arange(levels, 0, -1), [0.5]])
    fr = np.unique(np.concatenate([fr, 1 - fr]))
    edges = a + h * fr
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def caratheodory_residual(spec: FlowSpec, x0: float, t_end: float) -> float:
    """``max |x(t) - x0 - int_0^t f(x(s)) ds|`` over the trajectory's breakpoints.

    The integral is split where the trajectory crosses a breakpoint or zero
    of ``f`` and each part uses graded Gauss-Legendre quadrature, so
    integrable singularities at the ends are resolved.
    """
    eng = _flow_spec(spec)
    cuts = np.concatenate([[0.0], eng.crossing_times(x0, t_end), [t_end]])
    integral = 0.0
    worst = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        nodes, weights = graded_nodes(a, b)
        xs = eng.flow(np.full(nodes.shape, x0), nodes)
        integral += float(np.dot(weights, eng.f.eval(xs)))
        xb = float(eng.flow(x0, b))
        worst = max(worst, abs(xb - x0 - integral))
    return worst
