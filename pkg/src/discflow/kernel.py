"""Transition kernels of the Markov semigroups with random waiting at zeros.

A trajectory moves along the deterministic clock but is held at each
waiting point ``y_j`` it meets for an independent exponential time of rate
``lambda_j``; at a branch point it leaves upwards with probability
``theta``.  Along one direction the position after time ``t`` is at or
below the point of elapsed clock ``w`` exactly when the total waiting
collected on ``[x0, y]`` exceeds ``t - w``, so every probability reduces to
survival functions of sums of exponentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import SemanticError, ThetaMissing
from .flow import FlowSpec, Leg, check_support
from .measure import AtomlessMeasure
from .regulated import RegulatedFn

GRID_TOL = 1e-3
_POISSON_SPAN = 12.0


def _uniformized(rates: np.ndarray, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Survival and last-phase occupation of the jump chain after n steps."""
    lam = float(np.max(rates))
    k = len(rates)
    stay = 1.0 - rates / lam
    move = rates / lam
    pi = np.zeros(k)
    pi[0] = 1.0
    alive = np.empty(n_max + 1)
    last = np.empty(n_max + 1)
    for n in range(n_max + 1):
        alive[n] = pi.sum()
        last[n] = pi[-1]
        nxt = pi * stay
        nxt[1:] += pi[:-1] * move[:-1]
        pi = nxt
        if alive[n] < 1e-300:
            alive[n + 1 :] = 0.0
            last[n + 1 :] = 0.0
            break
    return alive, last


def _hypoexp(rates, u, want_pdf: bool):
    rates = np.asarray(rates, dtype=float)
    ua = np.atleast_1d(np.asarray(u, dtype=float)).astype(float)
    out = np.zeros(ua.shape)
    k = len(rates)
    if k == 0:
        if not want_pdf:
            out = (ua <= 0).astype(float)
        return out
    if np.any(rates <= 0):
        raise ValueError("rates must be positive")
    pos = ua > 0
    if not want_pdf:
        out[~pos] = 1.0
    if not np.any(pos):
        return out
    v = ua[pos]
    if k == 1:
        lam = rates[0]
        out[pos] = lam * np.exp(-lam * v) if want_pdf else np.exp(-lam * v)
        return out
    # uniformization: every term is nonnegative, so repeated or nearly equal
    # rates cause no cancellation
    lam = float(np.max(rates))
    mean = lam * v
    top = int(np.ceil(np.max(mean) + _POISSON_SPAN * np.sqrt(np.max(mean)) + 40))
    alive, last = _uniformized(rates, top)
    coef = last * rates[-1] if want_pdf else alive
    res = np.empty(v.shape)
    if top * v.size <= 4_000_000:
        n = np.arange(top + 1)
        res = stats.poisson.pmf(n[None, :], mean[:, None]) @ coef
    else:
        for i, m in enumerate(mean):
            lo = max(0, int(m - _POISSON_SPAN * math.sqrt(m) - 40))
            hi = min(top, int(m + _POISSON_SPAN * math.sqrt(m) + 40))
            n = np.arange(lo, hi + 1)
            res[i] = stats.poisson.pmf(n, m) @ coef[lo : hi + 1]
    out[pos] = res
    return out


def hypoexp_sf(rates: Sequence[float], u):
    """``P{Y_1 + ... + Y_k > u}`` for independent exponentials with the given rates.

    With no rates the sum is zero, so the result is ``1`` for ``u <= 0`` and
    ``0`` otherwise.
    """
    out = _hypoexp(rates, u, False)
    return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))


def hypoexp_pdf(rates: Sequence[float], u):
    """Density of the same sum (requires at least one rate)."""
    out = _hypoexp(rates, u, True)
    return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))


def _sf(rates: np.ndarray, v: np.ndarray, left: bool) -> np.ndarray:
    if len(rates) == 0:
        # right limit in v of the indicator {v <= 0}
        return (v < 0).astype(float) if left else (v <= 0).astype(float)
    return _hypoexp(rates, v, False)


@dataclass(frozen=True, eq=False)
class MarkovSpec:
    """Data of a Markov semigroup: waiting rates at zeros and branching odds.

    ``waiting`` maps points of ``f^{-1}(0)`` to positive rates and ``theta``
    maps each branch point outside the stop set to the probability of
    leaving upwards.
    """

    f: RegulatedFn
    mu: AtomlessMeasure = field(default_factory=AtomlessMeasure)
    stop_set: tuple[float, ...] = ()
    waiting: Mapping[float, float] = field(default_factory=dict)
    theta: Mapping[float, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "stop_set", tuple(sorted(float(s) for s in self.stop_set)))
        object.__setattr__(self, "waiting", {float(k): float(v) for k, v in sorted(dict(self.waiting).items())})
        object.__setattr__(self, "theta", {float(k): float(v) for k, v in sorted(dict(self.theta).items())})
        self.f.require_valid()
        check_support(self.f, self.mu, self.stop_set)
        for y, lam in self.waiting.items():
            if not (math.isfinite(y) and self.f.eval(y) == 0.0):
                raise SemanticError(f"waiting[{y:g}]", "waiting-in-zeros", "waiting points must be zeros of f")
            if not (lam > 0 and math.isfinite(lam)):
                raise SemanticError(f"waiting[{y:g}]", "positive-rate", "rates must be positive and finite")
            if y in self.stop_set:
                raise SemanticError(f"waiting[{y:g}]", "waiting-outside-stop-set", "a point cannot both stop and wait")
        for x, th in self.theta.items():
            if not 0.0 <= th <= 1.0:
                raise SemanticError(f"theta[{x:g}]", "probability", "must lie in [0, 1]")

    @cached_property
    def base(self) -> FlowSpec:
        return FlowSpec(self.f, self.mu, self.stop_set)

    @cached_property
    def engine(self) -> "MarkovEngine":
        return MarkovEngine(self)

    def with_rates(self, scale: float) -> "MarkovSpec":
        return MarkovSpec(self.f, self.mu, self.stop_set, {y: scale * r for y, r in self.waiting.items()}, self.theta)

    def stopping(self) -> "MarkovSpec":
        """Same data with every waiting point turned into a stop point."""
        stops = tuple(self.stop_set) + tuple(self.waiting)
        return MarkovSpec(self.f, self.mu, stops, {}, {x: th for x, th in self.theta.items() if x not in self.waiting})

    def moving(self) -> "MarkovSpec":
        """Same data with the waiting points removed."""
        return MarkovSpec(self.f, self.mu, self.stop_set, {}, self.theta)


@dataclass(frozen=True)
class LegWaits:
    """Waiting points of one leg ordered along the direction of motion."""

    leg: Leg
    dclock: np.ndarray
    x: np.ndarray
    rates: np.ndarray
    dend: float

    @property
    def direction(self) -> int:
        return self.leg.direction

    @property
    def end(self) -> float:
        return self.leg.interval.end

    def dpos(self, x) -> np.ndarray:
        """Clock coordinate increasing along the motion; +-inf outside the leg."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        d = self.direction
        lo, hi = self.leg.lo, self.leg.hi
        inside = (xa >= lo) & (xa <= hi)
        out = np.empty(xa.shape)
        if np.any(inside):
            out[inside] = d * self.leg.clock(xa[inside])
        out[xa > hi] = math.inf if d > 0 else -math.inf
        out[xa < lo] = -math.inf if d > 0 else math.inf
        if self.dclock.size:
            # below clock resolution a point next to a waiting point can share
            # its clock value; keep the order of the two in space
            j = np.clip(np.searchsorted(self.dclock, out), 0, self.dclock.size - 1)
            tie = out == self.dclock[j]
            ahead = tie & (d * (xa - self.x[j]) > 0)
            behind = tie & (d * (xa - self.x[j]) < 0)
            out[ahead] = np.nextafter(out[ahead], math.inf)
            out[behind] = np.nextafter(out[behind], -math.inf)
        return out

    def dcdf(self, s0, p, t: float, left: bool = False) -> np.ndarray:
        """``P(position <=_d p)`` (or ``<_d``) for starts at clock coordinates ``s0``."""
        s0, p = np.broadcast_arrays(np.asarray(s0, dtype=float), np.asarray(p, dtype=float))
        s0 = s0.ravel()
        p = p.ravel()
        out = np.zeros(p.shape)
        with np.errstate(invalid="ignore"):
            w = p - s0
            E = self.dend - s0
        before = (w <= 0) if left else (w < 0)
        past = (p > self.dend) | ((p == self.dend) & (not left)) | (np.isinf(p) & (p > 0))
        out[past & ~before] = 1.0
        todo = ~(before | past)
        if not np.any(todo):
            return out
        idx = np.nonzero(todo)[0]
        # at the end (left limit) the waits strictly before it count
        at_end = p[idx] >= self.dend
        j0 = np.searchsorted(self.dclock, s0[idx], side="left")
        j1 = np.searchsorted(self.dclock, np.minimum(p[idx], self.dend), side="left" if left else "right")
        j1 = np.where(at_end, np.searchsorted(self.dclock, self.dend, side="left"), j1)
        v = t - np.where(at_end, E[idx], w[idx])
        keys = j0 * (len(self.dclock) + 1) + j1
        for key in np.unique(keys):
            m = keys == key
            a, b = divmod(int(key), len(self.dclock) + 1)
            rates = self.rates[a:b] if b > a else self.rates[:0]
            out[idx[m]] = _sf(rates, v[m], left)
        return out


class MarkovEngine:
    def __init__(self, spec: MarkovSpec):
        self.spec = spec
        self.flow = spec.base.engine
        self._waits: dict[int, LegWaits] = {}

    def waits(self, leg: Leg) -> LegWaits:
        key = id(leg)
        if key not in self._waits:
            d = leg.direction
            pts = [(y, r) for y, r in self.spec.waiting.items() if leg.interval.contains(y)]
            xs = np.array([y for y, _ in pts], dtype=float)
            rates = np.array([r for _, r in pts], dtype=float)
            dc = d * leg.clock(xs) if xs.size else np.empty(0)
            order = np.argsort(dc, kind="stable")
            dend = leg.phi_bounds[-1] if d > 0 else -leg.phi_bounds[0]
            self._waits[key] = LegWaits(leg, dc[order], xs[order], rates[order], float(dend))
        return self._waits[key]

    def branches_at(self, x0: float) -> list[tuple[float, LegWaits]]:
        """``(weight, leg)`` pairs describing how a trajectory leaves ``x0``."""
        up, down = self.flow.legs_at(x0)
        if up is not None and down is not None:
            if x0 not in self.spec.theta:
                raise ThetaMissing(f"no branching probability for {x0:g}")
            th = self.spec.theta[x0]
            out = []
            if th > 0:
                out.append((th, self.waits(up)))
            if th < 1:
                out.append((1.0 - th, self.waits(down)))
            return out
        leg = up if up is not None else down
        return [] if leg is None else [(1.0, self.waits(leg))]


@dataclass
class Branch:
    """Law of the position after time ``t`` when leaving ``x0`` along one leg."""

    weight: float
    lw: LegWaits
    x0: float
    t: float

    def __post_init__(self):
        self.s0 = float(self.lw.dpos(self.x0)[0])
        ahead = self.lw.dclock >= self.s0
        self.wait_w = self.lw.dclock[ahead] - self.s0
        self.wait_x = self.lw.x[ahead]
        self.wait_rates = self.lw.rates[ahead]
        self.tau = self.lw.dend - self.s0

    @property
    def direction(self) -> int:
        return self.lw.direction

    def elapsed_cdf(self, w, left=False) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        p = self.s0 + w
        # s0 + (c - s0) need not round back to c, so snap the waits and the end
        p[w == self.tau] = self.lw.dend
        j = np.searchsorted(self.wait_w, w)
        hit = j < self.wait_w.size
        hit[hit] = self.wait_w[j[hit]] == w[hit]
        p[hit] = self.lw.dclock[self.lw.dclock.size - self.wait_w.size + j[hit]]
        return self.lw.dcdf(self.s0, p, self.t, left)

    def position(self, w) -> np.ndarray:
        """Point reached after elapsed clock ``w`` without waiting."""
        d = self.direction
        return np.atleast_1d(self.lw.leg.invert(d * (self.s0 + np.asarray(w, dtype=float))))

    def cdf(self, x, left=False) -> np.ndarray:
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.lw.dpos(xa)
        if self.t < self.tau and not np.any(self.wait_w <= self.t):
            # the clock does not round-trip exactly through the inverse, so
            # pin the deterministic front to its exact clock coordinate
            p[xa == self.position(self.t)[0]] = self.s0 + self.t
        if self.direction > 0:
            return self.lw.dcdf(self.s0, p, self.t, left)
        return 1.0 - self.lw.dcdf(self.s0, p, self.t, not left)

    def atoms(self) -> list[tuple[float, float]]:
        t, tau = self.t, self.tau
        out = []
        reached = self.wait_w <= min(t, tau)
        for w, x in zip(self.wait_w[reached], self.wait_x[reached]):
            m = float(self.elapsed_cdf(w)[0] - self.elapsed_cdf(w, left=True)[0])
            if m > 0:
                out.append((float(x), m))
        if not np.any(reached) and t < tau:
            out.append((float(self.position(t)[0]), 1.0))
        if math.isfinite(tau):
            m = 1.0 - float(self.elapsed_cdf(tau, left=True)[0])
            if m > 0:
                out.append((float(self.lw.end), m))
        return out

    def segments(self) -> list[tuple[float, float, np.ndarray]]:
        """Elapsed-clock intervals carrying density, with the rates in force."""
        top = min(self.t, self.tau)
        ws = self.wait_w[self.wait_w <= top]
        out = []
        for j, w in enumerate(ws):
            nxt = ws[j + 1] if j + 1 < len(ws) else top
            if nxt > w:
                out.append((float(w), float(nxt), self.wait_rates[: j + 1]))
        return out

    def density(self, w, rates) -> np.ndarray:
        return hypoexp_pdf(rates, self.t - np.asarray(w, dtype=float))

    def segment_mass(self, a, b, rates) -> np.ndarray:
        return _hypoexp(rates, self.t - np.asarray(b, dtype=float), False) - _hypoexp(rates, self.t - np.asarray(a, dtype=float), False)

    def grid(self, grid_tol: float) -> list[np.ndarray]:
        """Elapsed-clock nodes refined until each cell carries at most ``grid_tol``."""
        nodes = []
        for a, b, rates in self.segments():
            pts = list(np.linspace(a, b, 9))
            stack = list(zip(pts[:-1], pts[1:]))
            keep = {a, b}
            while stack:
                lo, hi = stack.pop()
                keep.update((lo, hi))
                mass = float(self.segment_mass(lo, hi, rates)[0]) * self.weight
                if mass > grid_tol and hi - lo > 1e-14 * max(1.0, abs(hi)):
                    mid = 0.5 * (lo + hi)
                    stack.extend([(lo, mid), (mid, hi)])
            nodes.append(np.array(sorted(keep)))
        return nodes


class TransitionKernel:
    """Probability law of ``X(t)`` started from ``x0``.

    Exact evaluation goes through the branch laws; ``grid_x`` and
    ``grid_cdf`` give the absolutely continuous part on an adaptive grid,
    and atoms are listed separately.  Empirical kernels built from samples
    are purely atomic.
    """

    def __init__(self, branches: Sequence[Branch] = (), atoms: Sequence[tuple[float, float]] = (), samples=None, grid_tol: float = GRID_TOL):
        self.branches = tuple(branches)
        self.grid_tol = grid_tol
        self.samples = None if samples is None else np.sort(np.asarray(samples, dtype=float))
        if self.samples is not None:
            xs, counts = np.unique(self.samples, return_counts=True)
            self.atom_x, self.atom_mass = xs, counts / self.samples.size
            return
        merged: dict[float, float] = {}
        for x, m in atoms:
            merged[x] = merged.get(x, 0.0) + m
        for b in self.branches:
            for x, m in b.atoms():
                merged[x] = merged.get(x, 0.0) + b.weight * m
        xs = sorted(merged)
        self.atom_x = np.array(xs, dtype=float)
        self.atom_mass = np.array([merged[x] for x in xs], dtype=float)

    @classmethod
    def dirac(cls, x: float) -> "TransitionKernel":
        return cls(atoms=[(float(x), 1.0)])

    @classmethod
    def empirical(cls, samples) -> "TransitionKernel":
        return cls(samples=samples)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(m)) for x, m in zip(self.atom_x, self.atom_mass)]

    def _atom_cdf(self, x, left):
        side = "left" if left else "right"
        cum = np.concatenate([[0.0], np.cumsum(self.atom_mass)])
        return cum[np.searchsorted(self.atom_x, x, side=side)]

    def cdf(self, x, left: bool = False):
        """``P(X <= x)``, or ``P(X < x)`` with ``left=True``."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        if self.samples is not None or not self.branches:
            out = self._atom_cdf(xa, left)
        else:
            out = np.zeros(xa.shape)
            for b in self.branches:
                out += b.weight * b.cdf(xa, left)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def prob(self, a: float, b: float, closed: tuple[bool, bool] = (True, True)) -> float:
        """Probability of the interval from ``a`` to ``b`` with the given closedness."""
        if b < a:
            return 0.0
        hi = self.cdf(b, left=not closed[1])
        lo = self.cdf(a, left=closed[0])
        return max(0.0, float(hi - lo))

    def total_mass(self) -> float:
        return float(np.sum(self.atom_mass) + self.smooth_mass())

    def smooth_mass(self) -> float:
        return float(sum(b.weight * float(np.sum([b.segment_mass(a, c, r)[0] for a, c, r in b.segments()])) for b in self.branches))

    @cached_property
    def _grid(self) -> tuple[np.ndarray, np.ndarray]:
        xs = [np.empty(0)]
        for b in self.branches:
            for nodes in b.grid(self.grid_tol):
                xs.append(b.position(nodes))
        x = np.unique(np.concatenate(xs))
        if x.size == 0:
            return x, x
        smooth = self.cdf(x) - self._atom_cdf(x, False)
        return x, np.maximum.accumulate(np.clip(smooth, 0.0, None))

    @property
    def grid_x(self) -> np.ndarray:
        return self._grid[0]

    @property
    def grid_cdf(self) -> np.ndarray:
        """Absolutely continuous mass of ``(-inf, x]`` at each grid point."""
        return self._grid[1]

    @property
    def support(self) -> tuple[float, float]:
        pts = np.concatenate([self.atom_x, self.grid_x])
        return float(pts.min()), float(pts.max())

    def mean(self) -> float:
        if self.samples is not None:
            return float(self.samples.mean())
        x, F = self.grid_x, self.grid_cdf
        smooth = float(np.sum(0.5 * (x[1:] + x[:-1]) * np.diff(F))) if x.size > 1 else 0.0
        return float(np.dot(self.atom_x, self.atom_mass)) + smooth


def wasserstein1(k1: TransitionKernel, k2: TransitionKernel) -> float:
    """``int |F_1 - F_2| dx`` by trapezoidal integration over the union of nodes."""
    x = np.unique(np.concatenate([k1.atom_x, k1.grid_x, k2.atom_x, k2.grid_x]))
    if x.size < 2:
        return 0.0
    right = np.abs(k1.cdf(x) - k2.cdf(x))
    left = np.abs(k1.cdf(x, left=True) - k2.cdf(x, left=True))
    # on each cell the CDFs run from their right value at x_i to their left value at x_{i+1}
    return float(np.sum(0.5 * (right[:-1] + left[1:]) * np.diff(x)))


def ks_distance(empirical: TransitionKernel, exact: TransitionKernel) -> float:
    """``sup_x |F_n(x) - F(x)|`` checked on both sides of every jump."""
    x = np.unique(np.concatenate([empirical.atom_x, exact.atom_x]))
    d_right = np.abs(empirical.cdf(x) - exact.cdf(x))
    d_left = np.abs(empirical.cdf(x, left=True) - exact.cdf(x, left=True))
    return float(max(d_right.max(), d_left.max()))


def kernel(spec: MarkovSpec, x0: float, t: float, grid_tol: float = GRID_TOL) -> TransitionKernel:
    """Transition law ``P_t(x0, .)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x0 = float(x0)
    if t == 0:
        return TransitionKernel.dirac(x0)
    parts = spec.engine.branches_at(x0)
    if not parts:
        return TransitionKernel.dirac(x0)
    return TransitionKernel([Branch(w, lw, x0, float(t)) for w, lw in parts], grid_tol=grid_tol)


def kernel_cdf(spec: MarkovSpec, x0: float, t: float, x: float) -> float:
    """``P{X(t) <= x}`` for a trajectory started at ``x0``."""
    return kernel(spec, x0, t).cdf(x)


def transition_prob(spec: MarkovSpec, z, t: float, a: float, b: float, closed: tuple[bool, bool] = (True, True)) -> np.ndarray:
    """``P_t(z, I)`` for many starting points ``z`` and one interval ``I``."""
    za = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.zeros(za.shape)
    if t == 0:
        inside = ((za > a) | ((za == a) & closed[0])) & ((za < b) | ((za == b) & closed[1]))
        return inside.astype(float)
    eng = spec.engine
    groups: dict[int, tuple[LegWaits, list, list]] = {}
    for i, zi in enumerate(za):
        parts = eng.branches_at(float(zi))
        if not parts:
            out[i] = float(((zi > a) or (zi == a and closed[0])) and ((zi < b) or (zi == b and closed[1])))
            continue
        for w, lw in parts:
            g = groups.setdefault(id(lw), (lw, [], []))
            g[1].append(i)
            g[2].append(w)
    for lw, idx, weights in groups.values():
        idx = np.asarray(idx)
        s0 = lw.dpos(za[idx])
        pa, pb = lw.dpos(a)[0], lw.dpos(b)[0]
        if lw.direction > 0:
            hi = lw.dcdf(s0, pb, t, left=not closed[1])
            lo = lw.dcdf(s0, pa, t, left=closed[0])
        else:
            # in the order of motion a is the far end and b the near one
            hi = lw.dcdf(s0, pa, t, left=not closed[0])
            lo = lw.dcdf(s0, pb, t, left=closed[1])
        np.add.at(out, idx, np.asarray(weights) * np.maximum(hi - lo, 0.0))
    return out
