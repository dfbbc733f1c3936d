"""Positive atomless measures carried by the zero set of ``f``.

Two building blocks are supported: absolutely continuous pieces with a
polynomial (or callable) density on an interval, and self-similar measures
on Cantor-type sets given by an iterated function system with weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

MEASURE_TOL = 1e-10
MAX_DEPTH = 64
UNIT_SLACK = 2.0**10

_EPS = np.finfo(float).eps
# cell positions are tracked in extended precision to resolve deep levels
_XEPS = float(np.finfo(np.longdouble).eps)


@dataclass(frozen=True)
class ACComponent:
    """Density on ``[lo, hi]``; a tuple density is a polynomial in increasing degree."""

    lo: float
    hi: float
    density: Union[tuple, Callable] = (1.0,)

    def __post_init__(self):
        if not callable(self.density):
            object.__setattr__(self, "density", tuple(float(c) for c in self.density))

    def check(self) -> list[str]:
        out = []
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            out.append("absolutely continuous component needs a finite interval lo < hi")
            return out
        xs = np.linspace(self.lo, self.hi, 257)
        if np.any(self._density(xs) < 0):
            out.append("density must be nonnegative")
        return out

    def _density(self, x):
        if callable(self.density):
            return np.asarray(self.density(x), dtype=float) * np.ones_like(x)
        return np.polynomial.polynomial.polyval(x, self.density)

    def cdf(self, x, tol=MEASURE_TOL):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        if callable(self.density):
            flat = np.atleast_1d(x)
            out = np.array([integrate.quad(self.density, self.lo, v, epsabs=tol / 4)[0] for v in flat.ravel()])
            return out.reshape(np.shape(x))
        anti = np.polynomial.polynomial.polyint(self.density)
        return np.polynomial.polynomial.polyval(x, anti) - np.polynomial.polynomial.polyval(self.lo, anti)

    def scaled(self, c: float) -> "ACComponent":
        if callable(self.density):
            d = self.density
            return ACComponent(self.lo, self.hi, lambda x: c * d(x))
        return ACComponent(self.lo, self.hi, tuple(c * v for v in self.density))


@dataclass(frozen=True)
class IFSComponent:
    """Self-similar measure of total ``mass`` on a Cantor-type set in ``[lo, hi]``.

    Each level splits a cell into ``len(offsets)`` copies scaled by ``ratio``
    placed at the normalized offsets, copy ``i`` receiving the fraction
    ``weights[i]`` of the parent mass.
    """

    lo: float
    hi: float
    ratio: float
    offsets: tuple[float, ...]
    weights: tuple[float, ...]
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def check(self) -> list[str]:
        out = []
        o = np.asarray(self.offsets)
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            out.append("self-similar component needs a finite interval lo < hi")
        if not 0 < self.ratio < 1:
            out.append("ratio must lie in (0, 1)")
        if len(o) < 2 or len(o) != len(self.weights):
            out.append("need at least two copies and one weight per copy")
            return out
        if o[0] != 0.0 or abs(o[-1] - (1 - self.ratio)) > 1e-12 or np.any(np.diff(o) < self.ratio):
            out.append("offsets must start at 0, end at 1 - ratio and not overlap")
        if any(w <= 0 for w in self.weights) or abs(sum(self.weights) - 1) > 1e-12:
            out.append("weights must be positive and sum to 1")
        if not self.mass > 0:
            out.append("mass must be positive")
        return out

    def cdf_with_error(self, x, tol=MEASURE_TOL):
        """Mass of ``(-inf, x]`` and a bound on the truncation error.

        The recursion runs on the unit-mass measure with a threshold that
        depends on ``tol`` only, so scaling ``mass`` scales every result
        exactly; the bound stays below ``tol`` for masses up to ``2**10``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).astype(float)
        o = np.asarray(self.offsets)
        w = np.asarray(self.weights)
        before = np.concatenate([[0.0], np.cumsum(w)])
        r = self.ratio
        width = self.hi - self.lo
        stop_len = 64 * _XEPS * max(abs(self.lo), abs(self.hi), width)
        out = np.where(x >= self.hi, 1.0, 0.0)
        err = np.zeros_like(x)
        c_lo = np.full(x.shape, self.lo, dtype=np.longdouble)
        L = np.full(x.shape, width, dtype=np.longdouble)
        m = np.ones_like(x)
        cut = tol / 4 / UNIT_SLACK
        act = (x > self.lo) & (x < self.hi)
        depth = 0
        while np.any(act):
            idx = np.nonzero(act)[0]
            # cells small enough in mass or length are linearly interpolated
            stop = (m[idx] <= cut) | (L[idx] < stop_len) | (depth >= MAX_DEPTH)
            if np.any(stop):
                s = idx[stop]
                frac = np.clip((x[s] - c_lo[s]) / L[s], 0.0, 1.0)
                out[s] += frac * m[s]
                err[s] = np.maximum(frac, 1 - frac) * m[s]
                act[s] = False
                idx = idx[~stop]
                if idx.size == 0:
                    break
            xi, ci, Li = x[idx], c_lo[idx], L[idx]
            starts = ci[:, None] + o[None, :] * Li[:, None]
            i = np.clip(np.sum(starts <= xi[:, None], axis=1) - 1, 0, len(o) - 1)
            in_gap = xi >= ci + (o[i] + r) * Li
            g = idx[in_gap]
            out[g] += m[g] * before[i[in_gap] + 1]
            act[g] = False
            c = idx[~in_gap]
            k = i[~in_gap]
            out[c] += m[c] * before[k]
            c_lo[c] = ci[~in_gap] + o[k] * Li[~in_gap]
            L[c] = Li[~in_gap] * r
            m[c] = m[c] * w[k]
            depth += 1
        return self.mass * out, self.mass * err

    def cdf(self, x, tol=MEASURE_TOL):
        out, _ = self.cdf_with_error(x, tol)
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])

    def scaled(self, c: float) -> "IFSComponent":
        return IFSComponent(self.lo, self.hi, self.ratio, self.offsets, self.weights, c * self.mass)


@dataclass(frozen=True)
class AtomlessMeasure:
    """Finite sum of absolutely continuous and self-similar components."""

    ac: tuple[ACComponent, ...] = ()
    ifs: tuple[IFSComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ac", tuple(self.ac))
        object.__setattr__(self, "ifs", tuple(self.ifs))

    @property
    def is_zero(self) -> bool:
        return not self.ac and not self.ifs

    def components(self):
        return self.ac + self.ifs

    def check(self) -> list[str]:
        out = []
        for comp in self.components():
            out.extend(comp.check())
        return out

    def cdf(self, x, tol: float = MEASURE_TOL):
        """``mu((-inf, x])``; vectorized, accurate to ``tol / 2``."""
        xa = np.asarray(x, dtype=float)
        total = np.zeros(np.shape(xa))
        n = max(len(self.components()), 1)
        for comp in self.components():
            total = total + comp.cdf(xa, tol / n)
        return float(total) if np.ndim(x) == 0 else total

    def mass(self, a: float, b: float, tol: float = MEASURE_TOL) -> float:
        """``mu([a, b])`` to within ``tol``; atomless, so endpoints do not matter."""
        if b < a:
            raise ValueError("need a <= b")
        if self.is_zero or a == b:
            return 0.0
        return float(self.cdf(b, tol) - self.cdf(a, tol))

    def total_mass(self) -> float:
        return self.mass(-math.inf, math.inf)

    def scaled(self, c: float) -> "AtomlessMeasure":
        return AtomlessMeasure(tuple(a.scaled(c) for a in self.ac), tuple(s.scaled(c) for s in self.ifs))


def cantor_measure(lo: float = 0.0, hi: float = 1.0, mass: float = 1.0) -> AtomlessMeasure:
    """Uniform self-similar measure on the middle-thirds Cantor set."""
    return AtomlessMeasure(ifs=(IFSComponent(lo, hi, 1 / 3, (0.0, 2 / 3), (0.5, 0.5), mass),))
