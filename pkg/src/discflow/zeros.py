"""Zero set of ``f`` and the integrability of ``1/f`` next to each zero.

A zero ``x`` is *right-integrable* when ``1/f^+`` is integrable on some
``[x, x + eps]`` (solutions can leave ``x`` upwards in finite time) and
*left-integrable* when ``1/|f^-|`` is integrable on some ``[x - eps, x]``.
Zeros that are both are branch points; zeros that are neither admit only
the constant solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .regulated import CantorGaps, RegulatedFn


@dataclass(frozen=True)
class ZeroPoint:
    x: float
    right_integrable: Optional[bool] = None
    left_integrable: Optional[bool] = None

    @property
    def is_branch(self) -> bool:
        return bool(self.right_integrable and self.left_integrable)

    @property
    def is_dead(self) -> bool:
        return self.right_integrable is False and self.left_integrable is False


@dataclass(frozen=True)
class ZeroInterval:
    """Closed interval on which ``f`` vanishes identically."""

    lo: float
    hi: float
    lo_left_integrable: Optional[bool] = None
    hi_right_integrable: Optional[bool] = None


@dataclass(frozen=True)
class CantorComponent:
    """Self-similar zero set of a :class:`CantorGaps` piece."""

    piece: CantorGaps
    lo_left_integrable: Optional[bool] = None
    hi_right_integrable: Optional[bool] = None

    @property
    def lo(self) -> float:
        return self.piece.lo

    @property
    def hi(self) -> float:
        return self.piece.hi

    @property
    def right_integrable(self) -> bool:
        # every point except hi sees the gaps on its right
        return self.piece.coeff > 0

    @property
    def left_integrable(self) -> bool:
        return self.piece.coeff < 0


@dataclass(frozen=True)
class ZeroStructure:
    points: tuple[ZeroPoint, ...] = ()
    intervals: tuple[ZeroInterval, ...] = ()
    cantor: tuple[CantorComponent, ...] = ()
    classified: bool = False

    def contains(self, x: float) -> bool:
        if any(p.x == x for p in self.points):
            return True
        if any(iv.lo <= x <= iv.hi for iv in self.intervals):
            return True
        return any(c.lo <= x <= c.hi and c.piece.value(x) == 0.0 for c in self.cantor)

    @property
    def is_countable(self) -> bool:
        return not self.intervals and not self.cantor

    def branch_points(self) -> tuple[float, ...]:
        """Zeros that are both left- and right-integrable."""
        self._need_flags()
        out = [p.x for p in self.points if p.is_branch]
        for c in self.cantor:
            if c.lo_left_integrable and c.right_integrable:
                out.append(c.lo)
            if c.hi_right_integrable and c.left_integrable:
                out.append(c.hi)
        return tuple(sorted(out))

    def dead_points(self) -> tuple[float, ...]:
        """Isolated zeros that neither side can leave in finite time."""
        self._need_flags()
        return tuple(p.x for p in self.points if p.is_dead)

    def _need_flags(self):
        if not self.classified:
            raise ValueError("zero structure is not classified; call classify first")

    def summary(self) -> list[dict]:
        rows = []
        for p in self.points:
            rows.append({"kind": "point", "lo": p.x, "hi": p.x, "right_integrable": p.right_integrable, "left_integrable": p.left_integrable})
        for iv in self.intervals:
            rows.append({"kind": "interval", "lo": iv.lo, "hi": iv.hi, "right_integrable": iv.hi_right_integrable, "left_integrable": iv.lo_left_integrable})
        for c in self.cantor:
            rows.append({"kind": "cantor", "lo": c.lo, "hi": c.hi, "right_integrable": c.right_integrable, "left_integrable": c.left_integrable})
        return sorted(rows, key=lambda r: r["lo"])


def critical_points(f: RegulatedFn) -> np.ndarray:
    """Breakpoints together with the isolated zeros of every piece."""
    pts = list(f.breakpoints)
    for i, piece in enumerate(f.pieces):
        if isinstance(piece, CantorGaps) or piece.is_null:
            continue
        lo, hi = f.piece_interval(i)
        pts.extend(piece.zeros_inside(lo, hi))
    return np.unique(np.asarray(pts, dtype=float))


def zero_set(f: RegulatedFn) -> ZeroStructure:
    """Decompose ``f^{-1}(0)`` into isolated points, intervals and Cantor sets."""
    intervals: list[list[float]] = []
    cantor = []
    points = []
    for i, piece in enumerate(f.pieces):
        lo, hi = f.piece_interval(i)
        if piece.is_null:
            if intervals and intervals[-1][1] == lo:
                intervals[-1][1] = hi
            else:
                intervals.append([lo, hi])
        elif isinstance(piece, CantorGaps):
            cantor.append(CantorComponent(piece))
        else:
            points.extend(piece.zeros_inside(lo, hi))
    covered = lambda y: any(a <= y <= b for a, b in intervals) or any(c.lo <= y <= c.hi for c in cantor)
    for y, v in zip(f.breakpoints, f.values):
        if v == 0.0 and not covered(y):
            points.append(y)
    return ZeroStructure(
        tuple(ZeroPoint(x) for x in sorted(set(points))),
        tuple(ZeroInterval(a, b) for a, b in intervals),
        tuple(cantor),
    )


def _probe_width(crit: np.ndarray, x: float, side: int) -> float:
    # stay strictly before the next critical point so only x itself is probed
    if side > 0:
        nxt = crit[crit > x]
        gap = nxt[0] - x if nxt.size else math.inf
    else:
        prv = crit[crit < x]
        gap = x - prv[-1] if prv.size else math.inf
    return min(0.5 * gap, 1.0)


def right_integrable(f: RegulatedFn, x: float, crit: Optional[np.ndarray] = None) -> bool:
    if crit is None:
        crit = critical_points(f)
    eps = _probe_width(crit, x, +1)
    return math.isfinite(f.reciprocal_integral(x, x + eps, "plus"))


def left_integrable(f: RegulatedFn, x: float, crit: Optional[np.ndarray] = None) -> bool:
    if crit is None:
        crit = critical_points(f)
    eps = _probe_width(crit, x, -1)
    return math.isfinite(f.reciprocal_integral(x - eps, x, "minus"))


def classify(f: RegulatedFn, zs: Optional[ZeroStructure] = None) -> ZeroStructure:
    """Fill in the integrability flags of every zero component."""
    if zs is None:
        zs = zero_set(f)
    crit = critical_points(f)
    points = tuple(
        ZeroPoint(p.x, right_integrable(f, p.x, crit), left_integrable(f, p.x, crit)) for p in zs.points
    )
    intervals = tuple(
        ZeroInterval(
            iv.lo,
            iv.hi,
            math.isfinite(iv.lo) and left_integrable(f, iv.lo, crit),
            math.isfinite(iv.hi) and right_integrable(f, iv.hi, crit),
        )
        for iv in zs.intervals
    )
    cantor = tuple(
        replace(c, lo_left_integrable=left_integrable(f, c.lo, crit), hi_right_integrable=right_integrable(f, c.hi, crit))
        for c in zs.cantor
    )
    return ZeroStructure(points, intervals, cantor, True)
