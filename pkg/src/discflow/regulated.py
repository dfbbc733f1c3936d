"""Bounded piecewise-defined right-hand sides with one-sided limits everywhere.

A :class:`RegulatedFn` is described by a strictly increasing list of
breakpoints, one analytic piece per open gap between them and an explicit
value at every breakpoint.  Besides evaluating themselves, pieces locate
their zeros and integrate ``1/f`` over subintervals, the quantity every
travel time in the package is built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import InvalidFunction, QuadratureNonConvergence, UnresolvedZero

MAX_BREAKPOINTS = 1024
QUAD_TOL = 1e-10
DIVERGENCE_CAP = 1e6

_EPS = np.finfo(float).eps
# cell positions are tracked in extended precision to resolve deep levels
_XEPS = float(np.finfo(np.longdouble).eps)


def _as_array(x):
    return np.asarray(x, dtype=float)


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


class Piece:
    """Analytic expression of ``f`` on one open gap between breakpoints."""

    form = "piece"
    serializable = True

    @property
    def is_null(self) -> bool:
        return False

    def value(self, x):
        raise NotImplementedError

    def zeros_inside(self, lo: float, hi: float) -> list[float]:
        return []

    def sign_on(self, lo: float, hi: float) -> int:
        """Sign of the piece on a zero-free open interval ``(lo, hi)``."""
        if self.is_null:
            return 0
        if math.isfinite(lo) and math.isfinite(hi):
            probe = 0.5 * (lo + hi)
        elif math.isfinite(lo):
            probe = lo + 1.0
        elif math.isfinite(hi):
            probe = hi - 1.0
        else:
            probe = 0.0
        v = float(self.value(probe))
        return int(np.sign(v))

    def recip_integral(self, a: float, b: float, sign: int) -> float:
        raise NotImplementedError

    def recip_cumulative(self, a: float, xs, sign: int) -> np.ndarray:
        """Signed ``int_a^x dy / (sign f(y))`` for points of a zero-free cell."""
        xs = _as_array(xs)
        out = np.empty_like(xs)
        for k, x in np.ndenumerate(xs):
            if x >= a:
                out[k] = self.recip_integral(a, float(x), sign)
            else:
                out[k] = -self.recip_integral(float(x), a, sign)
        return out

    def params(self) -> dict:
        raise NotImplementedError

    def check(self, lo: float, hi: float) -> list[str]:
        return []


@dataclass(frozen=True)
class Constant(Piece):
    c: float

    form = "constant"

    @property
    def is_null(self) -> bool:
        return self.c == 0.0

    def value(self, x):
        x = _as_array(x)
        return _scalar_or_array(x, np.full_like(x, self.c))

    def sign_on(self, lo, hi):
        return int(np.sign(self.c))

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if sign * self.c <= 0 or not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        return (b - a) / abs(self.c)

    def recip_cumulative(self, a, xs, sign):
        return (_as_array(xs) - a) / abs(self.c)

    def params(self):
        return {"c": self.c}


@dataclass(frozen=True)
class Affine(Piece):
    """``f(x) = slope * x + intercept``."""

    slope: float
    intercept: float

    form = "affine"

    @property
    def is_null(self) -> bool:
        return self.slope == 0.0 and self.intercept == 0.0

    @property
    def root(self) -> Optional[float]:
        if self.slope == 0.0:
            return None
        return -self.intercept / self.slope

    def value(self, x):
        x = _as_array(x)
        return _scalar_or_array(x, self.slope * x + self.intercept)

    def zeros_inside(self, lo, hi):
        r = self.root
        return [r] if r is not None and lo < r < hi else []

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        if self.slope == 0.0:
            return Constant(self.intercept).recip_integral(a, b, sign)
        r = self.root
        if a <= r <= b:
            return math.inf
        if sign * float(self.value(0.5 * (a + b))) <= 0:
            return math.inf
        fa, fb = abs(float(self.value(a))), abs(float(self.value(b)))
        return abs(math.log(fb / fa) / self.slope)

    def recip_cumulative(self, a, xs, sign):
        if self.slope == 0.0:
            return Constant(self.intercept).recip_cumulative(a, xs, sign)
        xs = _as_array(xs)
        fa = abs(float(self.value(a)))
        with np.errstate(divide="ignore"):
            return sign * (np.log(np.abs(self.slope * xs + self.intercept)) - math.log(fa)) / self.slope

    def params(self):
        return {"slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class PowerLaw(Piece):
    """``f(x) = sign * coeff * |x - anchor| ** exponent``."""

    anchor: float
    coeff: float
    exponent: float
    sign: int = 1

    form = "power_law"

    @property
    def k(self) -> float:
        return self.sign * self.coeff

    @property
    def is_null(self) -> bool:
        return self.k == 0.0

    def value(self, x):
        x = _as_array(x)
        return _scalar_or_array(x, self.k * np.abs(x - self.anchor) ** self.exponent)

    def zeros_inside(self, lo, hi):
        return [self.anchor] if lo < self.anchor < hi and not self.is_null else []

    def sign_on(self, lo, hi):
        return int(np.sign(self.k))

    def _primitive(self, x):
        # antiderivative of 1/|f| on either side of the anchor
        d = np.asarray(x, dtype=float) - self.anchor
        p = self.exponent
        c = abs(self.k)
        if p == 1.0:
            with np.errstate(divide="ignore"):
                return np.sign(d) * np.log(np.abs(d)) / c
        return np.sign(d) * np.abs(d) ** (1.0 - p) / (c * (1.0 - p))

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if sign * self.k <= 0 or not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        if a <= self.anchor <= b and self.exponent >= 1.0:
            return math.inf
        return float(self._primitive(b) - self._primitive(a))

    def recip_cumulative(self, a, xs, sign):
        return self._primitive(xs) - self._primitive(a)

    def params(self):
        return {"anchor": self.anchor, "coeff": self.coeff, "exponent": self.exponent, "sign": self.sign}

    def check(self, lo, hi):
        out = []
        if not self.exponent > 0:
            out.append("power_law exponent must be positive")
        if self.sign not in (-1, 1):
            out.append("power_law sign must be +1 or -1")
        return out


@dataclass(frozen=True)
class Polynomial(Piece):
    """Polynomial with coefficients in increasing degree order."""

    coeffs: tuple[float, ...]

    form = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        c = np.trim_zeros(np.array(self.coeffs), "b")
        roots = np.polynomial.polynomial.polyroots(c) if c.size > 1 else np.array([])
        object.__setattr__(self, "_roots", np.atleast_1d(roots).astype(complex))
        # partial fractions need simple roots
        simple = roots.size == 0 or min(
            (abs(r - q) for i, r in enumerate(self._roots) for q in self._roots[i + 1 :]), default=math.inf
        ) > 1e-6 * max(1.0, float(np.max(np.abs(self._roots))))
        dc = np.polynomial.polynomial.polyder(c) if c.size > 1 else np.array([0.0])
        resid = 1.0 / np.polynomial.polynomial.polyval(self._roots, dc) if simple and roots.size else None
        object.__setattr__(self, "_resid", resid)

    @property
    def is_null(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def value(self, x):
        x = _as_array(x)
        return _scalar_or_array(x, np.polynomial.polynomial.polyval(x, self.coeffs))

    def zeros_inside(self, lo, hi):
        if self.is_null:
            return []
        r = self._roots
        real = sorted({float(z.real) for z in r if abs(z.imag) <= 1e-12 * max(1.0, abs(z))})
        return [z for z in real if lo < z < hi]

    def _primitive_gap(self, a, b):
        """``int_a^b dy / p(y)`` by partial fractions (no root on the segment)."""
        if self._resid is None:
            return integrate.quad(lambda y: 1.0 / float(self.value(y)), a, b, epsabs=QUAD_TOL * 1e-3, limit=200)[0]
        if self._roots.size == 0:
            return (b - a) / self.coeffs[0]
        # the segment misses every root, so the principal log of the ratio
        # tracks the swept angle exactly
        return float(np.sum(self._resid * np.log((b - self._roots) / (a - self._roots))).real)

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        if any(a <= r <= b for r in self.zeros_inside(-math.inf, math.inf)):
            return math.inf
        if sign * float(self.value(0.5 * (a + b))) <= 0:
            return math.inf
        return abs(self._primitive_gap(a, b))

    def recip_cumulative(self, a, xs, sign):
        xs = _as_array(xs)
        if self._resid is None or self._roots.size == 0 or not math.isfinite(a) or not np.all(np.isfinite(xs)):
            return super().recip_cumulative(a, xs, sign)
        lo, hi = min(a, float(np.min(xs, initial=a))), max(a, float(np.max(xs, initial=a)))
        if self.zeros_inside(lo, hi) or any(z in (lo, hi) for z in self.zeros_inside(-math.inf, math.inf)):
            return super().recip_cumulative(a, xs, sign)
        r = self._roots
        logs = np.log((xs.reshape(-1, 1) - r) / (a - r))
        # 1/|p| = sign/p off the roots
        return (sign * (logs @ self._resid).real).reshape(xs.shape)

    def params(self):
        return {"coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Custom(Piece):
    """User-supplied continuous expression.

    ``zeros`` lists the interior zeros as ``(location, exponent)`` pairs,
    where ``exponent`` describes the local behaviour ``|f| ~ |x - z|**exponent``
    (``None`` if unknown).  ``edge_exponents`` does the same for zeros sitting
    on the piece's own endpoints.  Passing ``zeros=None`` asks for the
    absence of interior zeros to be certified by sampling.
    """

    func: Callable
    antiderivative: Optional[Callable] = None
    zeros: Optional[tuple] = ()
    edge_exponents: tuple = (None, None)
    name: str = "custom"

    form = "custom"
    serializable = False

    def value(self, x):
        x = _as_array(x)
        return _scalar_or_array(x, np.asarray(self.func(x), dtype=float) * np.ones_like(x))

    def _declared(self):
        return {float(z): e for z, e in (self.zeros or ())}

    def zeros_inside(self, lo, hi):
        if self.zeros is None:
            a = lo if math.isfinite(lo) else (hi - 1e3 if math.isfinite(hi) else -1e3)
            b = hi if math.isfinite(hi) else a + 1e3
            xs = np.linspace(a, b, 4099)[1:-1]
            v = self.value(xs)
            scale = float(np.max(np.abs(v))) if v.size else 0.0
            if scale == 0.0:
                raise UnresolvedZero(f"custom piece {self.name} vanishes on ({lo}, {hi})")
            if np.any(np.sign(v[:-1]) != np.sign(v[1:])) or np.min(np.abs(v)) < 1e-9 * scale:
                raise UnresolvedZero(f"custom piece {self.name} may vanish inside ({lo}, {hi})")
            return []
        return sorted(z for z in self._declared() if lo < z < hi)

    def _exponent_at(self, z, lo_edge, hi_edge):
        d = self._declared()
        if z in d:
            return d[z]
        if z == lo_edge:
            return self.edge_exponents[0]
        if z == hi_edge:
            return self.edge_exponents[1]
        return None

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if not (math.isfinite(a) and math.isfinite(b)):
            return math.inf
        cuts = [a] + [z for z in sorted(self._declared()) if a < z < b] + [b]
        total = 0.0
        for c, d in zip(cuts[:-1], cuts[1:]):
            total += self._segment(c, d, sign, a, b)
            if math.isinf(total):
                return math.inf
        return total

    def _segment(self, c, d, sign, lo_edge, hi_edge):
        mid = 0.5 * (c + d)
        if sign * float(self.value(mid)) <= 0:
            return math.inf
        if self.antiderivative is not None:
            val = abs(float(self.antiderivative(d)) - float(self.antiderivative(c)))
            return val if math.isfinite(val) else math.inf
        declared = self._declared()
        sing_c = float(self.value(c)) == 0.0 or c in declared
        sing_d = float(self.value(d)) == 0.0 or d in declared
        if sing_c and sing_d:
            return self._segment(c, mid, sign, lo_edge, hi_edge) + self._segment(mid, d, sign, lo_edge, hi_edge)
        g = lambda y: 1.0 / abs(float(self.value(y)))
        if not sing_c and not sing_d:
            val, _ = integrate.quad(g, c, d, epsabs=QUAD_TOL, limit=200)
            return val
        z, far = (c, d) if sing_c else (d, c)
        alpha = self._exponent_at(z, lo_edge, hi_edge)
        if alpha is not None:
            if alpha >= 1.0:
                return math.inf
            return _substituted_quad(g, z, far, alpha)
        return _probe_divergence(g, z, far)

    def params(self):
        raise TypeError("custom pieces cannot be serialized")


def _substituted_quad(g, z, far, alpha):
    """Integrate ``g`` from a zero ``z`` using ``u = |x - z| ** (1 - alpha)``."""
    q = 1.0 - alpha
    side = 1.0 if far > z else -1.0
    umax = abs(far - z) ** q

    def h(u):
        if u <= 0:
            u = 1e-300
        x = z + side * u ** (1.0 / q)
        return g(x) * u ** (alpha / q) / q

    val, _ = integrate.quad(h, 0.0, umax, epsabs=QUAD_TOL, limit=200)
    return val


def _probe_divergence(g, z, far):
    """Decide integrability at a zero without an exponent annotation.

    The integral is taken over ``[z + eps_k, far]`` with ``eps_k`` shrinking
    geometrically.  Blow-up past ``DIVERGENCE_CAP`` or non-decaying increments
    mean divergence; geometrically decaying increments mean convergence.
    """
    side = 1.0 if far > z else -1.0
    length = abs(far - z)
    floor = 4 * _EPS * max(abs(z), length)
    eps = length / 2
    total, _ = integrate.quad(g, min(z + side * eps, far), max(z + side * eps, far), epsabs=QUAD_TOL)
    ratios = []
    prev = None
    while eps / 2 > floor:
        nxt = eps / 2
        lo, hi = sorted((z + side * nxt, z + side * eps))
        inc, _ = integrate.quad(g, lo, hi, epsabs=QUAD_TOL * 1e-2)
        total += inc
        eps = nxt
        if total > DIVERGENCE_CAP:
            return math.inf
        if prev is not None and prev > 0:
            ratios.append(inc / prev)
        prev = inc
        if len(ratios) >= 5 and max(ratios[-5:]) < 0.98:
            r = ratios[-1]
            tail = inc * r / (1 - r)
            steady = np.ptp(ratios[-5:]) < 1e-3 * r
            if tail < QUAD_TOL or steady:
                # power-law decay: the remaining geometric tail is summed exactly
                return total + tail
        if len(ratios) >= 20 and min(ratios[-20:]) >= 0.99:
            return math.inf
    raise QuadratureNonConvergence(f"cannot decide integrability of 1/f at {z}")


@dataclass(frozen=True)
class CantorGaps(Piece):
    """Zero on a self-similar Cantor-type set inside ``[lo, hi]``.

    The set keeps ``len(offsets)`` copies scaled by ``ratio`` at the given
    normalized offsets, recursively.  In every removed gap ``(a, b)`` the
    function equals ``coeff * min(x - a, b - x) ** exponent``.
    """

    lo: float
    hi: float
    ratio: float
    offsets: tuple[float, ...]
    exponent: float
    coeff: float = 1.0

    form = "cantor_gaps"

    def __post_init__(self):
        for name in ("lo", "hi", "ratio", "exponent", "coeff"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "offsets", tuple(float(o) for o in self.offsets))

    # normalized gap lengths between consecutive copies
    @property
    def gaps(self) -> np.ndarray:
        o = np.asarray(self.offsets)
        return o[1:] - o[:-1] - self.ratio

    @property
    def contraction(self) -> float:
        return len(self.offsets) * self.ratio ** (1.0 - self.exponent)

    def check(self, lo, hi):
        out = []
        if (lo, hi) != (self.lo, self.hi):
            out.append(f"cantor_gaps support [{self.lo}, {self.hi}] must match its piece interval [{lo}, {hi}]")
        if not 0 < self.ratio < 1:
            out.append("cantor_gaps ratio must lie in (0, 1)")
        if len(self.offsets) < 2 or self.offsets[0] != 0.0 or abs(self.offsets[-1] - (1 - self.ratio)) > 1e-12:
            out.append("cantor_gaps offsets must start at 0 and end at 1 - ratio")
        elif np.any(self.gaps <= 0):
            out.append("cantor_gaps copies must be separated by gaps")
        if not 0 < self.exponent < 1:
            out.append("cantor_gaps exponent must lie in (0, 1)")
        elif self.contraction >= 1:
            out.append("cantor_gaps reciprocal series diverges (count * ratio**(1-exponent) >= 1)")
        if self.coeff == 0:
            out.append("cantor_gaps coeff must be nonzero")
        return out

    def sign_on(self, lo, hi):
        return int(np.sign(self.coeff))

    def _unit_total(self) -> float:
        q = 1.0 - self.exponent
        gap_int = 2 * (self.gaps / 2) ** q / q
        return float(np.sum(gap_int) / (1 - self.contraction))

    def _descend(self, x, want_value: bool):
        """Walk down the construction; returns f(x) or int_lo^x 1/|f|."""
        x = np.atleast_1d(_as_array(x)).astype(float)
        o = np.asarray(self.offsets)
        r, p = self.ratio, self.exponent
        q = 1.0 - p
        width = self.hi - self.lo
        band = 1e-12 * width
        stop = 64 * _XEPS * max(abs(self.lo), abs(self.hi), width)
        gaps = self.gaps
        gap_int = 2 * (gaps / 2) ** q / q
        unit = self._unit_total()
        copy_int = r ** q * unit
        before_copy = np.arange(len(o)) * copy_int + np.concatenate([[0.0], np.cumsum(gap_int)])
        out = np.zeros_like(x)
        c_lo = np.full(x.shape, self.lo, dtype=np.longdouble)
        L = np.full(x.shape, width, dtype=np.longdouble)
        act = (x > self.lo) & (x < self.hi)
        if not want_value:
            out[x >= self.hi] = width ** q * unit
        while np.any(act):
            idx = np.nonzero(act)[0]
            xi, ci, Li = x[idx], c_lo[idx], L[idx]
            tiny = Li < stop
            if np.any(tiny):
                t = idx[tiny]
                if not want_value:
                    frac = np.clip((x[t] - c_lo[t]) / L[t], 0.0, 1.0)
                    out[t] += frac * L[t] ** q * unit
                act[t] = False
                keep = ~tiny
                idx, xi, ci, Li = idx[keep], xi[keep], ci[keep], Li[keep]
                if idx.size == 0:
                    break
            starts = ci[:, None] + o[None, :] * Li[:, None]
            i = np.sum(starts <= xi[:, None], axis=1) - 1
            i = np.clip(i, 0, len(o) - 1)
            copy_end = ci + (o[i] + r) * Li
            in_gap = xi > copy_end
            scale = Li ** q
            g = idx[in_gap]
            if g.size:
                j = i[in_gap]
                a = copy_end[in_gap]
                b = ci[in_gap] + o[np.minimum(j + 1, len(o) - 1)] * Li[in_gap]
                d = np.minimum(xi[in_gap] - a, b - xi[in_gap])
                if want_value:
                    out[g] = np.where(d < band, 0.0, self.coeff * np.maximum(d, 0.0) ** p)
                else:
                    ell = b - a
                    dl = np.maximum(xi[in_gap] - a, 0.0)
                    half = ell / 2
                    part = np.where(
                        dl <= half,
                        dl ** q / q,
                        2 * half ** q / q - np.maximum(ell - dl, 0.0) ** q / q,
                    )
                    out[g] += scale[in_gap] * (before_copy[j] + copy_int) + part
                act[g] = False
            c = idx[~in_gap]
            if c.size:
                k = i[~in_gap]
                if not want_value:
                    out[c] += scale[~in_gap] * before_copy[k]
                c_lo[c] = ci[~in_gap] + o[k] * Li[~in_gap]
                L[c] = Li[~in_gap] * r
        if not want_value:
            out /= abs(self.coeff)
        return out

    def value(self, x):
        out = self._descend(x, True)
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def primitive(self, x):
        """``int_lo^x dy / |f(y)|`` for ``x`` in ``[lo, hi]``."""
        out = self._descend(x, False)
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    def recip_integral(self, a, b, sign):
        if b <= a:
            return 0.0
        if sign * self.coeff <= 0:
            return math.inf
        return float(self.primitive(b) - self.primitive(a))

    def recip_cumulative(self, a, xs, sign):
        return self.primitive(_as_array(xs)) - self.primitive(a)

    def params(self):
        return {
            "lo": self.lo,
            "hi": self.hi,
            "ratio": self.ratio,
            "offsets": list(self.offsets),
            "exponent": self.exponent,
            "coeff": self.coeff,
        }


PIECE_FORMS = {
    "constant": Constant,
    "affine": Affine,
    "power_law": PowerLaw,
    "polynomial": Polynomial,
    "cantor_gaps": CantorGaps,
}


def piece_from_params(form: str, params: dict) -> Piece:
    cls = PIECE_FORMS[form]
    if form == "polynomial":
        return Polynomial(tuple(params["coeffs"]))
    if form == "cantor_gaps":
        return CantorGaps(
            float(params["lo"]),
            float(params["hi"]),
            float(params["ratio"]),
            tuple(params["offsets"]),
            float(params["exponent"]),
            float(params.get("coeff", 1.0)),
        )
    if form == "power_law":
        return PowerLaw(float(params["anchor"]), float(params["coeff"]), float(params["exponent"]), int(params.get("sign", 1)))
    return cls(**{k: float(v) for k, v in params.items()})


@dataclass(frozen=True)
class Violation:
    rule: str
    witness: Optional[float]
    message: str

    def __str__(self):
        at = "" if self.witness is None else f" at {self.witness:g}"
        return f"[{self.rule}]{at}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def __str__(self):
        if self.valid:
            return "valid"
        return "; ".join(str(v) for v in self.violations)


@dataclass(frozen=True)
class RegulatedFn:
    """Piecewise right-hand side ``f``.

    ``pieces[i]`` acts on the open gap ``(breakpoints[i-1], breakpoints[i])``
    (with infinite ends for the first and last piece) and ``values[i]`` is
    ``f(breakpoints[i])``.  ``bound`` is the declared sup norm, checked on
    ``window``.  ``accumulation_points`` marks points where the intended
    breakpoint sequence accumulates; such functions are not regulated there
    and are always rejected by :meth:`validate`.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Piece, ...]
    values: tuple[float, ...]
    bound: float
    window: tuple[float, float] = (-1e3, 1e3)
    accumulation_points: tuple[float, ...] = ()
    _bp: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        object.__setattr__(self, "accumulation_points", tuple(float(a) for a in self.accumulation_points))
        object.__setattr__(self, "_bp", np.asarray(self.breakpoints, dtype=float))

    @classmethod
    def single(cls, piece: Piece, bound: float, window=(-1e3, 1e3)) -> "RegulatedFn":
        return cls((), (piece,), (), bound, window)

    def piece_interval(self, i: int) -> tuple[float, float]:
        lo = self.breakpoints[i - 1] if i > 0 else -math.inf
        hi = self.breakpoints[i] if i < len(self.breakpoints) else math.inf
        return lo, hi

    def piece_index(self, x: float) -> tuple[int, bool]:
        """Index of the piece containing ``x`` and whether ``x`` is a breakpoint."""
        i = int(np.searchsorted(self._bp, x, side="left"))
        at = i < len(self._bp) and self._bp[i] == x
        return i, at

    def eval(self, x):
        """Value of ``f`` at ``x`` (scalar or array); breakpoints use their explicit value."""
        xa = np.atleast_1d(_as_array(x))
        out = np.empty_like(xa)
        idx = np.searchsorted(self._bp, xa, side="left")
        at_bp = np.zeros(xa.shape, dtype=bool)
        if len(self._bp):
            safe = np.minimum(idx, len(self._bp) - 1)
            at_bp = (idx < len(self._bp)) & (self._bp[safe] == xa)
            vals = np.asarray(self.values)
            out[at_bp] = vals[safe[at_bp]]
        for i in np.unique(idx[~at_bp]):
            m = (idx == i) & ~at_bp
            out[m] = self.pieces[i].value(xa[m])
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    __call__ = eval

    def one_sided_limits(self, x: float) -> tuple[float, float]:
        """``(f(x-), f(x+))``; equal to the piece value away from breakpoints."""
        i, at = self.piece_index(x)
        if not at:
            v = float(self.pieces[i].value(x))
            return v, v
        return float(self.pieces[i].value(x)), float(self.pieces[i + 1].value(x))

    def sample_points(self, n: int = 4096) -> np.ndarray:
        lo, hi = self.window
        pts = [np.linspace(lo, hi, n)]
        for b in self.breakpoints:
            if lo <= b <= hi:
                pts.append(b + np.array([-1e-9, -1e-6, 1e-6, 1e-9]) * max(1.0, abs(b)))
        return np.unique(np.concatenate(pts))

    def validate(self) -> ValidationReport:
        out: list[Violation] = []
        bp = self.breakpoints
        for a in self.accumulation_points:
            out.append(Violation("regulated", a, f"not regulated at {a:g}: breakpoints accumulate there"))
        if any(not math.isfinite(b) for b in bp):
            out.append(Violation("breakpoints", None, "breakpoints must be finite"))
        if any(b2 <= b1 for b1, b2 in zip(bp[:-1], bp[1:])):
            bad = next(b2 for b1, b2 in zip(bp[:-1], bp[1:]) if b2 <= b1)
            out.append(Violation("breakpoints", bad, "breakpoints must be strictly increasing"))
        if len(bp) > MAX_BREAKPOINTS:
            out.append(Violation("regulated", None, f"more than {MAX_BREAKPOINTS} breakpoints"))
        if len(self.pieces) != len(bp) + 1:
            out.append(Violation("pieces", None, "need exactly one piece per gap between breakpoints"))
        if len(self.values) != len(bp):
            out.append(Violation("values", None, "need exactly one value per breakpoint"))
        if not self.bound > 0:
            out.append(Violation("bounded", None, "bound must be positive"))
        if out:
            return ValidationReport(tuple(out))
        for i, piece in enumerate(self.pieces):
            lo, hi = self.piece_interval(i)
            for msg in piece.check(lo, hi):
                out.append(Violation("piece", lo if math.isfinite(lo) else hi, msg))
        if out:
            return ValidationReport(tuple(out))
        for y, v in zip(bp, self.values):
            left, right = self.one_sided_limits(y)
            if not all(map(math.isfinite, (left, right, v))):
                out.append(Violation("regulated", y, "one-sided limits must exist and be finite"))
                continue
            if (left * right == 0 or (left > 0 > right)) and v != 0:
                out.append(
                    Violation(
                        "no-jamming",
                        y,
                        f"f({y:g}-)={left:g}, f({y:g}+)={right:g} forces f({y:g})=0 but it is {v:g}",
                    )
                )
        try:
            vals = np.abs(self.eval(self.sample_points()))
        except UnresolvedZero as exc:  # pragma: no cover - custom pieces only
            out.append(Violation("piece", None, str(exc)))
            vals = np.zeros(1)
        if np.any(~np.isfinite(vals)) or np.max(vals) > self.bound * (1 + 1e-12):
            worst = float(self.sample_points()[int(np.nanargmax(np.where(np.isfinite(vals), vals, np.inf)))])
            out.append(Violation("bounded", worst, f"|f| exceeds the declared bound {self.bound:g}"))
        return ValidationReport(tuple(out))

    def require_valid(self) -> "RegulatedFn":
        report = self.validate()
        if not report.valid:
            raise InvalidFunction(report)
        return self

    def reciprocal_integral(self, a: float, b: float, side: str = "plus") -> float:
        """``int_a^b dx / f^+(x)`` (``side='plus'``) or ``int_a^b dx / |f^-(x)|``.

        Returns ``inf`` when the integrand is not integrable, including when
        the relevant part of ``f`` vanishes on a set of positive length.
        """
        sign = {"plus": 1, "minus": -1, "+": 1, "-": -1}[side]
        if b < a:
            raise ValueError("need a <= b")
        if a == b:
            return 0.0
        cuts = [a] + [p for p in self.breakpoints if a < p < b] + [b]
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if not math.isfinite(lo) or not math.isfinite(hi):
                return math.inf
            i = int(np.searchsorted(self._bp, 0.5 * (lo + hi), side="left"))
            total += self.pieces[i].recip_integral(lo, hi, sign)
            if math.isinf(total):
                return math.inf
        return total
