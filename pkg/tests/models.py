"""Right-hand sides shared by the test modules."""

from __future__ import annotations

import math

from discflow.kernel import MarkovSpec
from discflow.regulated import Affine, CantorGaps, Constant, Polynomial, PowerLaw, RegulatedFn

# Integral of 1/f over the gaps of the middle-thirds Cantor set with
# f = min(x - a, b - x)^(1/3): 3 * (1/6)^(2/3) / (1 - 2 * 3^(-2/3)),
# evaluated with mpmath at 30 digits.
CANTOR_GAP_INTEGRAL = 23.5987931497405572750387

WIDE = (-1e5, 1e5)


def sqrt_abs(left_sign: int = 1, right_sign: int = 1) -> RegulatedFn:
    """``2 sqrt|x|`` with independent signs on each side of 0."""
    return RegulatedFn((0.0,), (PowerLaw(0.0, 2.0, 0.5, left_sign), PowerLaw(0.0, 2.0, 0.5, right_sign)), (0.0,), 1e3, WIDE)


def step(a: float = 0.0) -> RegulatedFn:
    """1 left of 0, -1 right of 0, ``a`` at 0."""
    return RegulatedFn((0.0,), (Constant(1.0), Constant(-1.0)), (a,), 1.0)


def cantor_f(coeff: float = 1.0) -> RegulatedFn:
    gaps = CantorGaps(0.0, 1.0, 1 / 3, (0.0, 2 / 3), 1 / 3, coeff)
    return RegulatedFn((0.0, 1.0), (Constant(0.0), gaps, Constant(0.0)), (0.0, 0.0), 1.0)


def accumulating_zeros(n: int = 50, flagged: bool = True) -> RegulatedFn:
    """Zeros at ``1/k`` for ``k <= n`` and ``f = 1`` elsewhere."""
    bps = sorted(1.0 / k for k in range(1, n + 1))
    return RegulatedFn(
        tuple(bps),
        tuple(Constant(1.0) for _ in range(n + 1)),
        tuple(0.0 for _ in bps),
        1.0,
        accumulation_points=(0.0,) if flagged else (),
    )


def sqrt_to_one() -> RegulatedFn:
    """``2 sqrt(1 - x)`` below 1 and 0 from 1 on."""
    return RegulatedFn((1.0,), (PowerLaw(1.0, 2.0, 0.5), Constant(0.0)), (0.0,), 1e3, WIDE)


def ramp_then_flat() -> RegulatedFn:
    """0 below 0, ``x`` on (0, 1), 0 from 1 on."""
    return RegulatedFn((0.0, 1.0), (Constant(0.0), Affine(1.0, 0.0), Constant(0.0)), (0.0, 0.0), 1.0)


def generic_f() -> RegulatedFn:
    """Mixed pieces: a constant, power laws, a polynomial and an attracting zero at 2."""
    return RegulatedFn(
        (-1.0, 0.0, 1.0, 2.0),
        (
            Constant(1.0),
            PowerLaw(-1.0, 1.5, 0.3),
            Polynomial((0.8, 0.0, -0.5)),
            PowerLaw(1.0, 1.0, 0.6),
            PowerLaw(2.0, 1.0, 0.5, -1),
        ),
        (0.0, 0.0, 0.0, 0.0),
        1e3,
        (-1e3, 1e3),
    )


def example_markov(rate: float = 1.0) -> MarkovSpec:
    return MarkovSpec(sqrt_abs(), waiting={0.0: rate})


def branching_markov(theta: float = 0.3, rate: float = 1.0) -> MarkovSpec:
    return MarkovSpec(sqrt_abs(-1, 1), waiting={0.0: rate}, theta={0.0: theta})


def generic_markov() -> MarkovSpec:
    return MarkovSpec(generic_f(), waiting={-1.0: 2.0, 0.0: 1.0, 1.0: 0.5})


def closed_form_cdf(t: float, x: float, rate: float = 1.0) -> float:
    """``P{X(t) <= x}`` for ``X(t) = ((t - Y)^+)^2`` with ``Y ~ Exp(rate)``."""
    if x < 0:
        return 0.0
    if math.sqrt(x) >= t:
        return 1.0
    return math.exp(-rate * (t - math.sqrt(x)))
