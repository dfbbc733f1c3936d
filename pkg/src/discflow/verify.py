"""Executable consistency checks: Chapman-Kolmogorov, semigroup law,
closedness of the solution set under uniform limits, and the two
deterministic limits of the waiting rates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NotConverged
from .flow import FlowSpec, caratheodory_residual
from .kernel import MarkovSpec, TransitionKernel, kernel, transition_prob, wasserstein1
from .regulated import RegulatedFn


@dataclass
class Report:
    name: str
    passed: bool
    max_residual: float
    tol: float
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {verdict} (max residual {self.max_residual:.3e}, tol {self.tol:.1e})"


def threads() -> int:
    """Worker count from ``DISCFLOW_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DISCFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    n = threads()
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(n) as pool:
        # map keeps the input order, so merged reports stay deterministic
        return list(pool.map(fn, items))


Interval = tuple  # (a, b) closed, or (a, b, closed_left, closed_right)


def _interval(A) -> tuple[float, float, tuple[bool, bool]]:
    if len(A) == 2:
        return float(A[0]), float(A[1]), (True, True)
    return float(A[0]), float(A[1]), (bool(A[2]), bool(A[3]))


def default_sets(ks: TransitionKernel, kst: TransitionKernel, levels: int = 3) -> list[tuple]:
    """Dyadic intervals across the reachable window plus singletons at fixed atoms.

    Only atoms at waiting points and leg ends get singletons: a moving
    front atom is located by inverting the clock, and composing two such
    inversions agrees with a single one only up to rounding.
    """
    lo = min(ks.support[0], kst.support[0])
    hi = max(ks.support[1], kst.support[1])
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 1e-6 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    sets = []
    for level in range(levels + 1):
        edges = np.linspace(lo, hi, 2**level + 1)
        sets.extend((float(a), float(b)) for a, b in zip(edges[:-1], edges[1:]))
    fixed = set()
    for k in (ks, kst):
        for br in k.branches:
            fixed.update(float(x) for x in br.wait_x)
            fixed.add(float(br.lw.end))
    atoms = sorted({x for x, _ in ks.atoms} | {x for x, _ in kst.atoms})
    sets.extend((x, x) for x in atoms if x in fixed)
    return sets


def _split_cells(branch, a, b, rates, grid_tol):
    """Subdivide ``[a, b]`` until each piece carries at most ``grid_tol`` mass."""
    out = []
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        mass = float(branch.segment_mass(lo, hi, rates)[0]) * branch.weight
        if mass > grid_tol and hi - lo > 1e-13 * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            stack.extend([(mid, hi), (lo, mid)])
        else:
            out.append((lo, hi))
    return sorted(out)


def stieltjes(spec: MarkovSpec, ks: TransitionKernel, t: float, A, grid_tol: float = 1e-2, order: int = 8) -> float:
    """``int P_t(z, A) P_s(x0, dz)`` as an atom sum plus quadrature on the smooth part.

    The smooth part is integrated in the clock variable of each branch,
    where its density is explicit, with cells split wherever ``P_t(., A)``
    can jump and refined until each carries at most ``grid_tol`` mass.
    """
    a, b, closed = _interval(A)
    total = 0.0
    if ks.atom_x.size:
        total += float(np.dot(ks.atom_mass, transition_prob(spec, ks.atom_x, t, a, b, closed)))
    xg, wg = np.polynomial.legendre.leggauss(order)
    for br in ks.branches:
        lw = br.lw
        special = []
        for e in (a, b):
            pe = float(lw.dpos(e)[0]) - br.s0
            if math.isfinite(pe):
                special.extend([pe, pe - t])
        if math.isfinite(br.tau):
            special.append(br.tau - t)
        special.extend(br.wait_w - t)
        nodes, weights = [], []
        for w0, w1, rates in br.segments():
            cuts = sorted({w0, w1} | {c for c in special if w0 < c < w1})
            for c0, c1 in zip(cuts[:-1], cuts[1:]):
                for lo, hi in _split_cells(br, c0, c1, rates, grid_tol):
                    u = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
                    nodes.append(u)
                    weights.append(0.5 * (hi - lo) * wg * br.density(u, rates))
        if nodes:
            # one inversion and one kernel evaluation for all cells of the branch
            u = np.concatenate(nodes)
            g = transition_prob(spec, br.position(u), t, a, b, closed)
            total += br.weight * float(np.dot(np.concatenate(weights), g))
    return total


def check_chapman_kolmogorov(
    spec: MarkovSpec,
    x0: float,
    s: float,
    t: float,
    sets: Optional[Sequence] = None,
    tol: float = 1e-4,
    grid_tol: float = 1e-2,
    order: int = 8,
) -> Report:
    """Compare ``int P_t(z, A) P_s(x0, dz)`` with ``P_{s+t}(x0, A)`` for each set ``A``."""
    if not (s > 0 and t > 0):
        raise ValueError("s and t must be positive")
    ks = kernel(spec, x0, s)
    kst = kernel(spec, x0, s + t)
    if sets is None:
        sets = default_sets(ks, kst)
    details = []
    worst = 0.0
    for A in sets:
        a, b, closed = _interval(A)
        lhs = stieltjes(spec, ks, t, A, grid_tol, order)
        rhs = kst.prob(a, b, closed)
        r = abs(lhs - rhs)
        worst = max(worst, r)
        details.append({"x0": x0, "s": s, "t": t, "set": [a, b, *closed], "lhs": lhs, "rhs": rhs, "residual": r})
    return Report("chapman-kolmogorov", worst <= tol, worst, tol, details)


def run_ck_suite(spec: MarkovSpec, cases: Sequence[tuple[float, float, float]], tol: float = 1e-4, **kw) -> Report:
    """Chapman-Kolmogorov over several ``(x0, s, t)`` cases with default sets."""
    reports = _parallel_map(lambda c: check_chapman_kolmogorov(spec, *c, tol=tol, **kw), list(cases))
    details = [d for r in reports for d in r.details]
    worst = max((r.max_residual for r in reports), default=0.0)
    return Report("chapman-kolmogorov", worst <= tol, worst, tol, details)


def _random_triples(spec: FlowSpec, samples: int, seed: int, window, t_max: float):
    rng = np.random.default_rng(seed)
    lo, hi = window if window is not None else spec.f.window
    x0 = rng.uniform(lo, hi, samples)
    t = rng.uniform(0, t_max, samples)
    s = rng.uniform(0, t_max, samples)
    return x0, t, s


def check_semigroup(
    spec: FlowSpec,
    samples: int = 1000,
    seed: int = 0,
    window: Optional[tuple[float, float]] = None,
    t_max: float = 10.0,
    tol: float = 1e-8,
    points: Optional[Sequence[tuple[float, float, float]]] = None,
) -> Report:
    """``max |S_s(S_t x0) - S_{t+s} x0| / (1 + |x0|)`` over random or given triples."""
    if points is not None:
        arr = np.asarray(points, dtype=float).reshape(-1, 3)
        x0, t, s = arr[:, 0], arr[:, 1], arr[:, 2]
    else:
        x0, t, s = _random_triples(spec, samples, seed, window, t_max)
    eng = spec.engine
    xt = eng.flow(x0, t)
    lhs = eng.flow(xt, s)
    rhs = eng.flow(x0, t + s)
    res = np.abs(lhs - rhs) / (1.0 + np.abs(x0))
    k = int(np.argmax(res)) if res.size else 0
    worst = float(res.max()) if res.size else 0.0
    details = [{"x0": float(x0[k]), "t": float(t[k]), "s": float(s[k]), "residual": worst}] if res.size else []
    return Report("semigroup", worst <= tol, worst, tol, details)


def check_trajectories(
    spec: FlowSpec,
    samples: int = 1000,
    seed: int = 0,
    window: Optional[tuple[float, float]] = None,
    t_max: float = 10.0,
    tol: float = 1e-6,
) -> Report:
    """Carathéodory residual and monotonicity of random deterministic trajectories."""
    x0, t, _ = _random_triples(spec, samples, seed, window, t_max)
    worst = 0.0
    details = []
    grid = np.linspace(0, 1, 65)
    for xi, ti in zip(x0, t):
        r = caratheodory_residual(spec, float(xi), float(ti))
        path = spec.engine.flow(np.full(grid.shape, xi), grid * ti)
        steps = np.diff(path)
        monotone = bool(np.all(steps >= 0) or np.all(steps <= 0))
        if not monotone:
            r = math.inf
        if r > worst:
            worst = r
            details = [{"x0": float(xi), "t": float(ti), "residual": r, "monotone": monotone}]
    return Report("caratheodory", worst <= tol, worst, tol, details)


def _path_arrays(p):
    if hasattr(p, "times"):
        return np.asarray(p.times, dtype=float), np.asarray(p.states, dtype=float)
    times, states = p
    return np.asarray(times, dtype=float), np.asarray(states, dtype=float)


def sampled_residual(f: RegulatedFn, times: np.ndarray, states: np.ndarray) -> float:
    """Carathéodory residual of a sampled path using the trapezoidal rule."""
    vals = f.eval(states)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(times))])
    return float(np.max(np.abs(states - states[0] - integral)))


def check_closure(f: RegulatedFn, paths: Sequence, limit_path, tol: float = 1e-6) -> Report:
    """Check that uniformly converging solutions have a limit that is again a solution.

    ``paths`` and ``limit_path`` are sample paths or ``(times, states)``
    pairs; the family is compared on the limit's time grid.
    """
    lt, lx = _path_arrays(limit_path)
    dists = []
    for p in paths:
        pt, px = _path_arrays(p)
        dists.append(float(np.max(np.abs(np.interp(lt, pt, px) - lx))))
    gaps = [float(np.max(np.abs(np.interp(lt, *_path_arrays(p)) - np.interp(lt, *_path_arrays(q))))) for p, q in zip(paths[:-1], paths[1:])]
    if any(g2 > g1 * (1 + 1e-9) + 1e-15 for g1, g2 in zip(gaps[:-1], gaps[1:])):
        raise NotConverged("distance between successive paths does not decrease")
    r = sampled_residual(f, lt, lx)
    details = [{"distance_to_limit": d} for d in dists]
    return Report("closure", r <= tol, r, tol, details)


def check_limits(
    spec: MarkovSpec,
    lambda_values: Sequence[float] = (1e3, 1e-3),
    x0: float = 0.0,
    t: float = 1.0,
    tol: float = 1e-2,
) -> Report:
    """Compare kernels with all waiting rates set to each ``lambda`` with the deterministic limits.

    Fast rates (``lambda * t >= 1``) make holding negligible, so the kernel
    should approach the flow that ignores the waiting points; slow rates
    make the trajectory stay put, approaching the flow that stops there.
    """
    details = []
    worst = 0.0
    stop = kernel(spec.stopping(), x0, t)
    move = kernel(spec.moving(), x0, t)
    for lam in lambda_values:
        scaled = MarkovSpec(spec.f, spec.mu, spec.stop_set, {y: lam for y in spec.waiting}, spec.theta)
        k = kernel(scaled, x0, t)
        d_stop = wasserstein1(k, stop)
        d_move = wasserstein1(k, move)
        expected = "moving" if lam * t >= 1 else "stop"
        d = d_move if expected == "moving" else d_stop
        worst = max(worst, d)
        details.append({"lambda": lam, "t": t, "expected": expected, "w1_stop": d_stop, "w1_moving": d_move})
    return Report("limits", worst <= tol, worst, tol, details)
