"""Command line entry point: ``discflow <command> <spec> [options]``.

Exit codes: 0 success, 1 a verification suite failed, 2 usage error,
3 the problem file was invalid or a computation raised an error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .errors import DiscflowError
from .flow import FlowSpec, trajectory
from .kernel import kernel
from .sampler import empirical_kernel, sample_path
from .spec_io import ProblemSpec, bundled_names, dumps, parse_spec, to_dict
from .verify import (
    Report,
    check_closure,
    check_limits,
    check_semigroup,
    check_trajectories,
    run_ck_suite,
)

SUITES = ("ck", "semigroup", "limits", "closure", "caratheodory")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


class Output:
    """Collects CSV tables and writes them to ``--out`` or stdout."""

    def __init__(self, out: Optional[str], digits: int):
        self.dir = Path(out) if out else None
        self.digits = digits
        self.files: list[str] = []
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def fmt(self, v) -> str:
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            # the sign of zero carries no information here
            return f"{float(v) + 0.0:.{self.digits}g}"
        return "" if v is None else str(v)

    def table(self, name: str, header: Sequence[str], rows, section: bool = False):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([self.fmt(v) for v in r])
        if self.dir:
            path = self.dir / f"{name}.csv"
            path.write_text(buf.getvalue())
            self.files.append(path.name)
        else:
            if section:
                sys.stdout.write("\n")
            sys.stdout.write(buf.getvalue())

    def manifest(self, args: argparse.Namespace, spec: ProblemSpec, extra: Optional[dict] = None):
        if not self.dir:
            return
        flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
        doc = {
            "command": args.command,
            "flags": flags,
            "seed": getattr(args, "seed", None) if getattr(args, "seed", None) is not None else spec.seed,
            "tolerances": spec.tolerances,
            "spec": to_dict(spec),
            "outputs": self.files,
            "versions": {
                "discflow": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }
        if extra:
            doc.update(extra)
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")


def cmd_classify(args, spec: ProblemSpec, out: Output) -> int:
    fs = spec.flow_spec()
    branch, dead, stops = set(fs.engine.branch_points()), set(fs.zeros.dead_points()), set(spec.stop_set)

    def role(r):
        if r["kind"] != "point":
            return ""
        x = r["lo"]
        return "stop" if x in stops else "branch" if x in branch else "dead" if x in dead else ""

    out.table(
        "zeros",
        ["kind", "lo", "hi", "right_integrable", "left_integrable", "role"],
        ([r["kind"], r["lo"], r["hi"], r["right_integrable"], r["left_integrable"], role(r)] for r in fs.zeros.summary()),
    )
    dom = fs.engine.domains
    rows = [["increase", iv.lo, iv.hi, iv.closed_start] for iv in dom.increase]
    rows += [["decrease", iv.lo, iv.hi, iv.closed_start] for iv in dom.decrease]
    out.table("domains", ["direction", "lo", "hi", "closed_start"], rows, section=True)
    out.manifest(args, spec)
    return 0


def cmd_flow(args, spec: ProblemSpec, out: Output) -> int:
    times = args.t if args.t is not None else list(np.linspace(*spec.time, 11))
    out.table("flow", ["t", "x"], trajectory(spec.flow_spec(), args.x0, times))
    out.manifest(args, spec)
    return 0


def cmd_kernel(args, spec: ProblemSpec, out: Output) -> int:
    k = kernel(spec.markov_spec(), args.x0, args.t, grid_tol=args.grid_tol)
    x = k.grid_x if k.grid_x.size else np.asarray(k.support)
    atoms = np.asarray([a for a, _ in k.atoms])
    x = np.unique(np.concatenate([x, atoms])) if atoms.size else x
    out.table("kernel", ["x", "cdf"], zip(x, np.atleast_1d(k.cdf(x))))
    out.table("atoms", ["atom", "mass"], k.atoms, section=True)
    out.manifest(args, spec)
    return 0


def cmd_sample(args, spec: ProblemSpec, out: Output) -> int:
    ms = spec.markov_spec()
    seed = spec.seed if args.seed is None else args.seed
    horizon = spec.time[1] if args.horizon is None else args.horizon
    if args.paths:
        if not out.dir:
            raise DiscflowError("--paths needs --out to write one file per path")
        width = len(str(max(args.n - 1, 0)))
        for i in range(args.n):
            p = sample_path(ms, args.x0, horizon, seed, index=i)
            out.table(f"path_{i:0{width}d}", ["t", "x"], zip(p.times, p.states))
    else:
        emp = empirical_kernel(ms, args.x0, horizon, args.n, seed)
        xs = np.sort(emp.samples)
        out.table("ecdf", ["x", "ecdf"], zip(xs, np.arange(1, xs.size + 1) / xs.size))
    out.manifest(args, spec, {"seed": seed})
    return 0


def _ck_cases(spec: ProblemSpec, n: int, seed: int) -> list[tuple[float, float, float]]:
    rng = np.random.default_rng(seed)
    t_hi = spec.time[1]
    special = sorted(set(spec.waiting) | set(spec.theta))
    x0 = list(special) + list(rng.uniform(*spec.space, max(n - len(special), 1)))
    st = rng.uniform(0.05 * t_hi, 0.5 * t_hi, (len(x0), 2))
    return [(float(x), float(s), float(t)) for x, (s, t) in zip(x0, st)]


def _closure_report(spec: ProblemSpec, x0: float, horizon: float, seed: int, tol: float) -> Report:
    """Paths with all rates multiplied by ``2**k`` converge to the flow that ignores waiting."""
    ms = spec.markov_spec()
    paths = [sample_path(ms.with_rates(2.0**k), x0, horizon, seed, index=0) for k in range(4, 12)]
    # the limit follows the branch the paths took (they share the first uniform)
    direction = paths[0].direction or 1
    branch = ms.moving().base.engine.branch_points()
    moving = FlowSpec(spec.f, spec.mu, spec.stop_set, {b: direction for b in branch})
    grid = np.linspace(0.0, horizon, 4097)
    grid = np.unique(np.concatenate([grid, moving.engine.crossing_times(x0, horizon)]))
    limit = (grid, np.atleast_1d(moving.engine.flow(np.full(grid.shape, x0), grid)))
    return check_closure(spec.f, paths, limit, tol)


def cmd_verify(args, spec: ProblemSpec, out: Output) -> int:
    tol = spec.tolerances
    seed = spec.seed if args.seed is None else args.seed
    if args.suite == "ck":
        rep = run_ck_suite(spec.markov_spec(), _ck_cases(spec, args.cases, seed), tol=tol["ck"], grid_tol=tol["grid"])
    elif args.suite == "semigroup":
        rep = check_semigroup(spec.flow_spec(), args.samples, seed, spec.space, spec.time[1], tol["semigroup"])
    elif args.suite == "caratheodory":
        rep = check_trajectories(spec.flow_spec(), args.samples, seed, spec.space, spec.time[1], tol["caratheodory"])
    elif args.suite == "limits":
        rep = check_limits(spec.markov_spec(), x0=args.x0, t=args.t, tol=tol["limits"])
    else:
        rep = _closure_report(spec, args.x0, spec.time[1], seed, tol["closure"])
    text = json.dumps(rep.to_dict(), indent=2, default=float) + "\n"
    if out.dir:
        (out.dir / "report.json").write_text(text)
        out.files.append("report.json")
    else:
        sys.stdout.write(text)
    print(str(rep), file=sys.stderr)
    out.manifest(args, spec, {"seed": seed, "passed": rep.passed})
    return 0 if rep.passed else 1


def cmd_export(args, spec: ProblemSpec, out: Output) -> int:
    text = dumps(spec)
    if out.dir:
        (out.dir / "spec.spec").write_text(text)
        out.files.append("spec.spec")
    else:
        sys.stdout.write(text)
    out.manifest(args, spec)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="discflow", description="Semigroups of scalar ODEs with discontinuous right-hand side.")
    p.add_argument("--version", action="version", version=f"discflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("spec", help=f"problem file or bundled name ({', '.join(bundled_names())})")
        sp.add_argument("--out", help="directory for CSV files and the run manifest (default: stdout)")
        sp.add_argument("--digits", type=int, default=12, help="significant digits in CSV output")
        sp.set_defaults(func=func)
        return sp

    add("classify", cmd_classify, "zero set, integrability flags and monotone domains")
    sp = add("flow", cmd_flow, "deterministic trajectory as CSV t,x")
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--t", type=_floats, help="comma-separated times (default: 11 points over the time window)")
    sp = add("kernel", cmd_kernel, "transition law as CSV x,cdf plus atoms")
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--grid-tol", type=float, default=1e-3)
    sp = add("sample", cmd_sample, "Monte Carlo paths or their empirical CDF")
    sp.add_argument("--x0", type=float, required=True)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--paths", action="store_true", help="write one CSV per path instead of the aggregate ECDF")
    sp = add("verify", cmd_verify, "run a verification suite; exit 1 if it fails")
    sp.add_argument("--suite", choices=SUITES, required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--cases", type=int, default=8, help="(x0, s, t) cases for the ck suite")
    sp.add_argument("--x0", type=float, default=0.0, help="start for the limits and closure suites")
    sp.add_argument("--t", type=float, default=1.0, help="time for the limits suite")
    add("export", cmd_export, "write the validated spec in normalized form")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = parse_spec(args.spec)
        out = Output(args.out, args.digits)
        return args.func(args, spec, out)
    except (DiscflowError, FileNotFoundError, ValueError) as exc:
        print(f"discflow {args.command}: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
