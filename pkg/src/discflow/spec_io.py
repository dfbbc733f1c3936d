"""Problem files: a JSON document describing ``f``, the measure, stop and
waiting points, branching data, windows and tolerances.

Parsing runs in two stages. The document is first checked against
:data:`SCHEMA` for shape and value ranges, raising :class:`SchemaError`; the
objects are then built and cross-validated, raising :class:`SemanticError`.
Both name the offending key and the rule that failed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .errors import InvalidFunction, SchemaError, SemanticError, SpecError
from .flow import FlowSpec
from .kernel import MarkovSpec
from .measure import ACComponent, AtomlessMeasure, IFSComponent
from .regulated import PIECE_FORMS, RegulatedFn, piece_from_params

FORMAT_VERSION = 1

DEFAULT_TOLERANCES = {
    "ck": 1e-4,
    "semigroup": 1e-8,
    "caratheodory": 1e-6,
    "closure": 1e-6,
    "limits": 1e-2,
    "grid": 1e-2,
}

_num = {"type": "number"}
_nums = {"type": "array", "items": _num}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["function"],
    "additionalProperties": False,
    "properties": {
        "format": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "function": {
            "type": "object",
            "required": ["breakpoints", "pieces", "values", "bound"],
            "additionalProperties": False,
            "properties": {
                "breakpoints": {**_nums, "maxItems": 1024},
                "pieces": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["form", "params"],
                        "additionalProperties": False,
                        "properties": {
                            "form": {"enum": sorted(PIECE_FORMS)},
                            "params": {"type": "object"},
                        },
                    },
                },
                "values": _nums,
                "bound": {"type": "number", "exclusiveMinimum": 0},
                "window": _pair,
                "accumulation_points": _nums,
            },
        },
        "measure": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ac": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["lo", "hi"],
                        "additionalProperties": False,
                        "properties": {"lo": _num, "hi": _num, "density": _nums},
                    },
                },
                "ifs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["lo", "hi", "ratio", "offsets", "weights"],
                        "additionalProperties": False,
                        "properties": {
                            "lo": _num,
                            "hi": _num,
                            "ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                            "offsets": _nums,
                            "weights": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                            "mass": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
            },
        },
        "stop_set": _nums,
        "waiting": {
            "type": "object",
            "required": ["points", "rates"],
            "additionalProperties": False,
            "properties": {
                "points": _nums,
                "rates": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "branching": {
            "type": "object",
            "required": ["points"],
            "additionalProperties": False,
            "properties": {
                "points": _nums,
                "theta": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "phi": {"type": "array", "items": {"enum": [-1, 1]}},
            },
        },
        "windows": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"space": _pair, "time": _pair},
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in DEFAULT_TOLERANCES},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class ProblemSpec:
    """Validated contents of a problem file."""

    f: RegulatedFn
    mu: AtomlessMeasure = field(default_factory=AtomlessMeasure)
    stop_set: tuple[float, ...] = ()
    waiting: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    space: tuple[float, float] = (-10.0, 10.0)
    time: tuple[float, float] = (0.0, 10.0)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    name: str = ""

    @property
    def is_markov(self) -> bool:
        return bool(self.waiting) or bool(self.theta)

    def flow_spec(self) -> FlowSpec:
        """Deterministic semigroup; waiting points are passed through.

        Branch points without ``phi`` take a direction from ``theta`` when
        it is 0 or 1.
        """
        phi = dict(self.phi)
        for x, th in self.theta.items():
            if x not in phi and th in (0.0, 1.0):
                phi[x] = 1 if th == 1.0 else -1
        return FlowSpec(self.f, self.mu, self.stop_set, phi)

    def markov_spec(self) -> MarkovSpec:
        theta = dict(self.theta)
        for x, d in self.phi.items():
            theta.setdefault(x, 1.0 if d > 0 else 0.0)
        return MarkovSpec(self.f, self.mu, self.stop_set, self.waiting, theta)


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    key = "/".join(str(p) for p in err.absolute_path) or "<root>"
    rules = {
        "minimum": "range",
        "maximum": "range",
        "exclusiveMinimum": "range",
        "exclusiveMaximum": "range",
        "enum": "allowed-values",
        "const": "allowed-values",
        "required": "required",
        "additionalProperties": "unknown-key",
        "type": "type",
        "minItems": "length",
        "maxItems": "length",
    }
    return SchemaError(key, rules.get(err.validator, str(err.validator)), err.message)


def _same_length(doc: dict, block: str, a: str, b: str):
    blk = doc.get(block)
    if blk is not None and b in blk and len(blk[a]) != len(blk[b]):
        raise SchemaError(f"{block}/{b}", "length", f"need one entry per item of {block}/{a}")


def _check_schema(doc: dict):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        raise _schema_error(errors[0])
    _same_length(doc, "waiting", "points", "rates")
    _same_length(doc, "branching", "points", "theta")
    _same_length(doc, "branching", "points", "phi")
    br = doc.get("branching")
    if br is not None and ("theta" in br) == ("phi" in br):
        raise SchemaError("branching", "one-of", "give exactly one of theta and phi")
    fn = doc["function"]
    if len(fn["pieces"]) != len(fn["breakpoints"]) + 1:
        raise SchemaError("function/pieces", "length", "need one piece per gap between breakpoints")
    if len(fn["values"]) != len(fn["breakpoints"]):
        raise SchemaError("function/values", "length", "need one value per breakpoint")


def _build_function(fn: dict) -> RegulatedFn:
    pieces = []
    for i, p in enumerate(fn["pieces"]):
        try:
            pieces.append(piece_from_params(p["form"], p["params"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"function/pieces/{i}/params", "piece-params", str(exc)) from None
    f = RegulatedFn(
        tuple(fn["breakpoints"]),
        tuple(pieces),
        tuple(fn["values"]),
        float(fn["bound"]),
        tuple(fn.get("window", (-1e3, 1e3))),
        tuple(fn.get("accumulation_points", ())),
    )
    report = f.validate()
    if not report.valid:
        v = report.violations[0]
        raise SemanticError("function", v.rule, v.message)
    return f


def _build_measure(m: Optional[dict]) -> AtomlessMeasure:
    if not m:
        return AtomlessMeasure()
    ac = tuple(ACComponent(c["lo"], c["hi"], tuple(c.get("density", (1.0,)))) for c in m.get("ac", ()))
    ifs = tuple(
        IFSComponent(c["lo"], c["hi"], c["ratio"], tuple(c["offsets"]), tuple(c["weights"]), c.get("mass", 1.0))
        for c in m.get("ifs", ())
    )
    mu = AtomlessMeasure(ac, ifs)
    problems = mu.check()
    if problems:
        raise SemanticError("measure", "measure-params", problems[0])
    return mu


def from_dict(doc: dict) -> ProblemSpec:
    """Validate a parsed document and build the problem."""
    _check_schema(doc)
    f = _build_function(doc["function"])
    mu = _build_measure(doc.get("measure"))
    wait = doc.get("waiting", {"points": [], "rates": []})
    br = doc.get("branching", {"points": []})
    win = doc.get("windows", {})
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(doc.get("tolerances", {}))
    spec = ProblemSpec(
        f,
        mu,
        tuple(sorted(float(s) for s in doc.get("stop_set", ()))),
        {float(x): float(r) for x, r in sorted(zip(wait["points"], wait["rates"]))},
        {float(x): float(v) for x, v in sorted(zip(br["points"], br.get("theta", [])))},
        {float(x): int(v) for x, v in sorted(zip(br["points"], br.get("phi", [])))},
        tuple(float(v) for v in win.get("space", (-10.0, 10.0))),
        tuple(float(v) for v in win.get("time", (0.0, 10.0))),
        tols,
        int(doc.get("seed", 0)),
        str(doc.get("name", "")),
    )
    _cross_validate(spec)
    return spec


def _cross_validate(spec: ProblemSpec):
    # building both semigroups runs every consistency rule of the modules
    try:
        fs = spec.flow_spec()
        ms = spec.markov_spec()
    except InvalidFunction as exc:
        v = exc.report.violations[0]
        raise SemanticError("function", v.rule, v.message) from None
    zs = fs.zeros
    for x in list(spec.theta) + list(spec.phi):
        if not zs.contains(x):
            raise SemanticError(f"branching[{x:g}]", "branching-in-zeros", "branching points must be zeros of f")
    stops = set(spec.stop_set)
    for x in fs.engine.branch_points():
        if x in stops:
            continue
        if x not in spec.theta and x not in spec.phi:
            raise SemanticError("branching", "branching-covers-branch-points", f"no branching data for {x:g}")
    if not (spec.space[0] < spec.space[1]):
        raise SemanticError("windows/space", "window-order", "need lo < hi")
    if not (0 <= spec.time[0] < spec.time[1]):
        raise SemanticError("windows/time", "window-order", "need 0 <= lo < hi")
    return ms


def to_dict(spec: ProblemSpec) -> dict:
    f = spec.f
    for i, p in enumerate(f.pieces):
        if not p.serializable:
            raise SchemaError(f"function/pieces/{i}", "serializable", "custom pieces have no file form")
    doc = {
        "format": FORMAT_VERSION,
        "name": spec.name,
        "function": {
            "breakpoints": list(f.breakpoints),
            "pieces": [{"form": p.form, "params": p.params()} for p in f.pieces],
            "values": list(f.values),
            "bound": f.bound,
            "window": list(f.window),
            "accumulation_points": list(f.accumulation_points),
        },
        "stop_set": list(spec.stop_set),
        "waiting": {"points": list(spec.waiting), "rates": list(spec.waiting.values())},
        "windows": {"space": list(spec.space), "time": list(spec.time)},
        "tolerances": dict(spec.tolerances),
        "seed": spec.seed,
    }
    if not spec.mu.is_zero:
        for c in spec.mu.ac:
            if callable(c.density):
                raise SchemaError("measure/ac", "serializable", "callable densities have no file form")
        doc["measure"] = {
            "ac": [{"lo": c.lo, "hi": c.hi, "density": list(c.density)} for c in spec.mu.ac],
            "ifs": [
                {"lo": c.lo, "hi": c.hi, "ratio": c.ratio, "offsets": list(c.offsets), "weights": list(c.weights), "mass": c.mass}
                for c in spec.mu.ifs
            ],
        }
    if spec.theta:
        doc["branching"] = {"points": list(spec.theta), "theta": list(spec.theta.values())}
    elif spec.phi:
        doc["branching"] = {"points": list(spec.phi), "phi": list(spec.phi.values())}
    return doc


def loads(text: str) -> ProblemSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", "json", str(exc)) from None
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "type", "expected an object")
    return from_dict(doc)


def dumps(spec: ProblemSpec) -> str:
    return json.dumps(to_dict(spec), indent=2, allow_nan=False) + "\n"


def bundled_names() -> list[str]:
    return sorted(p.name[: -len(".spec")] for p in (resources.files("discflow") / "data").iterdir() if p.name.endswith(".spec"))


def resolve(path: Union[str, Path]) -> Path:
    """A file path, or the name of a bundled spec (with or without ``.spec``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".spec") else p.name + ".spec"
    bundled = resources.files("discflow") / "data" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no such spec file or bundled spec: {path}")


def parse_spec(path: Union[str, Path]) -> ProblemSpec:
    """Read and validate a problem file (or bundled spec name)."""
    return loads(resolve(path).read_text())


def write_spec(spec: ProblemSpec, path: Union[str, Path]):
    Path(path).write_text(dumps(spec))


__all__ = [
    "ProblemSpec",
    "SCHEMA",
    "SpecError",
    "parse_spec",
    "write_spec",
    "loads",
    "dumps",
    "from_dict",
    "to_dict",
    "resolve",
    "bundled_names",
]
