"""Scenario registry and run-plan loading.

A run plan is one YAML document; the schema is documented in the README.
Validation happens eagerly and every problem is reported with the line of
the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .errors import DelaySplitError, GridError, UnsupportedParameterError
from .generator import LinearGenerator
from .kernel import DelayKernel, gamma_bound
from .splitting import SCHEMES
from .state import DelayState, make_state

DEFAULT_H_LIST = (0.1, 0.05, 0.025, 0.0125, 0.00625)
GATE_KINDS = ("order", "max_error", "decreasing", "contraction", "local_ratio_spread")
ERROR_QUANTITIES = ("err_head", "err_history", "err_E")


class ConfigError(DelaySplitError):
    """Invalid run plan. ``kind`` is one of parse, schema, unknown-name,
    alignment, unsupported, dissipativity."""

    def __init__(self, message, kind="schema", source=None, line=None, path=()):
        self.kind, self.source, self.line, self.path = kind, source, line, tuple(path)
        where = str(source) if source else "<config>"
        if line is not None:
            where += f":{line}"
        dotted = ".".join(str(p) if not isinstance(p, int) else f"[{p}]" for p in path)
        dotted = dotted.replace(".[", "[")
        super().__init__(f"{where}: [{kind}] {dotted + ': ' if dotted else ''}{message}")


# -- initial profiles ------------------------------------------------------------

def head_profile(spec, gen: LinearGenerator) -> np.ndarray:
    """Initial head from a vector or one of ``sine-mode k``, ``gaussian-bump``, ``constant c``."""
    if isinstance(spec, (list, tuple, np.ndarray)):
        x = np.asarray(spec, dtype=float)
        if x.shape != (gen.n,):
            raise ValueError(f"head vector has {x.size} entries, generator has {gen.n}")
        return x
    parts = str(spec).split()
    pts = gen.grid_points()
    length = gen.length if gen.length is not None else 1.0
    if parts[:1] == ["sine-mode"] and len(parts) == 2:
        return np.sin(int(parts[1]) * np.pi * pts / length)
    if parts == ["gaussian-bump"]:
        return np.exp(-0.5 * ((pts - 0.5 * length) / (0.1 * length)) ** 2)
    if parts[:1] == ["constant"] and len(parts) == 2:
        return np.full(gen.n, float(parts[1]))
    raise KeyError(f"unknown head profile {spec!r}")


def history_function(spec, head: np.ndarray):
    """History ``sigma -> f(sigma)``: ``frozen-head``, ``constant c``, ``linear``, ``step``.

    ``linear`` is ``(1 + sigma) x`` and ``step`` is ``x`` on ``(-1/2, 0]`` and
    zero before; the latter is a rough profile for informational runs only.
    """
    parts = str(spec).split()
    if parts == ["frozen-head"]:
        return lambda s: head
    if parts[:1] == ["constant"] and len(parts) == 2:
        c = float(parts[1])
        return lambda s: np.full(head.shape, c)
    if parts == ["linear"]:
        return lambda s: (1.0 + s) * head
    if parts == ["step"]:
        return lambda s: head if s > -0.5 else np.zeros_like(head)
    raise KeyError(f"unknown history profile {spec!r}")


# -- scenarios -------------------------------------------------------------------

@dataclass
class Scenario:
    id: str
    description: str
    generator: LinearGenerator
    kernel: DelayKernel
    head: Any
    history: str
    t_final: float
    p: float = 2.0
    grid_weight: Optional[float] = None
    origin: str = "built-in"
    spec: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.grid_weight is None:
            self.grid_weight = self.generator.dx if self.generator.variant == "laplacian1d" else 1.0
        self.kernel.check_dim(self.generator.n)
        self._head = head_profile(self.head, self.generator)
        self._hist = history_function(self.history, self._head)

    def initial_state(self, m: int) -> DelayState:
        return make_state(self._head, self._hist, m, self.grid_weight, self.p)

    def describe(self):
        return {"id": self.id, "description": self.description, "origin": self.origin,
                "generator": self.generator.describe(), "kernel": self.kernel.describe(),
                "initial_head": self.head if isinstance(self.head, str) else list(map(float, self.head)),
                "initial_history": self.history, "t_final": self.t_final, "p": self.p,
                "grid_weight": self.grid_weight}


_BUILTIN_SPECS = {
    "heat-point-delay": {
        "description": "heat equation (n=50) with a point delay of weight 0.5 at lag 1",
        "generator": {"variant": "laplacian1d", "n": 50, "length": 1.0, "diffusivity": 1.0, "alpha": 0.0},
        "kernel": {"atoms": [[-1.0, 0.5]], "g": "identity"},
        "initial_head": "sine-mode 1", "initial_history": "frozen-head", "t_final": 2.0,
    },
    "intro-nonlinear": {
        "description": "heat equation with sin of a point delay plus a ramp-weighted window on [-1/2, 0]",
        "generator": {"variant": "laplacian1d", "n": 50, "length": 1.0, "diffusivity": 1.0, "alpha": 0.0},
        "kernel": {"atoms": [[-1.0, 1.0]], "density": "linear-ramp -0.5 0", "g": "sin"},
        "initial_head": "sine-mode 1", "initial_history": "frozen-head", "t_final": 2.0,
    },
    "scalar-dde": {
        "description": "u' = -u(t) + 0.5 u(t-1) with constant history, checked by the scalar oracle",
        "generator": {"variant": "diagonal", "eigs": [-1.0]},
        "kernel": {"atoms": [[-1.0, 0.5]], "g": "identity"},
        "initial_head": "constant 1", "initial_history": "constant 1", "t_final": 3.0,
    },
    "no-delay": {
        "description": "heat equation with the delay switched off; the split head is exact",
        "generator": {"variant": "laplacian1d", "n": 50, "length": 1.0, "diffusivity": 1.0, "alpha": 0.0},
        "kernel": "zero",
        "initial_head": "sine-mode 1", "initial_history": "frozen-head", "t_final": 2.0,
    },
    "pure-delay": {
        "description": "u' = u(t-1) with B = 0 and constant history; u(2) = 3.5",
        "generator": {"variant": "diagonal", "eigs": [0.0]},
        "kernel": {"atoms": [[-1.0, 1.0]], "g": "identity"},
        "initial_head": "constant 1", "initial_history": "constant 1", "t_final": 2.0,
    },
}


def builtin_ids():
    return list(_BUILTIN_SPECS)


class _Reader:
    """Typed access to a parsed YAML tree with line-aware errors."""

    def __init__(self, lines, source):
        self.lines, self.source = lines, source

    def fail(self, path, message, kind="schema"):
        line = None
        for k in range(len(path), -1, -1):
            line = self.lines.get(tuple(path[:k]))
            if line is not None:
                break
        raise ConfigError(message, kind, self.source, line, path)

    def mapping(self, value, path, allowed):
        if not isinstance(value, dict):
            self.fail(path, f"expected a mapping, got {type(value).__name__}")
        for key in value:
            if key not in allowed:
                self.fail(tuple(path) + (key,), f"unknown key; allowed: {', '.join(sorted(allowed))}")
        return value

    def number(self, value, path, positive=False, integer=False):
        if isinstance(value, bool):
            self.fail(path, "expected a number, got a boolean")
        try:
            x = float(Fraction(value)) if isinstance(value, str) else float(value)
        except (TypeError, ValueError, ZeroDivisionError):
            self.fail(path, f"expected a number, got {value!r}")
        if not math.isfinite(x):
            self.fail(path, "number must be finite")
        if positive and x <= 0:
            self.fail(path, "must be positive")
        if integer:
            if x != int(x):
                self.fail(path, "must be an integer")
            return int(x)
        return x


def _line_index(text):
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    index = {}

    def walk(node, path):
        index[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                index[path + (k.value,)] = k.start_mark.line + 1
                walk(v, path + (k.value,))
                index[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return index


def _parse_yaml(text, source):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(problem, "parse", source, line) from None


def _build_generator(spec, rd, path):
    spec = rd.mapping(spec, path, {"variant", "n", "length", "diffusivity", "alpha", "eigs", "matrix"})
    variant = spec.get("variant")
    try:
        if variant == "laplacian1d":
            return LinearGenerator.laplacian1d(
                rd.number(spec.get("n", 50), path + ("n",), positive=True, integer=True),
                rd.number(spec.get("length", 1.0), path + ("length",), positive=True),
                rd.number(spec.get("diffusivity", 1.0), path + ("diffusivity",), positive=True),
                rd.number(spec.get("alpha", 0.0), path + ("alpha",)))
        alpha = spec.get("alpha")
        alpha = None if alpha is None else rd.number(alpha, path + ("alpha",))
        if variant == "diagonal":
            eigs = spec.get("eigs")
            if not isinstance(eigs, list) or not eigs:
                rd.fail(path + ("eigs",), "diagonal generator needs a non-empty list 'eigs'")
            return LinearGenerator.diagonal(
                [rd.number(e, path + ("eigs", i)) for i, e in enumerate(eigs)], alpha)
        if variant == "dense":
            mat = spec.get("matrix")
            if not isinstance(mat, list) or not mat:
                rd.fail(path + ("matrix",), "dense generator needs a 'matrix' (list of rows)")
            rows = [[rd.number(v, path + ("matrix", i, j)) for j, v in enumerate(r)]
                    for i, r in enumerate(mat)]
            return LinearGenerator.dense(rows, alpha)
    except DelaySplitError:
        raise
    except ValueError as exc:
        rd.fail(path, str(exc))
    rd.fail(path + ("variant",), f"unknown generator variant {variant!r}; "
            "choose laplacian1d, diagonal or dense", kind="unknown-name")


def _build_kernel(spec, rd, path):
    if spec == "zero":
        return DelayKernel.zero()
    spec = rd.mapping(spec, path, {"atoms", "density", "g", "sigma0"})
    atoms = []
    for i, a in enumerate(spec.get("atoms", []) or []):
        if not isinstance(a, list) or len(a) != 2:
            rd.fail(path + ("atoms", i), "atom must be [position, coefficient]")
        pos = rd.number(a[0], path + ("atoms", i, 0))
        coef = a[1] if isinstance(a[1], list) else rd.number(a[1], path + ("atoms", i, 1))
        atoms.append((pos, coef))
    sigma0 = spec.get("sigma0")
    try:
        return DelayKernel(atoms, spec.get("density"), spec.get("g", "identity"),
                           None if sigma0 is None else rd.number(sigma0, path + ("sigma0",)))
    except KeyError as exc:
        rd.fail(path, str(exc.args[0]), kind="unknown-name")
    except (ValueError, GridError) as exc:
        rd.fail(path, str(exc))


def build_scenario(spec, rd=None, path=("scenario",), origin="custom") -> Scenario:
    """Scenario from a mapping; ``base`` copies a built-in and overrides keys."""
    rd = rd or _Reader({}, None)
    allowed = {"id", "base", "description", "generator", "kernel", "initial_head",
               "initial_history", "t_final", "p", "grid_weight"}
    spec = rd.mapping(spec, path, allowed)
    merged = {}
    if "base" in spec:
        base = spec["base"]
        if base not in _BUILTIN_SPECS:
            rd.fail(path + ("base",), f"unknown scenario {base!r}", kind="unknown-name")
        merged.update(_BUILTIN_SPECS[base])
    merged.update({k: v for k, v in spec.items() if k != "base"})
    sid = merged.get("id")
    if not isinstance(sid, str) or not sid:
        rd.fail(path + ("id",), "custom scenario needs a string 'id'")
    for key in ("generator", "kernel", "initial_head", "initial_history"):
        if key not in merged:
            rd.fail(path, f"missing required key {key!r}")
    gen = _build_generator(merged["generator"], rd, path + ("generator",))
    kernel = _build_kernel(merged["kernel"], rd, path + ("kernel",))
    p = rd.number(merged.get("p", 2.0), path + ("p",))
    if p < 1:
        rd.fail(path + ("p",), "norm exponent must be >= 1")
    gw = merged.get("grid_weight")
    try:
        return Scenario(
            id=sid, description=str(merged.get("description", "")), generator=gen, kernel=kernel,
            head=merged["initial_head"], history=str(merged["initial_history"]),
            t_final=rd.number(merged.get("t_final", 2.0), path + ("t_final",), positive=True),
            p=p, grid_weight=None if gw is None else rd.number(gw, path + ("grid_weight",), positive=True),
            origin=origin, spec=dict(merged))
    except KeyError as exc:
        rd.fail(path, str(exc.args[0]), kind="unknown-name")
    except ValueError as exc:
        rd.fail(path, str(exc))


def builtin(sid: str) -> Scenario:
    spec = dict(_BUILTIN_SPECS[sid], id=sid)
    return build_scenario(spec, origin="built-in")


class Registry:
    """Built-in scenarios plus any registered custom ones, in insertion order."""

    def __init__(self):
        self._specs = {k: ("built-in", dict(v, id=k)) for k, v in _BUILTIN_SPECS.items()}

    def register(self, scenario: Scenario):
        self._specs[scenario.id] = (scenario.origin, dict(scenario.spec, id=scenario.id))

    def load_file(self, path):
        path = Path(path)
        text = path.read_text()
        data = _parse_yaml(text, path)
        rd = _Reader(_line_index(text), path)
        if data is None:
            return self
        items = data.get("scenarios") if isinstance(data, dict) else data
        if items is None:
            return self
        if not isinstance(items, list):
            rd.fail(("scenarios",), "registry file must hold a list of scenarios")
        prefix = ("scenarios",) if isinstance(data, dict) else ()
        for i, item in enumerate(items):
            self.register(build_scenario(item, rd, prefix + (i,), origin=f"custom ({path.name})"))
        return self

    def ids(self):
        return list(self._specs)

    def get(self, sid) -> Scenario:
        origin, spec = self._specs[sid]
        return build_scenario(spec, origin=origin)

    def rows(self):
        return [(sid, origin, spec.get("description", "")) for sid, (origin, spec) in self._specs.items()]

    def table(self) -> str:
        rows = self.rows()
        w_id = max(len("id"), *(len(r[0]) for r in rows))
        w_or = max(len("origin"), *(len(r[1]) for r in rows))
        lines = [f"{'id':<{w_id}}  {'origin':<{w_or}}  description"]
        lines += [f"{a:<{w_id}}  {b:<{w_or}}  {c}" for a, b, c in rows]
        return "\n".join(lines)


# -- run plans -------------------------------------------------------------------

@dataclass
class Gate:
    kind: str
    scheme: Optional[str] = None
    quantity: str = "err_E"
    lo: Optional[float] = None
    hi: Optional[float] = None
    r2_min: Optional[float] = None
    name: str = ""


@dataclass
class Plan:
    scenario: Scenario
    schemes: List[str]
    h_list: List[float]
    t_final: float
    refine: int = 16
    substeps: int = 4
    m: Optional[int] = None
    workers: int = 1
    gates: List[Gate] = field(default_factory=list)
    probes: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    source: Optional[str] = None
    registry: Optional[Registry] = None
    gamma: float = 0.0
    dissipativity: float = 0.0

    def describe(self):
        return {"scenario": self.scenario.id, "schemes": list(self.schemes),
                "h_list": list(self.h_list), "t_final": self.t_final, "refine": self.refine,
                "substeps": self.substeps, "m": self.m,
                "gates": [g.__dict__ for g in self.gates], "probes": self.probes}


_DEFAULT_PROBES = {
    "contraction": {"h_list": [0.05, 0.1], "trials": 50, "m": 20},
    "local_error": {"h_list": [0.05, 0.025, 0.0125, 0.00625]},
}


def _parse_gate(spec, rd, path, schemes):
    spec = rd.mapping(spec, path, {"kind", "scheme", "quantity", "min", "max", "r2_min", "name"})
    kind = spec.get("kind")
    if kind not in GATE_KINDS:
        rd.fail(path + ("kind",), f"unknown gate kind {kind!r}; choose from {', '.join(GATE_KINDS)}",
                kind="unknown-name")
    scheme = spec.get("scheme")
    if scheme is not None and scheme not in schemes:
        rd.fail(path + ("scheme",), f"gate scheme {scheme!r} is not among the planned schemes")
    qty = spec.get("quantity", "head" if kind == "local_ratio_spread" else "err_E")
    valid_q = ("head", "E") if kind == "local_ratio_spread" else ERROR_QUANTITIES
    if kind in ("max_error", "decreasing", "local_ratio_spread") and qty not in valid_q:
        rd.fail(path + ("quantity",), f"quantity must be one of {', '.join(valid_q)}")
    lo = None if spec.get("min") is None else rd.number(spec["min"], path + ("min",))
    hi = None if spec.get("max") is None else rd.number(spec["max"], path + ("max",))
    r2 = None if spec.get("r2_min") is None else rd.number(spec["r2_min"], path + ("r2_min",))
    if kind == "order" and (lo is None or hi is None):
        rd.fail(path, "order gate needs 'min' and 'max'")
    if kind in ("max_error", "local_ratio_spread") and hi is None:
        rd.fail(path, f"{kind} gate needs 'max'")
    label = qty if kind in ("max_error", "decreasing", "local_ratio_spread") else None
    name = spec.get("name") or ":".join(x for x in (kind, scheme or "all", label) if x)
    return Gate(kind, scheme, qty, lo, hi, r2, str(name))


def load_config(path, seed=None, refine=None, registry: Optional[Registry] = None) -> Plan:
    """Parse and validate a run plan; raises :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", "parse", path) from None
    data = _parse_yaml(text, path)
    rd = _Reader(_line_index(text), path)
    data = rd.mapping(data if data is not None else {}, (),
                      {"scenario", "schemes", "study", "gates", "probes", "seed", "registry"})
    registry = registry or Registry()
    if "registry" in data:
        reg_path = Path(data["registry"])
        if not reg_path.is_absolute():
            reg_path = path.parent / reg_path
        try:
            registry.load_file(reg_path)
        except OSError:
            rd.fail(("registry",), f"cannot read registry file {reg_path}")

    scen = data.get("scenario")
    if scen is None:
        rd.fail((), "missing required key 'scenario'")
    if isinstance(scen, str):
        if scen not in registry.ids():
            rd.fail(("scenario",), f"unknown scenario {scen!r}; known: {', '.join(registry.ids())}",
                    kind="unknown-name")
        scenario = registry.get(scen)
    else:
        scenario = build_scenario(scen, rd, ("scenario",), origin=f"custom ({path.name})")
        registry.register(scenario)

    schemes = data.get("schemes", ["sequential", "lie_resolvent"])
    if isinstance(schemes, str):
        schemes = [schemes]
    if not isinstance(schemes, list) or not schemes:
        rd.fail(("schemes",), "expected a non-empty list of scheme names")
    for i, s in enumerate(schemes):
        if s not in SCHEMES:
            rd.fail(("schemes", i), f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}",
                    kind="unknown-name")

    study = rd.mapping(data.get("study") or {}, ("study",),
                       {"h_list", "t_final", "refine", "substeps", "m", "workers"})
    raw_h = study.get("h_list", list(DEFAULT_H_LIST))
    if not isinstance(raw_h, list) or not raw_h:
        rd.fail(("study", "h_list"), "expected a non-empty list of step sizes")
    h_list = [rd.number(h, ("study", "h_list", i), positive=True) for i, h in enumerate(raw_h)]
    t_final = rd.number(study.get("t_final", scenario.t_final), ("study", "t_final"), positive=True)
    cfg_refine = rd.number(study.get("refine", 16), ("study", "refine"), positive=True, integer=True)
    refine = cfg_refine if refine is None else int(refine)
    if refine < 4:
        rd.fail(("study", "refine"), f"refine must be >= 4, got {refine}")
    substeps = rd.number(study.get("substeps", 4), ("study", "substeps"), positive=True, integer=True)
    workers = rd.number(study.get("workers", 1), ("study", "workers"), positive=True, integer=True)
    m = study.get("m")
    m = None if m is None else rd.number(m, ("study", "m"), positive=True, integer=True)

    for i, h in enumerate(h_list):
        hp = ("study", "h_list", i)
        if m is not None:
            if abs(h * m - round(h * m)) > 1e-9 or round(h * m) < 1:
                rd.fail(hp, f"h = {h} is not aligned with the history grid: h*m = {h * m:g} is not an integer",
                        kind="alignment")
            if h > 1.0 + 1e-12:
                rd.fail(hp, f"h = {h} exceeds the delay interval", kind="alignment")
        elif abs(1.0 / h - round(1.0 / h)) > 1e-9 * (1.0 / h):
            rd.fail(hp, f"h = {h} is not 1/k for an integer k; set study.m to use multi-cell steps",
                    kind="alignment")
        if abs(t_final / h - round(t_final / h)) > 1e-9 * max(1.0, t_final / h):
            rd.fail(hp, f"t_final = {t_final} is not a multiple of h = {h}", kind="alignment")
    ms = [m] * len(h_list) if m is not None else [int(round(1.0 / h)) for h in h_list]
    if any(max(ms) % k for k in ms):
        rd.fail(("study", "h_list"), "every history resolution must divide the finest one",
                kind="alignment")

    try:
        gamma = gamma_bound(scenario.kernel, scenario.generator.alpha, scenario.p)
    except UnsupportedParameterError as exc:
        rd.fail(("scenario",), str(exc), kind="unsupported")
    resolvent = [s for s in schemes if s != "sequential"]
    if resolvent:
        for i, h in enumerate(h_list):
            if h * gamma >= 1:
                rd.fail(("study", "h_list", i),
                        f"h*gamma = {h * gamma:g} >= 1: resolvent schemes {resolvent} are not covered",
                        kind="unsupported")
            if not scenario.kernel.linear:
                fp = h * scenario.kernel.beta * scenario.kernel.tau(0.0)
                if fp >= 1:
                    rd.fail(("study", "h_list", i),
                            f"h*beta*tau(0) = {fp:g} >= 1: head fixed point is not a contraction",
                            kind="unsupported")

    run_seed = int(data.get("seed", 0)) if seed is None else int(seed)
    if run_seed < 0:
        rd.fail(("seed",), "seed must be non-negative")
    diss = scenario.generator.dissipativity_estimate(64, np.random.default_rng(run_seed))
    if diss > scenario.generator.alpha + 1e-8:
        rd.fail(("scenario",), f"declared alpha = {scenario.generator.alpha} but <Bx, x>/|x|^2 "
                f"reaches {diss:.6g}", kind="dissipativity")

    gates = [_parse_gate(g, rd, ("gates", i), schemes) for i, g in enumerate(data.get("gates") or [])]

    probes_in = data.get("probes", {})
    probes = {}
    if probes_in is not False:
        probes_in = rd.mapping(probes_in or {}, ("probes",), set(_DEFAULT_PROBES))
        for key, default in _DEFAULT_PROBES.items():
            val = probes_in.get(key, {})
            if val is False:
                continue
            val = rd.mapping(val or {}, ("probes", key), set(default))
            merged = dict(default, **val)
            merged["h_list"] = [rd.number(h, ("probes", key, "h_list", i), positive=True)
                                for i, h in enumerate(merged["h_list"])]
            if key == "contraction":
                merged["trials"] = rd.number(merged["trials"], ("probes", key, "trials"),
                                             positive=True, integer=True)
                merged["m"] = rd.number(merged["m"], ("probes", key, "m"), positive=True, integer=True)
                if merged["trials"] < 10:
                    rd.fail(("probes", key, "trials"), "contraction probe needs trials >= 10")
            else:
                for i, h in enumerate(merged["h_list"]):
                    if abs(1.0 / h - round(1.0 / h)) > 1e-9 * (1.0 / h):
                        rd.fail(("probes", key, "h_list", i), f"h = {h} is not 1/k", kind="alignment")
            probes[key] = merged
    for g in gates:
        need = {"contraction": "contraction", "local_ratio_spread": "local_error"}.get(g.kind)
        if need and need not in probes:
            rd.fail(("gates",), f"gate {g.name!r} needs the {need} probe, which is disabled")

    return Plan(scenario, list(schemes), sorted(h_list, reverse=True), t_final, refine, substeps,
                m, workers, gates, probes, run_seed, str(path), registry, gamma, diss)
