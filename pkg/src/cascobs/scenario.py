"""Scenario files: the configuration format of the command line front end.

A scenario is a YAML document with nested sections and numeric arrays:

.. code-block:: yaml

    kind: heat                    # finite_cascade | delay | heat | regulation
    name: unstable-heat-mu4
    system:                       # kind-specific matrices as nested lists
      mu: 4.0
      A1: [[0, -1], [1, 0]]
      B1: [[1], [1]]
      C1: [[1, 1]]
    design:                       # pole lists or explicit gains
      F0: [[-1], [-1]]
      modal_poles: [-2]
    sim:                          # stepping and recording cadence
      dt: 4.0e-5
      dx: 0.01
      T: 3.0
      record_every: 250
    initial:                      # vectors, or expressions in x for fields
      v: [1, 1]
      w: "sin(pi*x)"
      vhat: [0, 0]
      what: "0"
    input: "0"                    # expression in t
    outputs:
      directory: out/heat
      snapshot_times: [0, 1, 2, 3]

Field expressions may use x (or t for the input), pi, e, and the
elementary functions sin, cos, tan, sinh, cosh, tanh, exp, sqrt, abs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .engine import SimConfig, SpatialFunction
from .exceptions import ScenarioError

__all__ = [
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "scenario_to_dict",
    "save_scenario",
    "compile_expression",
]

KINDS = ("finite_cascade", "delay", "heat", "regulation")

_SYSTEM_FIELDS = {
    "finite_cascade": ["A1", "B1", "C1", "A2", "B2", "C2"],
    "delay": ["A2", "B2", "C2", "tau"],
    "heat": ["mu", "A1", "B1", "C1"],
    "regulation": ["A1", "B1", "Bd", "C1", "A2", "Cd", "C2"],
}

_INITIAL_FIELDS = {
    "finite_cascade": ["x1", "x2", "xhat1", "xhat2"],
    "delay": ["x2", "w", "xhat", "what"],
    "heat": ["v", "w", "vhat", "what"],
    "regulation": ["z1", "z2", "zhat1", "zhat2"],
}

_SPATIAL_FIELDS = {"w", "what"}

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs,
    "pi": math.pi, "e": math.e,
}


def compile_expression(expr, var: str):
    """Compile a scalar expression string into a vectorized callable.

    Only the names listed in the module docstring plus the variable
    ``var`` are visible.  Numbers are accepted directly.
    """
    if isinstance(expr, (int, float)):
        value = float(expr)
        return lambda v: value * np.ones_like(np.asarray(v, dtype=float))
    if not isinstance(expr, str):
        raise ScenarioError(f"expected a number or expression string, got {expr!r}")
    try:
        code = compile(expr, "<scenario>", "eval")
    except SyntaxError as exc:
        raise ScenarioError(f"bad expression {expr!r}: {exc}") from exc
    for name in code.co_names:
        if name != var and name not in _EXPR_NAMES:
            raise ScenarioError(
                f"expression {expr!r} uses unknown name {name!r} "
                f"(allowed: {var}, {', '.join(sorted(_EXPR_NAMES))})")

    def fn(v):
        v = np.asarray(v, dtype=float)
        env = dict(_EXPR_NAMES)
        env[var] = v
        out = eval(code, {"__builtins__": {}}, env)  # noqa: S307 (whitelisted names)
        return np.broadcast_to(np.asarray(out, dtype=float), v.shape).copy()

    try:
        fn(np.array([0.0, 0.5]))
    except Exception as exc:
        raise ScenarioError(f"expression {expr!r} failed to evaluate: {exc}") from exc
    return fn


@dataclass
class Scenario:
    """Validated in-memory form of a scenario file."""

    kind: str
    system: dict
    design: dict
    sim: SimConfig
    initial: dict
    input_expr: str = "0"
    name: str = ""
    outputs: dict = field(default_factory=dict)

    def input_signal(self):
        """The control input as a callable t -> float."""
        fn = compile_expression(self.input_expr, "t")
        return lambda t: float(fn(np.asarray(t, dtype=float)))

    def spatial_initial(self, key: str, grid: int, length: float) -> SpatialFunction:
        """Evaluate an initial field on grid+1 uniform samples of [0, length]."""
        xs = np.linspace(0.0, length, grid + 1)
        raw = self.initial[key]
        if isinstance(raw, (list, tuple, np.ndarray)):
            vals = np.asarray(raw, dtype=float)
            if vals.shape != xs.shape:
                raise ScenarioError(
                    f"initial.{key}: sampled field needs {grid + 1} values, "
                    f"got {vals.shape}")
        else:
            vals = compile_expression(raw, "x")(xs)
        return SpatialFunction(length, vals)

    def vector_initial(self, key: str, n: int) -> np.ndarray:
        vals = np.asarray(self.initial[key], dtype=float).ravel()
        if vals.shape != (n,):
            raise ScenarioError(
                f"initial.{key}: expected {n} values, got shape {vals.shape}")
        return vals


def _as_array(raw, path: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: not numeric: {exc}") from exc
    if arr.ndim > 2:
        raise ScenarioError(f"{path}: must be a scalar, vector or matrix")
    if arr.ndim == 2 and any(len(row) != len(raw[0]) for row in raw):
        raise ScenarioError(f"{path}: ragged rows")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{path}: non-finite entries")
    return arr


def _check_conjugate_closed(poles, path: str) -> list:
    try:
        vals = [complex(v) for v in np.atleast_1d(poles)]
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: not a pole list: {exc}") from exc
    coeffs = np.poly(np.asarray(vals))
    if np.abs(coeffs.imag).max() > 1e-9 * max(1.0, np.abs(coeffs.real).max()):
        raise ScenarioError(f"{path}: pole set is not closed under conjugation")
    return vals


def parse_scenario(doc: dict, source: str = "<dict>") -> Scenario:
    """Validate a raw mapping into a :class:`Scenario`."""
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ScenarioError(
            f"{source}: kind must be one of {KINDS}, got {kind!r}")
    missing = [k for k in ("system", "design", "sim", "initial") if k not in doc]
    if missing:
        raise ScenarioError(f"{source}: missing sections {missing}")

    system = {}
    raw_sys = doc["system"]
    for key in _SYSTEM_FIELDS[kind]:
        if key not in raw_sys:
            raise ScenarioError(f"{source}: system.{key} is required for kind {kind}")
        if key in ("mu", "tau"):
            system[key] = float(raw_sys[key])
        else:
            system[key] = _as_array(raw_sys[key], f"system.{key}")
    extra = set(raw_sys) - set(_SYSTEM_FIELDS[kind])
    if extra:
        raise ScenarioError(f"{source}: unknown system fields {sorted(extra)}")

    design = dict(doc["design"])
    for key, val in design.items():
        if key.endswith("_poles"):
            design[key] = _check_conjugate_closed(val, f"design.{key}")
        elif key in ("F0",):
            design[key] = _as_array(val, f"design.{key}")
        elif key == "grid":
            design[key] = int(val)
        elif key == "form":
            if val not in ("conjugated", "direct"):
                raise ScenarioError(
                    f"{source}: design.form must be 'conjugated' or 'direct'")
        else:
            raise ScenarioError(f"{source}: unknown design field {key!r}")

    raw_sim = doc["sim"]
    try:
        sim = SimConfig(dt=float(raw_sim["dt"]), T=float(raw_sim["T"]),
                        dx=float(raw_sim.get("dx", 0.0)),
                        record_every=int(raw_sim.get("record_every", 1)))
    except KeyError as exc:
        raise ScenarioError(f"{source}: sim.{exc.args[0]} is required") from exc

    initial = dict(doc["initial"])
    for key in _INITIAL_FIELDS[kind]:
        if key not in initial:
            raise ScenarioError(f"{source}: initial.{key} is required for kind {kind}")
    for key, val in initial.items():
        if key in _SPATIAL_FIELDS and kind in ("delay", "heat"):
            if isinstance(val, str):
                compile_expression(val, "x")  # validate now
        else:
            initial[key] = _as_array(val, f"initial.{key}").ravel().tolist()

    input_expr = doc.get("input", "0")
    compile_expression(input_expr, "t")

    outputs = dict(doc.get("outputs", {}))
    if "snapshot_times" in outputs:
        outputs["snapshot_times"] = [float(t) for t in outputs["snapshot_times"]]
    if "series" in outputs:
        outputs["series"] = [str(s) for s in outputs["series"]]

    return Scenario(kind=kind, system=system, design=design, sim=sim,
                    initial=initial, input_expr=input_expr,
                    name=str(doc.get("name", "")), outputs=outputs)


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario YAML file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed YAML in {path}: {exc}") from exc
    return parse_scenario(doc, source=path)


def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        # complex poles round-trip as complex-literal strings
        return value.real if value.imag == 0 else str(value)
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def scenario_to_dict(sc: Scenario) -> dict:
    """Serializable mapping that re-parses to an equivalent scenario."""
    doc = {
        "kind": sc.kind,
        "system": _plain(sc.system),
        "design": _plain(sc.design),
        "sim": {"dt": sc.sim.dt, "T": sc.sim.T, "dx": sc.sim.dx,
                "record_every": sc.sim.record_every},
        "initial": _plain(sc.initial),
        "input": sc.input_expr,
    }
    if sc.name:
        doc["name"] = sc.name
    if sc.outputs:
        doc["outputs"] = _plain(sc.outputs)
    return doc


def save_scenario(sc: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)
