"""Experiment configuration.

A config is a YAML (or JSON) mapping with these sections; only ``map`` is
required::

    map:
      family: beta_shift          # beta_shift | doubling | tripling | lorenz |
      params: {beta: 5.9}         # large_hole_tent | bahsoun | piecewise_linear
    hole: [[5/5.9, 1.0]]          # list of [lo, hi]; "a/b" strings allowed
    partition: {kind: uniform, k: 10000}     # or {kind: explicit, edges: [...]}
    solver: {tol: 1.0e-12, max_iter: 1000000, seed: null}
    converge: {k_list: [500, 1000, 2000], reference: null}
    scan: {c_range: [2.001, 2.5], alpha_range: [0.45, 0.95], grid: [20, 20], k: 2000}
    enlarge: {m: 1}
    oracle: {N: 1000000, n_max: 200, seed: 0, window: null, accim_n: null}
    admissible: {epsilon: 0.1, power: 1}

Numbers may be written as ``"a/b"`` strings; they are parsed to floats,
so ``dump(parse(x))`` re-parses to the same config.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .errors import ValidationError
from .holes import OpenSystem
from .intervals import IntervalSet
from .maps import FAMILIES, make_map
from .ulam import Partition


def _num(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                a, b = text.split("/")
                return float(a) / float(b)
            return float(text)
        except (ValueError, ZeroDivisionError):
            pass
    raise ValidationError(f"{where}: expected a number, got {value!r}")


def _int(value: Any, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValidationError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{where}: must be >= {minimum}, got {value!r}")
    return int(value)


def _pair(value: Any, where: str) -> list:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ValidationError(f"{where}: expected a [lo, hi] pair, got {value!r}")
    lo, hi = _num(value[0], f"{where}[0]"), _num(value[1], f"{where}[1]")
    if lo > hi:
        raise ValidationError(f"{where}: lo > hi")
    return [lo, hi]


def _section(raw: dict, name: str, allowed: set) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ValidationError(f"{name}: expected a mapping")
    extra = set(sec) - allowed
    if extra:
        raise ValidationError(f"{name}: unknown field(s) {sorted(extra)}")
    return sec


@dataclass
class ExperimentConfig:
    family: str
    params: dict = field(default_factory=dict)
    hole: list = field(default_factory=list)
    partition: dict = field(default_factory=lambda: {"kind": "uniform", "k": 1000})
    solver: dict = field(default_factory=lambda: {"tol": 1e-12, "max_iter": 1_000_000, "seed": None})
    converge: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    enlarge: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    admissible: dict = field(default_factory=dict)

    # -- parsing -----------------------------------------------------------
    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ValidationError("config: expected a mapping at top level")
        known = {"map", "hole", "partition", "solver", "converge", "scan", "enlarge", "oracle", "admissible"}
        extra = set(raw) - known
        if extra:
            raise ValidationError(f"config: unknown section(s) {sorted(extra)}")
        m = raw.get("map")
        if not isinstance(m, dict) or "family" not in m:
            raise ValidationError("map.family: required")
        family = m["family"]
        if family not in FAMILIES:
            raise ValidationError(f"map.family: unknown family {family!r}")
        params = {}
        for key, val in (m.get("params") or {}).items():
            if isinstance(val, (list, tuple)):
                params[key] = [[_num(v, f"map.params.{key}") for v in item] if isinstance(item, (list, tuple))
                               else _num(item, f"map.params.{key}") for item in val]
            else:
                params[key] = _num(val, f"map.params.{key}")

        hole_raw = raw.get("hole") or []
        if not isinstance(hole_raw, (list, tuple)):
            raise ValidationError("hole: expected a list of [lo, hi] pairs")
        hole = [_pair(p, f"hole[{i}]") for i, p in enumerate(hole_raw)]

        part = _section(raw, "partition", {"kind", "k", "edges"})
        kind = part.get("kind", "uniform")
        if kind == "uniform":
            part = {"kind": "uniform", "k": _int(part.get("k", 1000), "partition.k", 1)}
        elif kind == "explicit":
            edges = part.get("edges")
            if not isinstance(edges, (list, tuple)) or len(edges) < 2:
                raise ValidationError("partition.edges: need at least two edges")
            edges = [_num(e, f"partition.edges[{i}]") for i, e in enumerate(edges)]
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValidationError("partition.edges: must be strictly increasing")
            part = {"kind": "explicit", "edges": edges}
        else:
            raise ValidationError(f"partition.kind: expected uniform or explicit, got {kind!r}")

        s = _section(raw, "solver", {"tol", "max_iter", "seed"})
        solver = {
            "tol": _num(s.get("tol", 1e-12), "solver.tol"),
            "max_iter": _int(s.get("max_iter", 1_000_000), "solver.max_iter", 1),
            "seed": None if s.get("seed") is None else _int(s["seed"], "solver.seed"),
        }
        if not solver["tol"] > 0:
            raise ValidationError("solver.tol: must be positive")

        c = _section(raw, "converge", {"k_list", "reference"})
        converge = {}
        if "k_list" in c:
            ks = c["k_list"]
            if not isinstance(ks, (list, tuple)) or not ks:
                raise ValidationError("converge.k_list: expected a non-empty list")
            converge["k_list"] = [_int(k, f"converge.k_list[{i}]", 1) for i, k in enumerate(ks)]
        if c.get("reference") is not None:
            converge["reference"] = _num(c["reference"], "converge.reference")

        sc = _section(raw, "scan", {"c_range", "alpha_range", "grid", "k"})
        scan = {}
        if sc:
            scan["c_range"] = _pair(sc.get("c_range", [2.001, 2.5]), "scan.c_range")
            scan["alpha_range"] = _pair(sc.get("alpha_range", [0.45, 0.95]), "scan.alpha_range")
            g = sc.get("grid", [20, 20])
            if isinstance(g, (int, float)):
                g = [g, g]
            if not isinstance(g, (list, tuple)) or len(g) != 2:
                raise ValidationError("scan.grid: expected [n_c, n_alpha]")
            scan["grid"] = [_int(g[0], "scan.grid[0]", 1), _int(g[1], "scan.grid[1]", 1)]
            scan["k"] = _int(sc.get("k", part.get("k", 2000)), "scan.k", 1)
            lo, hi = scan["alpha_range"]
            if not (0 < lo and hi < 1):
                raise ValidationError("scan.alpha_range: must lie in (0, 1)")
            if not scan["c_range"][0] > 0:
                raise ValidationError("scan.c_range: c must be positive")

        e = _section(raw, "enlarge", {"m"})
        enlarge = {"m": _int(e["m"], "enlarge.m", 0)} if "m" in e else {}

        o = _section(raw, "oracle", {"N", "n_max", "seed", "window", "accim_n"})
        oracle = {}
        if o:
            oracle["N"] = _int(o.get("N", 1_000_000), "oracle.N", 1)
            oracle["n_max"] = _int(o.get("n_max", 200), "oracle.n_max", 1)
            oracle["seed"] = _int(o.get("seed", 0), "oracle.seed")
            oracle["window"] = None if o.get("window") is None else [
                _int(v, "oracle.window", 0) for v in o["window"]]
            oracle["accim_n"] = None if o.get("accim_n") is None else _int(o["accim_n"], "oracle.accim_n", 0)

        a = _section(raw, "admissible", {"epsilon", "power"})
        admissible = {}
        if a:
            admissible["epsilon"] = _num(a.get("epsilon", 0.1), "admissible.epsilon")
            if not admissible["epsilon"] > 0:
                raise ValidationError("admissible.epsilon: must be positive")
            admissible["power"] = _int(a.get("power", 1), "admissible.power", 1)

        cfg = cls(family, params, hole, part, solver, converge, scan, enlarge, oracle, admissible)
        cfg.build_map()  # surfaces parameter errors at parse time
        return cfg

    def to_dict(self) -> dict:
        out = {"map": {"family": self.family, "params": dict(self.params)}, "hole": [list(p) for p in self.hole],
               "partition": dict(self.partition), "solver": dict(self.solver)}
        for name in ("converge", "scan", "enlarge", "oracle", "admissible"):
            sec = getattr(self, name)
            if sec:
                out[name] = dict(sec)
        return out

    # -- builders ----------------------------------------------------------
    def build_map(self):
        try:
            return make_map(self.family, self.params)
        except ValidationError as exc:
            raise ValidationError(f"map.params: {exc}") from None

    def build_system(self) -> OpenSystem:
        try:
            return OpenSystem(self.build_map(), IntervalSet(self.hole))
        except ValidationError as exc:
            raise ValidationError(f"hole: {exc}") from None

    def build_partition(self, domain, k: Optional[int] = None) -> Partition:
        if k is not None or self.partition["kind"] == "uniform":
            return Partition.uniform(domain, k if k is not None else self.partition["k"])
        return Partition.explicit(self.partition["edges"])


def parse_text(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ValidationError(f"config: not valid YAML or JSON ({exc})") from None
    return ExperimentConfig.from_dict(raw)


def load(path) -> ExperimentConfig:
    return parse_text(Path(path).read_text())


def dump(cfg: ExperimentConfig, fmt: str = "yaml") -> str:
    data = cfg.to_dict()
    if fmt == "json":
        return json.dumps(data, indent=2)
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)
