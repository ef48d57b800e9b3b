"""Declarative unit-physics suites.

Suite document (JSON)::

    {
      "name": "reactor",
      "version": "1",
      "primitives": [
        {"id": "mass", "kind": "mass_closure", "epsilon": 1e-10},
        {"id": "eos", "kind": "eos_residual", "epsilon": 1e-12, "params": {"basis": "relative"}},
        {"id": "bounds", "kind": "bounds", "params": {"T_min": 200, "T_max": 4000}},
        ...
      ]
    }

Kinds, their tolerance and parameters:

=========================  ===========  =====================================
kind                       epsilon      params
=========================  ===========  =====================================
mass_closure               required     none
eos_residual               required     basis: "absolute" [Pa] | "relative"
bounds                     not used     T_min, T_max [K]
inert_conservation         required     species
dimensional_consistency    not used     expected: {column: unit tag}
rh_energy_closure          required     pair (J/kg)
cj_mach                    required     pair
znd_hp_consistency         not used     pair, species, eps_T, eps_chi
=========================  ===========  =====================================

The three pair-scoped kinds name the state pair they audit through
``params.pair`` (default ``"default"``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

KINDS = (
    "mass_closure",
    "eos_residual",
    "bounds",
    "inert_conservation",
    "dimensional_consistency",
    "rh_energy_closure",
    "cj_mach",
    "znd_hp_consistency",
)

# kind -> (epsilon required, required params, optional params with defaults)
_SCHEMA: dict[str, tuple[bool, tuple[str, ...], dict[str, Any]]] = {
    "mass_closure": (True, (), {}),
    "eos_residual": (True, (), {"basis": "absolute"}),
    "bounds": (False, ("T_min", "T_max"), {}),
    "inert_conservation": (True, ("species",), {}),
    "dimensional_consistency": (False, ("expected",), {}),
    "rh_energy_closure": (True, (), {"pair": "default"}),
    "cj_mach": (True, (), {"pair": "default"}),
    "znd_hp_consistency": (False, ("species", "eps_T", "eps_chi"), {"pair": "default"}),
}

TRAJECTORY_KINDS = frozenset({"mass_closure", "eos_residual", "bounds", "inert_conservation"})
PAIR_KINDS = frozenset({"rh_energy_closure", "cj_mach", "znd_hp_consistency"})


class SuiteError(ValueError):
    """Malformed or invalid suite document; ``path`` locates the problem."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.reason = message
        self.path = path


def _positive(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SuiteError(f"expected a number, got {value!r}", path)
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise SuiteError(f"must be a finite number > 0, got {value!r}", path)
    return value


@dataclass(frozen=True)
class PrimitiveSpec:
    id: str
    kind: str
    epsilon: float | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        validate_primitive(self)

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": self.kind}
        if self.epsilon is not None:
            d["epsilon"] = self.epsilon
        d["params"] = dict(self.params)
        if self.description:
            d["description"] = self.description
        return d


@dataclass(frozen=True)
class PrimitiveSuite:
    name: str
    version: str
    primitives: tuple[PrimitiveSpec, ...]

    def __post_init__(self):
        seen = set()
        for i, p in enumerate(self.primitives):
            if p.id in seen:
                raise SuiteError(f"duplicate primitive id {p.id!r}", f"$.primitives[{i}].id")
            seen.add(p.id)

    def __len__(self) -> int:
        return len(self.primitives)

    def __iter__(self):
        return iter(self.primitives)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.primitives]

    def to_dict(self) -> dict:
        return {"name": self.name, "version": self.version,
                "primitives": [p.to_dict() for p in self.primitives]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def validate_primitive(p: PrimitiveSpec, path: str = "$") -> None:
    if p.kind not in _SCHEMA:
        raise SuiteError(f"unknown primitive kind {p.kind!r}; expected one of {', '.join(KINDS)}",
                         f"{path}.kind")
    needs_eps, required, _ = _SCHEMA[p.kind]
    if needs_eps:
        if p.epsilon is None:
            raise SuiteError(f"kind {p.kind} requires epsilon", f"{path}.epsilon")
        _positive(p.epsilon, f"{path}.epsilon")
    missing = [k for k in required if k not in p.params]
    if missing:
        raise SuiteError(f"kind {p.kind} is missing params {missing}", f"{path}.params")
    prm = p.params
    if p.kind == "bounds":
        lo, hi = prm["T_min"], prm["T_max"]
        for key in ("T_min", "T_max"):
            if isinstance(prm[key], bool) or not isinstance(prm[key], (int, float)):
                raise SuiteError(f"{key} must be a number", f"{path}.params.{key}")
        if not lo < hi:
            raise SuiteError("T_min must be below T_max", f"{path}.params")
    elif p.kind == "eos_residual":
        if prm.get("basis", "absolute") not in ("absolute", "relative"):
            raise SuiteError("basis must be 'absolute' or 'relative'", f"{path}.params.basis")
    elif p.kind == "inert_conservation":
        if not isinstance(prm["species"], str) or not prm["species"]:
            raise SuiteError("species must be a species name", f"{path}.params.species")
    elif p.kind == "dimensional_consistency":
        exp = prm["expected"]
        if not isinstance(exp, Mapping) or not exp or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in exp.items()):
            raise SuiteError("expected must be a non-empty {column: unit} map", f"{path}.params.expected")
    elif p.kind == "znd_hp_consistency":
        sp = prm["species"]
        if not isinstance(sp, (list, tuple)) or not sp or not all(isinstance(s, str) for s in sp):
            raise SuiteError("species must be a non-empty list of names", f"{path}.params.species")
        _positive(prm["eps_T"], f"{path}.params.eps_T")
        _positive(prm["eps_chi"], f"{path}.params.eps_chi")


def _primitive_from_dict(entry, path: str) -> PrimitiveSpec:
    if not isinstance(entry, Mapping):
        raise SuiteError("primitive entry must be an object", path)
    unknown = set(entry) - {"id", "kind", "epsilon", "params", "description"}
    if unknown:
        raise SuiteError(f"unknown fields {sorted(unknown)}", path)
    for key in ("id", "kind"):
        if not isinstance(entry.get(key), str) or not entry[key]:
            raise SuiteError(f"missing or empty {key!r}", f"{path}.{key}")
    kind = entry["kind"]
    if kind not in _SCHEMA:
        raise SuiteError(f"unknown primitive kind {kind!r}; expected one of {', '.join(KINDS)}",
                         f"{path}.kind")
    params = entry.get("params", {})
    if not isinstance(params, Mapping):
        raise SuiteError("params must be an object", f"{path}.params")
    params = {**_SCHEMA[kind][2], **params}
    eps = entry.get("epsilon")
    if eps is not None:
        eps = _positive(eps, f"{path}.epsilon")
    try:
        spec = PrimitiveSpec(id=entry["id"], kind=kind, epsilon=eps, params=params,
                             description=str(entry.get("description", "")))
    except SuiteError as exc:
        raise SuiteError(exc.reason, path + exc.path[1:]) from None
    return spec


def suite_from_dict(doc, source: str = "$") -> PrimitiveSuite:
    if not isinstance(doc, Mapping):
        raise SuiteError("suite document must be an object", source)
    prims = doc.get("primitives")
    if not isinstance(prims, list):
        raise SuiteError("'primitives' must be a list", "$.primitives")
    specs = tuple(_primitive_from_dict(e, f"$.primitives[{i}]") for i, e in enumerate(prims))
    return PrimitiveSuite(name=str(doc.get("name", "")), version=str(doc.get("version", "")),
                          primitives=specs)


def parse_suite(text: str) -> PrimitiveSuite:
    """Parse and validate a JSON suite document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SuiteError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}") from None
    return suite_from_dict(doc)


def load_suite(path: str | Path) -> PrimitiveSuite:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"suite file not found: {path}")
    try:
        return parse_suite(path.read_text())
    except SuiteError as exc:
        raise SuiteError(exc.reason, f"{path}:{exc.path}") from None


def default_suite_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "reactor_suite.json"


def default_suite() -> PrimitiveSuite:
    """The shipped five-primitive reactor suite."""
    return load_suite(default_suite_path())
