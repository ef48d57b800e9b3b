"""Evidence the primitives are evaluated against.

State-pair file (``*.pair.json``)::

    {"format": "unitphysics.pair", "version": 1, "name": "shock",
     "units": {"h": "J/kg", "p": "Pa", "v": "m3/kg", "T": "K"},
     "state1": {"h": ..., "p": ..., "v": ..., "T": ...,
                "composition": {"H2O": 0.2, ...}, "basis": "mole", "mach": null},
     "state2": {...}}

Every state field is optional, and a check that needs a missing field
reports a spec error. ``basis`` tags ``composition`` as ``mass`` or ``mole``
fractions and must be given whenever a composition is present.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from ..reactor.trajectory import Trajectory, read_header
from ..thermochem import MechanismSpec

PAIR_FORMAT = "unitphysics.pair"
PAIR_UNITS = {"h": "J/kg", "p": "Pa", "v": "m3/kg", "T": "K"}


class EvidenceError(ValueError):
    pass


@dataclass(frozen=True)
class ThermoPoint:
    """One thermodynamic state of a jump or product-state comparison."""

    h: float | None = None
    p: float | None = None
    v: float | None = None
    T: float | None = None
    composition: Mapping[str, float] | None = None
    basis: str | None = None
    mach: float | None = None

    def __post_init__(self):
        for name in ("p", "v", "T"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value > 0):
                raise EvidenceError(f"state field {name} must be positive, got {value!r}")
        if self.composition is not None and self.basis not in ("mass", "mole"):
            raise EvidenceError("a composition needs basis 'mass' or 'mole'")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThermoPoint":
        unknown = set(d) - {"h", "p", "v", "rho", "T", "composition", "basis", "mach"}
        if unknown:
            raise EvidenceError(f"unknown state fields {sorted(unknown)}")
        v = d.get("v")
        if v is None and d.get("rho") is not None:
            v = 1.0 / float(d["rho"])
        opt = lambda k: None if d.get(k) is None else float(d[k])  # noqa: E731
        comp = d.get("composition")
        return cls(h=opt("h"), p=opt("p"), v=None if v is None else float(v), T=opt("T"),
                   composition=None if comp is None else {str(k): float(x) for k, x in comp.items()},
                   basis=d.get("basis"), mach=opt("mach"))

    def to_dict(self) -> dict:
        return {"h": self.h, "p": self.p, "v": self.v, "T": self.T,
                "composition": None if self.composition is None else dict(self.composition),
                "basis": self.basis, "mach": self.mach}


@dataclass(frozen=True)
class StatePair:
    state1: ThermoPoint
    state2: ThermoPoint
    name: str = "default"

    @classmethod
    def from_dict(cls, d: Mapping, name: str | None = None) -> "StatePair":
        if d.get("format", PAIR_FORMAT) != PAIR_FORMAT:
            raise EvidenceError("not a state-pair document")
        units = d.get("units", PAIR_UNITS)
        bad = {k: units[k] for k in PAIR_UNITS if k in units and units[k] != PAIR_UNITS[k]}
        if bad:
            raise EvidenceError(f"state-pair units must be SI ({PAIR_UNITS}); got {bad}")
        try:
            s1, s2 = d["state1"], d["state2"]
        except KeyError as exc:
            raise EvidenceError(f"state pair is missing {exc.args[0]}") from None
        return cls(ThermoPoint.from_dict(s1), ThermoPoint.from_dict(s2),
                   name=str(d.get("name") or name or "default"))

    def to_dict(self) -> dict:
        return {"format": PAIR_FORMAT, "version": 1, "name": self.name, "units": dict(PAIR_UNITS),
                "state1": self.state1.to_dict(), "state2": self.state2.to_dict()}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "StatePair":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise EvidenceError(f"{path}: invalid JSON ({exc.msg})") from None
        stem = path.name.removesuffix(".json").removesuffix(".pair")
        try:
            return cls.from_dict(doc, name=stem)
        except EvidenceError as exc:
            raise EvidenceError(f"{path}: {exc}") from None


@dataclass
class Evidence:
    """Inputs for a suite: a trajectory, named state pairs and a header.

    ``header`` defaults to the trajectory header when only a trajectory is
    given. ``mech`` supplies molecular weights for the EOS residual.
    """

    trajectory: Trajectory | None = None
    mech: MechanismSpec | None = None
    pairs: dict[str, StatePair] = field(default_factory=dict)
    header: Mapping | None = None

    def __post_init__(self):
        if isinstance(self.pairs, StatePair):
            self.pairs = {self.pairs.name: self.pairs}
        elif not isinstance(self.pairs, dict):
            self.pairs = {p.name: p for p in self.pairs}
        if self.header is None and self.trajectory is not None:
            self.header = self.trajectory.header()

    @classmethod
    def from_files(cls, trajectory: str | Path | None = None, pairs=(), mech: MechanismSpec | None = None,
                   header: str | Path | None = None) -> "Evidence":
        traj = None if trajectory is None else Trajectory.read(trajectory)
        loaded = [StatePair.read(p) for p in pairs]
        hdr = None if header is None else read_header(header)
        return cls(trajectory=traj, mech=mech, pairs={p.name: p for p in loaded}, header=hdr)
