"""Trajectory container and its line-delimited JSON file format.

File layout: the first line is a header object::

    {"format": "unitphysics.trajectory", "version": 1,
     "species": [...], "columns": [...], "units": {column: unit},
     "metadata": {...}}

and every following line is a JSON array of floats in ``columns`` order.
Columns are ``t, T, rho, p`` and ``Y_<species>`` (required) plus the
optional ``dTdt, u, h`` and ``omega_<species>`` (mass production rate).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from ..thermochem import MechanismSpec, MixtureState

FORMAT = "unitphysics.trajectory"
VERSION = 1

BASE_UNITS = {
    "t": "s",
    "T": "K",
    "rho": "kg/m3",
    "p": "Pa",
    "dTdt": "K/s",
    "u": "J/kg",
    "h": "J/kg",
}
Y_UNIT = "-"
OMEGA_UNIT = "kg/m3/s"


class TrajectoryFormatError(ValueError):
    pass


@dataclass
class Trajectory:
    """Time-ordered thermochemical records of one run."""

    t: np.ndarray
    T: np.ndarray
    rho: np.ndarray
    p: np.ndarray
    Y: np.ndarray  # (n, n_species)
    species: tuple[str, ...]
    dTdt: np.ndarray | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        self.T = np.asarray(self.T, dtype=float)
        self.rho = np.broadcast_to(np.asarray(self.rho, dtype=float), (n,)).copy()
        self.p = np.asarray(self.p, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float).reshape(n, len(self.species))
        if self.dTdt is not None:
            self.dTdt = np.asarray(self.dTdt, dtype=float)
        for name, col in (("T", self.T), ("p", self.p)):
            if col.shape != (n,):
                raise TrajectoryFormatError(f"column {name} has shape {col.shape}, expected ({n},)")
        self.species = tuple(self.species)
        if not self.units:
            self.units = self.default_units()

    def __len__(self) -> int:
        return self.t.shape[0]

    def default_units(self) -> dict[str, str]:
        units = {k: BASE_UNITS[k] for k in self.columns() if k in BASE_UNITS}
        for c in self.columns():
            if c.startswith("Y_"):
                units[c] = Y_UNIT
            elif c.startswith("omega_"):
                units[c] = OMEGA_UNIT
        return units

    def columns(self) -> list[str]:
        cols = ["t", "T", "rho", "p"]
        if self.dTdt is not None:
            cols.append("dTdt")
        cols += [k for k in ("u", "h") if k in self.extra]
        cols += [f"Y_{s}" for s in self.species]
        if "omega" in self.extra:
            cols += [f"omega_{s}" for s in self.species]
        return cols

    def species_column(self, name: str) -> np.ndarray:
        try:
            return self.Y[:, self.species.index(name)]
        except ValueError:
            raise KeyError(f"species {name!r} not in trajectory") from None

    def state(self, i: int, mech: MechanismSpec) -> MixtureState:
        Y = np.zeros(mech.n_species)
        for j, s in enumerate(self.species):
            Y[mech.species_index(s)] = self.Y[i, j]
        return MixtureState(self.T[i], self.rho[i], Y, mech)

    def records(self, mech: MechanismSpec) -> Iterator[tuple[float, MixtureState, float | None]]:
        for i in range(len(self)):
            yield self.t[i], self.state(i, mech), (None if self.dTdt is None else self.dTdt[i])

    def header(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "species": list(self.species),
            "columns": self.columns(),
            "units": dict(self.units),
            "metadata": self.metadata,
        }

    def _matrix(self) -> np.ndarray:
        parts = [self.t[:, None], self.T[:, None], self.rho[:, None], self.p[:, None]]
        if self.dTdt is not None:
            parts.append(self.dTdt[:, None])
        parts += [self.extra[k][:, None] for k in ("u", "h") if k in self.extra]
        parts.append(self.Y)
        if "omega" in self.extra:
            parts.append(self.extra["omega"])
        return np.hstack(parts)

    def write(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for row in self._matrix():
                fh.write(json.dumps([float(x) for x in row]) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "Trajectory":
        path = Path(path)
        with path.open() as fh:
            try:
                header = json.loads(fh.readline())
                rows = [json.loads(line) for line in fh if line.strip()]
            except json.JSONDecodeError as exc:
                raise TrajectoryFormatError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_header_rows(header, rows, source=str(path))

    @classmethod
    def from_header_rows(cls, header: Mapping, rows, source: str = "<rows>") -> "Trajectory":
        if header.get("format") != FORMAT:
            raise TrajectoryFormatError(f"{source}: not a trajectory file")
        cols = list(header["columns"])
        species = tuple(header["species"])
        data = np.array(rows, dtype=float).reshape(len(rows), len(cols))
        col = {c: data[:, i] for i, c in enumerate(cols)}
        missing = [c for c in ["t", "T", "rho", "p"] + [f"Y_{s}" for s in species] if c not in col]
        if missing:
            raise TrajectoryFormatError(f"{source}: missing columns {missing}")
        extra = {k: col[k] for k in ("u", "h") if k in col}
        if all(f"omega_{s}" in col for s in species) and species:
            extra["omega"] = np.column_stack([col[f"omega_{s}"] for s in species])
        traj = cls(
            t=col["t"],
            T=col["T"],
            rho=col["rho"],
            p=col["p"],
            Y=np.column_stack([col[f"Y_{s}"] for s in species]) if species else np.zeros((len(rows), 0)),
            species=species,
            dTdt=col.get("dTdt"),
            extra=extra,
            units=dict(header.get("units", {})),
            metadata=dict(header.get("metadata", {})),
        )
        return traj


def read_header(path: str | Path) -> dict:
    """Only the header block of a trajectory file."""
    with Path(path).open() as fh:
        try:
            return json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise TrajectoryFormatError(f"{path}: invalid header ({exc})") from None
