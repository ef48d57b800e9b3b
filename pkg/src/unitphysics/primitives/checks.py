"""Executable unit-physics checks.

Every check returns a :class:`CheckVerdict` and never alters its input.
Residual-typed checks pass iff ``residual <= threshold``. ``bounds`` and
``dimensional_consistency`` are predicates with threshold 0: their residual
is the worst excursion outside the admissible set (``<= 0`` inside it) and
the number of unit mismatches, respectively.
"""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from ..constants import GAS_CONSTANT
from ..reactor.trajectory import Trajectory
from ..thermochem import MechanismSpec
from .evidence import StatePair


class PrimitiveSpecError(ValueError):
    """The check cannot run on this evidence (unknown species, field absent)."""


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


@dataclass
class CheckVerdict:
    id: str
    kind: str
    passed: bool
    residual: float | None
    threshold: float | None
    location: dict | None = None
    message: str = ""
    status: str = ""  # pass | fail | not_evaluable | spec_error
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.passed else "fail"

    @property
    def evaluable(self) -> bool:
        return self.status in ("pass", "fail")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "passed": self.passed,
            "residual": _num(self.residual),
            "threshold": _num(self.threshold),
            "location": self.location,
            "message": self.message,
            "details": _clean(self.details),
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _where(traj: Trajectory, i: int) -> dict:
    return {"index": int(i), "t": float(traj.t[i])}


def _verdict(id_, kind, residual, threshold, **kw) -> CheckVerdict:
    passed = bool(residual <= threshold)  # NaN residual fails
    return CheckVerdict(id_, kind, passed, float(residual), float(threshold), **kw)


def _require_records(traj: Trajectory):
    if len(traj) == 0:
        raise PrimitiveSpecError("trajectory has no records")


# --- trajectory-scoped ----------------------------------------------------

def check_mass_closure(traj: Trajectory, epsilon: float, id: str = "mass_closure") -> CheckVerdict:
    """``max_t |sum_i Y_i(t) - 1| <= epsilon``."""
    _require_records(traj)
    err = np.abs(traj.Y.sum(axis=1) - 1.0)
    i = int(np.nanargmax(err)) if not np.all(np.isnan(err)) else 0
    res = float(np.nan if np.isnan(err).any() else err[i])
    return _verdict(id, "mass_closure", res, epsilon, location=_where(traj, i),
                    message=f"max |sum(Y) - 1| = {res:.3e} at t = {traj.t[i]:.6e} s")


def check_eos_residual(traj: Trajectory, mech: MechanismSpec, epsilon: float, basis: str = "absolute",
                       id: str = "eos_residual") -> CheckVerdict:
    """Ideal-gas residual ``|p - rho R T / W_bar|``, absolute [Pa] or relative to p."""
    _require_records(traj)
    missing = [s for s in traj.species if s not in mech.species_by_name]
    if missing:
        raise PrimitiveSpecError(f"species {missing} are not in mechanism {mech.id}")
    W = np.array([mech.species_by_name[s].W for s in traj.species])
    p_eos = traj.rho * GAS_CONSTANT * traj.T * (traj.Y @ (1.0 / W))
    absolute = np.abs(traj.p - p_eos)
    relative = absolute / np.abs(traj.p)
    err = relative if basis == "relative" else absolute
    bad = ~np.isfinite(err)
    i = int(np.argmax(bad)) if bad.any() else int(np.argmax(err))
    res = float("nan") if bad.any() else float(err[i])
    unit = "" if basis == "relative" else " Pa"
    return _verdict(id, "eos_residual", res, epsilon, location=_where(traj, i),
                    message=f"max {basis} EOS residual = {res:.3e}{unit} at t = {traj.t[i]:.6e} s",
                    details={"basis": basis, "max_absolute": float(np.nanmax(absolute)),
                             "max_relative": float(np.nanmax(relative))})


def check_bounds(traj: Trajectory, T_min: float, T_max: float, id: str = "bounds") -> CheckVerdict:
    """``0 <= Y_i <= 1``, ``T_min <= T <= T_max``, ``p > 0``, ``rho > 0`` on every record."""
    _require_records(traj)
    quantities = {"T": np.maximum(T_min - traj.T, traj.T - T_max), "p": -traj.p, "rho": -traj.rho}
    for j, s in enumerate(traj.species):
        quantities[f"Y_{s}"] = np.maximum(-traj.Y[:, j], traj.Y[:, j] - 1.0)
    strict = {"p", "rho"}  # must be > 0, the others admit equality
    first: tuple[int, str] | None = None
    worst: dict[str, dict] = {}
    margin = -np.inf
    for name, exc in quantities.items():
        exc = np.where(np.isnan(exc), np.inf, exc)
        viol = exc >= 0 if name in strict else exc > 0
        if viol.any():
            i = int(np.argmax(exc))
            worst[name] = {"excursion": float(exc[i]), **_where(traj, i)}
            k = int(np.argmax(viol))
            if first is None or k < first[0]:
                first = (k, name)
        else:
            margin = max(margin, float(exc.max()))
    if first is None:
        return CheckVerdict(id, "bounds", True, margin, 0.0, location=None,
                            message=f"all {len(traj)} records within bounds",
                            details={"T_min": T_min, "T_max": T_max})
    k, name = first
    value = traj.T[k] if name == "T" else traj.p[k] if name == "p" else traj.rho[k] if name == "rho" \
        else traj.Y[k, traj.species.index(name[2:])]
    res = max(v["excursion"] for v in worst.values())
    return CheckVerdict(id, "bounds", False, res, 0.0, location=_where(traj, k),
                        message=f"{name} = {value!r} out of bounds at t = {traj.t[k]:.6e} s",
                        details={"T_min": T_min, "T_max": T_max, "first": name,
                                 "violations": dict(sorted(worst.items()))})


def check_inert_conservation(traj: Trajectory, species: str, epsilon: float,
                             id: str = "inert_conservation") -> CheckVerdict:
    """``max_t |Y_s(t) - Y_s(0)| <= epsilon`` for an inert species ``s``."""
    _require_records(traj)
    if species not in traj.species:
        raise PrimitiveSpecError(f"species {species!r} is not in the trajectory composition")
    y = traj.species_column(species)
    err = np.abs(y - y[0])
    bad = np.isnan(err)
    i = int(np.argmax(bad)) if bad.any() else int(np.argmax(err))
    res = float("nan") if bad.any() else float(err[i])
    return _verdict(id, "inert_conservation", res, epsilon, location=_where(traj, i),
                    message=f"max |Y_{species} - Y_{species}(0)| = {res:.3e} at t = {traj.t[i]:.6e} s",
                    details={"species": species})


def check_dimensional_consistency(header: Mapping, expected: Mapping[str, str],
                                  id: str = "dimensional_consistency") -> CheckVerdict:
    """Every expected column exists with exactly the expected unit tag.

    A key containing ``*`` matches column names by glob and must match at
    least one column.
    """
    units = dict(header.get("units", {}))
    problems = []
    for key, unit in expected.items():
        cols = sorted(c for c in units if fnmatch.fnmatchcase(c, key)) if "*" in key else \
            ([key] if key in units else [])
        if not cols:
            problems.append({"column": key, "expected": unit, "found": None})
            continue
        for c in cols:
            if units[c] != unit:
                problems.append({"column": c, "expected": unit, "found": units[c]})
    if problems:
        parts = [f"{p['column']} missing" if p["found"] is None else
                 f"{p['column']} tagged {p['found']!r}, expected {p['expected']!r}" for p in problems]
        msg = "; ".join(parts)
    else:
        msg = f"all {len(expected)} expected unit tags match"
    return CheckVerdict(id, "dimensional_consistency", not problems, float(len(problems)), 0.0,
                        location=None, message=msg, details={"mismatches": problems})


# --- pair-scoped ----------------------------------------------------------

def _fields(pair: StatePair, names: Sequence[str], which=("state1", "state2")):
    for w in which:
        st = getattr(pair, w)
        for n in names:
            if getattr(st, n) is None:
                raise PrimitiveSpecError(f"pair {pair.name!r}: {w} lacks {n}")


def check_rh_energy_closure(pair: StatePair, epsilon: float, id: str = "rh_energy_closure") -> CheckVerdict:
    """``|h2 - h1 + (p2 + p1)(v2 - v1)/2| <= epsilon`` [J/kg]."""
    _fields(pair, ("h", "p", "v"))
    a, b = pair.state1, pair.state2
    res = abs(b.h - a.h + 0.5 * (b.p + a.p) * (b.v - a.v))
    return _verdict(id, "rh_energy_closure", res, epsilon, location={"pair": pair.name},
                    message=f"Rankine-Hugoniot energy residual = {res:.6g} J/kg")


def check_cj_mach(pair: StatePair, epsilon: float, id: str = "cj_mach") -> CheckVerdict:
    """Sonic product state: ``|Mach_2 - 1| <= epsilon``."""
    _fields(pair, ("mach",), which=("state2",))
    res = abs(pair.state2.mach - 1.0)
    return _verdict(id, "cj_mach", res, epsilon, location={"pair": pair.name},
                    message=f"|Mach - 1| = {res:.3e}", details={"mach": pair.state2.mach})


def check_znd_hp_consistency(pair: StatePair, species: Sequence[str], eps_T: float, eps_chi: float,
                             id: str = "znd_hp_consistency") -> CheckVerdict:
    """ZND end state (``state1``) against the HP equilibrium state (``state2``).

    Passes iff ``|T1 - T2|/T2 <= eps_T`` and ``max_i |chi1_i - chi2_i| <= eps_chi``
    over ``species``. The reported residual is the larger of the two ratios
    to their tolerances, against threshold 1.
    """
    _fields(pair, ("T", "composition"))
    a, b = pair.state1, pair.state2
    if a.basis != b.basis:
        raise PrimitiveSpecError(f"pair {pair.name!r}: composition bases differ ({a.basis} vs {b.basis})")
    for w, st in (("state1", a), ("state2", b)):
        missing = [s for s in species if s not in st.composition]
        if missing:
            raise PrimitiveSpecError(f"pair {pair.name!r}: {w} composition lacks {missing}")
    rT = abs(a.T - b.T) / b.T
    diffs = {s: abs(a.composition[s] - b.composition[s]) for s in species}
    worst = max(diffs, key=diffs.get)
    rchi = diffs[worst]
    ok_T, ok_chi = rT <= eps_T, rchi <= eps_chi
    failing = [n for n, ok in (("T", ok_T), ("composition", ok_chi)) if not ok]
    msg = (f"relative T difference {rT:.3e} (eps {eps_T:g}), max |d chi| {rchi:.3e} on {worst} "
           f"(eps {eps_chi:g})")
    if failing:
        msg = f"fails on {' and '.join(failing)}: " + msg
    res = max(rT / eps_T, rchi / eps_chi)
    return CheckVerdict(id, "znd_hp_consistency", bool(ok_T and ok_chi), res, 1.0,
                        location={"pair": pair.name}, message=msg,
                        details={"residual_T": rT, "residual_chi": rchi, "worst_species": worst,
                                 "eps_T": eps_T, "eps_chi": eps_chi, "basis": a.basis})
