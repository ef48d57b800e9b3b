"""Suite evaluation and the verdict report."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .checks import (
    CheckVerdict,
    PrimitiveSpecError,
    check_bounds,
    check_cj_mach,
    check_dimensional_consistency,
    check_eos_residual,
    check_inert_conservation,
    check_mass_closure,
    check_rh_energy_closure,
    check_znd_hp_consistency,
)
from .evidence import Evidence
from .suite import PAIR_KINDS, TRAJECTORY_KINDS, PrimitiveSpec, PrimitiveSuite

REPORT_FORMAT = "unitphysics.verdicts"


@dataclass
class SuiteReport:
    suite_name: str
    suite_version: str
    verdicts: list[CheckVerdict]

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)

    @property
    def failed(self) -> list[CheckVerdict]:
        return [v for v in self.verdicts if not v.passed]

    @property
    def n_passed(self) -> int:
        return sum(v.passed for v in self.verdicts)

    @property
    def has_spec_errors(self) -> bool:
        return any(v.status == "spec_error" for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": 1,
            "suite": {"name": self.suite_name, "version": self.suite_version},
            "passed": self.passed,
            "n_primitives": len(self.verdicts),
            "n_passed": self.n_passed,
            "failed": [v.id for v in self.failed],
            "verdicts": [v.to_dict() for v in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def _unavailable(p: PrimitiveSpec, status: str, message: str) -> CheckVerdict:
    return CheckVerdict(p.id, p.kind, False, None, p.epsilon, location=None, message=message, status=status)


def evaluate_primitive(p: PrimitiveSpec, evidence: Evidence) -> CheckVerdict:
    """Run one primitive; missing evidence gives a not-evaluable failure."""
    prm = p.params
    traj = evidence.trajectory
    if p.kind in TRAJECTORY_KINDS and traj is None:
        return _unavailable(p, "not_evaluable", f"not evaluable: {p.id} ({p.kind}) needs a trajectory")
    if p.kind == "eos_residual" and evidence.mech is None:
        return _unavailable(p, "not_evaluable", f"not evaluable: {p.id} needs a mechanism for molecular weights")
    if p.kind == "dimensional_consistency" and evidence.header is None:
        return _unavailable(p, "not_evaluable", f"not evaluable: {p.id} needs a trajectory header")
    pair = None
    if p.kind in PAIR_KINDS:
        pair = evidence.pairs.get(prm["pair"])
        if pair is None:
            return _unavailable(p, "not_evaluable",
                                f"not evaluable: {p.id} ({p.kind}) needs state pair {prm['pair']!r}")
    try:
        if p.kind == "mass_closure":
            return check_mass_closure(traj, p.epsilon, id=p.id)
        if p.kind == "eos_residual":
            return check_eos_residual(traj, evidence.mech, p.epsilon, basis=prm["basis"], id=p.id)
        if p.kind == "bounds":
            return check_bounds(traj, float(prm["T_min"]), float(prm["T_max"]), id=p.id)
        if p.kind == "inert_conservation":
            return check_inert_conservation(traj, prm["species"], p.epsilon, id=p.id)
        if p.kind == "dimensional_consistency":
            return check_dimensional_consistency(evidence.header, prm["expected"], id=p.id)
        if p.kind == "rh_energy_closure":
            return check_rh_energy_closure(pair, p.epsilon, id=p.id)
        if p.kind == "cj_mach":
            return check_cj_mach(pair, p.epsilon, id=p.id)
        return check_znd_hp_consistency(pair, list(prm["species"]), float(prm["eps_T"]),
                                        float(prm["eps_chi"]), id=p.id)
    except PrimitiveSpecError as exc:
        return _unavailable(p, "spec_error", f"spec error in {p.id}: {exc}")


def evaluate_suite(suite: PrimitiveSuite, evidence: Evidence, workers: int = 1) -> SuiteReport:
    """Evaluate every primitive, in suite order, without short-circuiting."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(lambda p: evaluate_primitive(p, evidence), suite.primitives))
    else:
        verdicts = [evaluate_primitive(p, evidence) for p in suite.primitives]
    return SuiteReport(suite.name, suite.version, verdicts)
