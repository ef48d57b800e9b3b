"""Declarative unit-physics checks over trajectories and state pairs."""

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
from .engine import SuiteReport, evaluate_primitive, evaluate_suite
from .evidence import Evidence, EvidenceError, StatePair, ThermoPoint
from .suite import (
    KINDS,
    PrimitiveSpec,
    PrimitiveSuite,
    SuiteError,
    default_suite,
    default_suite_path,
    load_suite,
    parse_suite,
    suite_from_dict,
)

__all__ = [
    "CheckVerdict", "PrimitiveSpecError", "check_bounds", "check_cj_mach",
    "check_dimensional_consistency", "check_eos_residual", "check_inert_conservation",
    "check_mass_closure", "check_rh_energy_closure", "check_znd_hp_consistency",
    "SuiteReport", "evaluate_primitive", "evaluate_suite", "Evidence", "EvidenceError",
    "StatePair", "ThermoPoint", "KINDS", "PrimitiveSpec", "PrimitiveSuite", "SuiteError",
    "default_suite", "default_suite_path", "load_suite", "parse_suite", "suite_from_dict",
]
