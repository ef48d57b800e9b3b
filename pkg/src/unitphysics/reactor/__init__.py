"""Constant-volume homogeneous reactor benchmark."""

from .config import (
    AIR_N2_RATIO,
    ConfigError,
    ReactorConfig,
    mass_to_mole_map,
    mole_to_mass_map,
    stoich_composition,
)
from .idt import NoIgnitionError, detect_idt
from .integrate import (
    DEFAULT_T_GUARD,
    IntegrationError,
    derived_columns,
    integrate,
    rhs_const_volume,
    step_euler,
    step_rk4,
)
from .trajectory import Trajectory, TrajectoryFormatError, read_header

__all__ = [
    "AIR_N2_RATIO", "ConfigError", "ReactorConfig", "mass_to_mole_map", "mole_to_mass_map",
    "stoich_composition", "NoIgnitionError", "detect_idt", "DEFAULT_T_GUARD", "IntegrationError",
    "derived_columns", "integrate", "rhs_const_volume", "step_euler", "step_rk4", "Trajectory",
    "TrajectoryFormatError", "read_header",
]
