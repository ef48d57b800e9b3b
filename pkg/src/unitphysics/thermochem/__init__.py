"""Ideal-gas thermochemistry and elementary-reaction kinetics."""

from .kinetics import mass_production_rates, net_production_rates, rates_of_progress
from .mechanism import (
    MechanismError,
    MechanismSpec,
    ReactionSpec,
    SpeciesThermo,
    ThermoRangeError,
    default_mechanism,
    default_mechanism_path,
    load_mechanism,
    mechanism_from_dict,
)
from .thermo import (
    MixtureProps,
    MixtureState,
    StateError,
    composition_vector,
    eos_density,
    eos_pressure,
    mass_to_mole,
    mean_molecular_weight,
    mixture_props,
    mole_to_mass,
    species_cp,
    species_h,
    species_s,
    species_u,
)

__all__ = [
    "MechanismError", "MechanismSpec", "ReactionSpec", "SpeciesThermo", "ThermoRangeError",
    "default_mechanism", "default_mechanism_path", "load_mechanism", "mechanism_from_dict",
    "MixtureProps", "MixtureState", "StateError", "composition_vector", "eos_density",
    "eos_pressure", "mass_to_mole", "mean_molecular_weight", "mixture_props", "mole_to_mass",
    "species_cp", "species_h", "species_s", "species_u",
    "mass_production_rates", "net_production_rates", "rates_of_progress",
]
