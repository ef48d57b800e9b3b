"""Species and mixture thermodynamics for ideal gases (NASA-7)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..constants import GAS_CONSTANT
from .mechanism import MechanismSpec, SpeciesThermo

R = GAS_CONSTANT

#: Default tolerance on |sum(Y) - 1| accepted by :class:`MixtureState`.
MASS_FRACTION_TOL = 1e-8


class StateError(ValueError):
    """Raised for non-physical thermochemical states."""


def species_cp(s: SpeciesThermo, T: float) -> float:
    """Specific heat at constant pressure [J/kg/K]."""
    a = s.coefficients(T)
    return R / s.W * (a[0] + T * (a[1] + T * (a[2] + T * (a[3] + T * a[4]))))


def species_h(s: SpeciesThermo, T: float) -> float:
    """Specific enthalpy [J/kg], including formation enthalpy."""
    a = s.coefficients(T)
    h_RT = a[0] + T * (a[1] / 2 + T * (a[2] / 3 + T * (a[3] / 4 + T * a[4] / 5))) + a[5] / T
    return R / s.W * T * h_RT


def species_u(s: SpeciesThermo, T: float) -> float:
    """Specific internal energy [J/kg]: ``h - R T / W``."""
    return species_h(s, T) - R / s.W * T


def species_s(s: SpeciesThermo, T: float) -> float:
    """Standard-state specific entropy [J/kg/K]."""
    a = s.coefficients(T)
    s_R = a[0] * math.log(T) + T * (a[1] + T * (a[2] / 2 + T * (a[3] / 3 + T * a[4] / 4))) + a[6]
    return R / s.W * s_R


def mean_molecular_weight(Y: Sequence[float], W: Sequence[float]) -> float:
    """Mixture molecular weight from mass fractions, ``(sum Y_k / W_k)^-1``."""
    return 1.0 / float(np.dot(Y, 1.0 / np.asarray(W)))


def eos_pressure(T: float, rho: float, Y: Sequence[float], mech: MechanismSpec) -> float:
    """Ideal-gas pressure ``rho R T / W_mix`` [Pa]."""
    if not T > 0:
        raise StateError(f"temperature must be positive, got {T!r}")
    if not rho > 0:
        raise StateError(f"density must be positive, got {rho!r}")
    return rho * R * T / mean_molecular_weight(Y, mech.molecular_weights)


def eos_density(T: float, p: float, Y: Sequence[float], mech: MechanismSpec) -> float:
    if not T > 0 or not p > 0:
        raise StateError("temperature and pressure must be positive")
    return p * mean_molecular_weight(Y, mech.molecular_weights) / (R * T)


def validate_mass_fractions(Y: np.ndarray, tol: float = MASS_FRACTION_TOL) -> None:
    if not np.all(np.isfinite(Y)):
        raise StateError("mass fractions must be finite")
    if np.any(Y < 0.0) or np.any(Y > 1.0):
        raise StateError(f"mass fractions must lie in [0, 1], got {Y.tolist()}")
    if abs(Y.sum() - 1.0) > tol:
        raise StateError(f"mass fractions sum to {Y.sum()!r}, not 1 within {tol}")


@dataclass(frozen=True, eq=False)
class MixtureState:
    """Closed homogeneous ideal-gas state.

    ``p`` is always derived from the equation of state; use
    :meth:`from_TPY` to start from a pressure.
    """

    T: float
    rho: float
    Y: np.ndarray
    mech: MechanismSpec
    tol: float = MASS_FRACTION_TOL

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float)
        if Y.shape != (self.mech.n_species,):
            raise StateError(f"expected {self.mech.n_species} mass fractions, got shape {Y.shape}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise StateError(f"temperature must be positive, got {self.T!r}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise StateError(f"density must be positive, got {self.rho!r}")
        validate_mass_fractions(Y, self.tol)
        Y.flags.writeable = False
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def p(self) -> float:
        return eos_pressure(self.T, self.rho, self.Y, self.mech)

    @property
    def mean_W(self) -> float:
        return mean_molecular_weight(self.Y, self.mech.molecular_weights)

    @property
    def X(self) -> np.ndarray:
        return mass_to_mole(self.Y, self.mech.molecular_weights)

    @classmethod
    def from_TPY(cls, mech: MechanismSpec, T: float, p: float, Y) -> "MixtureState":
        Y = composition_vector(mech, Y)
        return cls(T, eos_density(T, p, Y, mech), Y, mech)

    @classmethod
    def from_TPX(cls, mech: MechanismSpec, T: float, p: float, X) -> "MixtureState":
        X = composition_vector(mech, X)
        return cls.from_TPY(mech, T, p, mole_to_mass(X, mech.molecular_weights))


def composition_vector(mech: MechanismSpec, comp) -> np.ndarray:
    """Dense composition vector from a species map or a sequence (no normalisation)."""
    if isinstance(comp, Mapping):
        v = np.zeros(mech.n_species)
        for name, value in comp.items():
            v[mech.species_index(name)] = float(value)
        return v
    v = np.array(comp, dtype=float)
    if v.shape != (mech.n_species,):
        raise StateError(f"expected {mech.n_species} entries, got shape {v.shape}")
    return v


def mole_to_mass(X, W) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    m = X * np.asarray(W)
    return m / m.sum()


def mass_to_mole(Y, W) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    n = Y / np.asarray(W)
    return n / n.sum()


@dataclass(frozen=True)
class MixtureProps:
    mean_W: float  # kg/kmol
    cp: float  # J/kg/K
    cv: float  # J/kg/K
    h: float  # J/kg
    u: float  # J/kg


def mixture_props(state: MixtureState, mech: MechanismSpec | None = None) -> MixtureProps:
    """Mass-weighted mixture properties of ``state``."""
    mech = mech or state.mech
    T = state.T
    cp = h = 0.0
    for s, y in zip(mech.species, state.Y):
        cp += y * species_cp(s, T)
        h += y * species_h(s, T)
    W = mean_molecular_weight(state.Y, mech.molecular_weights)
    return MixtureProps(mean_W=W, cp=cp, cv=cp - R / W, h=h, u=h - R * T / W)
