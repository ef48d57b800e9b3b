"""Reactor configuration and initial composition helpers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Mapping

from ..thermochem import MechanismSpec, MixtureState

#: N2 moles per O2 mole in air.
AIR_N2_RATIO = 3.76

INTEGRATORS = ("euler", "rk4")
IDT_CRITERIA = ("max_dTdt", "threshold_rise")


class ConfigError(ValueError):
    pass


def stoich_composition(fuel: str = "H2", oxidizer: str = "O2", phi: float = 1.0) -> dict[str, float]:
    """Mole fractions of a fuel/oxidizer mixture at equivalence ratio ``phi``.

    >>> stoich_composition("H2", "O2")
    {'H2': 0.6666666666666666, 'O2': 0.3333333333333333}
    """
    if fuel != "H2":
        raise ConfigError(f"unsupported fuel {fuel!r}; only H2 is available")
    if oxidizer not in ("O2", "air"):
        raise ConfigError(f"unsupported oxidizer {oxidizer!r}; use 'O2' or 'air'")
    if not phi > 0:
        raise ConfigError("equivalence ratio must be positive")
    moles = {"H2": 2.0 * phi, "O2": 1.0}
    if oxidizer == "air":
        moles["N2"] = AIR_N2_RATIO
    total = sum(moles.values())
    return {k: v / total for k, v in moles.items()}


@dataclass(frozen=True)
class ReactorConfig:
    """Inputs of one constant-volume ignition run.

    Composition is either ``X`` (mole fractions, used as given) or
    ``phi`` with an ``oxidizer`` preset.
    """

    T0: float = 1300.0
    p0: float = 101325.0
    X: Mapping[str, float] | None = None
    phi: float | None = 1.0
    oxidizer: str = "O2"
    fuel: str = "H2"
    dt: float = 1e-10
    t_end: float = 2e-5
    integrator: str = "rk4"
    idt_criterion: str = "max_dTdt"
    threshold_dT: float = 100.0
    T_guard: float | None = 4000.0
    output_stride: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end > self.dt:
            raise ConfigError("t_end must exceed dt")
        if not (self.T0 > 0 and self.p0 > 0):
            raise ConfigError("T0 and p0 must be positive")
        if self.X is None and (self.phi is None or not self.phi > 0):
            raise ConfigError("give X or a positive phi")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}")
        if self.idt_criterion not in IDT_CRITERIA:
            raise ConfigError(f"idt_criterion must be one of {IDT_CRITERIA}")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")
        if self.T_guard is not None and not self.T_guard > self.T0:
            raise ConfigError("T_guard must exceed T0")

    def mole_fractions(self) -> dict[str, float]:
        if self.X is not None:
            return {k: float(v) for k, v in self.X.items()}
        return stoich_composition(self.fuel, self.oxidizer, self.phi)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def initial_state(self, mech: MechanismSpec) -> MixtureState:
        X = self.mole_fractions()
        total = sum(X.values())
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"mole fractions sum to {total}, expected 1")
        try:
            return MixtureState.from_TPX(mech, self.T0, self.p0, X)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["X"] = dict(self.X) if self.X is not None else None
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def mole_to_mass_map(X: Mapping[str, float], mech: MechanismSpec) -> dict[str, float]:
    W = {s.name: s.W for s in mech.species}
    m = {k: v * W[k] for k, v in X.items()}
    tot = sum(m.values())
    return {k: v / tot for k, v in m.items()}


def mass_to_mole_map(Y: Mapping[str, float], mech: MechanismSpec) -> dict[str, float]:
    W = {s.name: s.W for s in mech.species}
    n = {k: v / W[k] for k, v in Y.items()}
    tot = sum(n.values())
    return {k: v / tot for k, v in n.items()}

