"""Mechanism data model and YAML loader.

A mechanism file carries elements (with atomic weights), species with
NASA-7 coefficients and reactions with modified-Arrhenius parameters.
Rate parameters are read in the units declared by the file's ``units``
block and stored internally in SI with kmol.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from ..constants import CALORIE, GAS_CONSTANT


class MechanismError(ValueError):
    """Raised when a mechanism file is malformed or physically inconsistent."""


class ThermoRangeError(ValueError):
    """Raised when a temperature falls outside a species' polynomial range."""

    def __init__(self, species: str, T: float, T_low: float, T_high: float):
        self.species = species
        self.T = T
        self.T_low = T_low
        self.T_high = T_high
        super().__init__(
            f"T = {T!r} K outside valid range [{T_low}, {T_high}] K for species {species}"
        )


@dataclass(frozen=True)
class SpeciesThermo:
    """Ideal-gas species with two-range NASA-7 coefficients."""

    name: str
    composition: Mapping[str, float]
    W: float  # kg/kmol
    nasa_low: tuple[float, ...]
    nasa_high: tuple[float, ...]
    T_low: float
    T_mid: float
    T_high: float

    def __post_init__(self):
        if not self.T_low < self.T_mid < self.T_high:
            raise MechanismError(
                f"{self.name}: temperature ranges must satisfy T_low < T_mid < T_high"
            )
        if not self.W > 0:
            raise MechanismError(f"{self.name}: molecular weight must be positive")
        if len(self.nasa_low) != 7 or len(self.nasa_high) != 7:
            raise MechanismError(f"{self.name}: NASA-7 sets need 7 coefficients each")

    def coefficients(self, T: float) -> tuple[float, ...]:
        if not self.T_low <= T <= self.T_high:
            raise ThermoRangeError(self.name, T, self.T_low, self.T_high)
        return self.nasa_low if T <= self.T_mid else self.nasa_high


@dataclass(frozen=True)
class ReactionSpec:
    """One elementary reaction.

    ``kind`` is ``"elementary"``, ``"three-body"`` or ``"falloff"``. For
    falloff reactions ``A, b, Ea`` are the high-pressure limit and
    ``low`` holds the low-pressure triple (Lindemann blending).
    """

    equation: str
    reactants: Mapping[str, float]
    products: Mapping[str, float]
    A: float
    b: float
    Ea: float  # J/kmol
    reversible: bool = True
    kind: str = "elementary"
    efficiencies: Mapping[str, float] = field(default_factory=dict)
    low: tuple[float, float, float] | None = None
    duplicate: bool = False

    @property
    def third_body(self) -> Mapping[str, float] | None:
        if self.kind == "elementary":
            return None
        return self.efficiencies

    def net_stoich(self) -> dict[str, float]:
        nu = {k: -v for k, v in self.reactants.items()}
        for k, v in self.products.items():
            nu[k] = nu.get(k, 0.0) + v
        return nu


@dataclass(frozen=True, eq=False)
class MechanismSpec:
    """Immutable species/reaction set; species order is the state-vector order."""

    id: str
    elements: Mapping[str, float]
    species: tuple[SpeciesThermo, ...]
    reactions: tuple[ReactionSpec, ...]
    description: str = ""

    def __post_init__(self):
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise MechanismError("duplicate species names")
        known = set(names)
        for r in self.reactions:
            for sp in list(r.reactants) + list(r.products) + list(r.efficiencies):
                if sp not in known:
                    raise MechanismError(f"reaction '{r.equation}' references unknown species {sp}")
            self._check_balance(r)

    def _check_balance(self, r: ReactionSpec) -> None:
        nu = r.net_stoich()
        for el in self.elements:
            net = sum(v * self.species_by_name[k].composition.get(el, 0.0) for k, v in nu.items())
            if abs(net) > 1e-12:
                raise MechanismError(f"reaction '{r.equation}' does not balance element {el}")
        terms = [v * self.species_by_name[k].W for k, v in nu.items()]
        scale = max(sum(abs(x) for x in terms), 1.0)
        if abs(sum(terms)) > 1e-10 * scale:
            raise MechanismError(f"reaction '{r.equation}' does not conserve mass")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @cached_property
    def species_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.species)

    @cached_property
    def species_by_name(self) -> dict[str, SpeciesThermo]:
        return {s.name: s for s in self.species}

    def species_index(self, name: str) -> int:
        try:
            return self.species_names.index(name)
        except ValueError:
            raise KeyError(f"unknown species {name!r}") from None

    @cached_property
    def molecular_weights(self) -> np.ndarray:
        w = np.array([s.W for s in self.species])
        w.flags.writeable = False
        return w

    @cached_property
    def valid_temperature_range(self) -> tuple[float, float]:
        """Temperature interval over which every species polynomial is valid."""
        return max(s.T_low for s in self.species), min(s.T_high for s in self.species)

    @cached_property
    def kernel_data(self) -> tuple:
        """Packed arrays consumed by the compiled kinetics kernels."""
        ns, nr = self.n_species, self.n_reactions
        idx = {n: i for i, n in enumerate(self.species_names)}
        nasa = np.zeros((ns, 2, 7))
        tmid = np.zeros(ns)
        for i, s in enumerate(self.species):
            nasa[i, 0] = s.nasa_low
            nasa[i, 1] = s.nasa_high
            tmid[i] = s.T_mid
        nu_f = np.zeros((nr, ns))
        nu_r = np.zeros((nr, ns))
        rate = np.zeros((nr, 3))
        low = np.zeros((nr, 3))
        kind = np.zeros(nr, dtype=np.int64)
        rev = np.zeros(nr, dtype=np.bool_)
        eff = np.ones((nr, ns))
        for j, r in enumerate(self.reactions):
            for k, v in r.reactants.items():
                nu_f[j, idx[k]] += v
            for k, v in r.products.items():
                nu_r[j, idx[k]] += v
            rate[j] = (r.A, r.b, r.Ea)
            rev[j] = r.reversible
            kind[j] = {"elementary": 0, "three-body": 1, "falloff": 2}[r.kind]
            if r.low is not None:
                low[j] = r.low
            for k, v in r.efficiencies.items():
                eff[j, idx[k]] = v
        W = np.array(self.molecular_weights)
        return (W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff)


# --- loading -----------------------------------------------------------------

_LENGTH = {"cm": 1e-2, "m": 1.0}
_QUANTITY = {"mol": 1e-3, "kmol": 1.0}
_ENERGY = {
    "cal/mol": CALORIE * 1e3,
    "kcal/mol": CALORIE * 1e6,
    "J/mol": 1e3,
    "kJ/mol": 1e6,
    "J/kmol": 1.0,
    "K": GAS_CONSTANT,
}

_TERM = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s+)?([A-Za-z][A-Za-z0-9()_\-]*)\s*$")


def parse_equation(equation: str) -> tuple[dict[str, float], dict[str, float], bool, str | None]:
    """Split ``"2 OH (+M) <=> H2O2 (+M)"`` into stoichiometry maps.

    Returns ``(reactants, products, reversible, collider)`` where collider
    is ``"M"`` for ``+ M``, ``"(+M)"`` for falloff notation and ``None``
    otherwise.
    """
    if "<=>" in equation:
        lhs, rhs = equation.split("<=>")
        reversible = True
    elif "=>" in equation:
        lhs, rhs = equation.split("=>")
        reversible = False
    elif "=" in equation:
        lhs, rhs = equation.split("=")
        reversible = True
    else:
        raise MechanismError(f"no reaction arrow in '{equation}'")

    colliders = []

    def side(text: str) -> dict[str, float]:
        if "(+M)" in text.replace(" ", ""):
            colliders.append("(+M)")
            text = re.sub(r"\(\s*\+\s*M\s*\)", "", text)
        out: dict[str, float] = {}
        for term in text.split(" + "):
            term = term.strip()
            if not term:
                continue
            if term == "M":
                colliders.append("M")
                continue
            m = _TERM.match(term)
            if m is None:
                raise MechanismError(f"cannot parse term '{term}' in '{equation}'")
            coeff = float(m.group(1)) if m.group(1) else 1.0
            out[m.group(2)] = out.get(m.group(2), 0.0) + coeff
        return out

    reactants, products = side(lhs), side(rhs)
    if not reactants or not products:
        raise MechanismError(f"empty reaction side in '{equation}'")
    if colliders and len(colliders) != 2 or len(set(colliders)) > 1:
        raise MechanismError(f"third body must appear on both sides of '{equation}'")
    return reactants, products, reversible, (colliders[0] if colliders else None)


def _convert_rate(params: Mapping, order: float, conc_factor: float, energy_factor: float):
    try:
        A, b, Ea = float(params["A"]), float(params["b"]), float(params["Ea"])
    except KeyError as exc:
        raise MechanismError(f"rate constant missing {exc.args[0]!r}") from None
    # k [(volume/quantity)^(order-1) / s]; volume/quantity scales as 1/conc_factor
    return A * conc_factor ** (1.0 - order), b, Ea * energy_factor


def mechanism_from_dict(doc: Mapping, source: str = "<dict>") -> MechanismSpec:
    """Build a :class:`MechanismSpec` from a parsed mechanism document."""
    try:
        units = doc.get("units", {})
        length = _LENGTH[units.get("length", "m")]
        quantity = _QUANTITY[units.get("quantity", "kmol")]
        energy = _ENERGY[units.get("activation-energy", "J/kmol")]
    except KeyError as exc:
        raise MechanismError(f"{source}: unsupported unit {exc.args[0]!r}") from None
    if units.get("time", "s") != "s":
        raise MechanismError(f"{source}: only time unit 's' is supported")
    if doc.get("element-weight-units", "kg/kmol") not in ("kg/kmol", "g/mol"):
        raise MechanismError(f"{source}: element weights must be kg/kmol")
    conc_factor = quantity / length**3  # file concentration unit in kmol/m3

    elements = {str(k): float(v) for k, v in doc.get("elements", {}).items()}
    if not elements:
        raise MechanismError(f"{source}: no elements declared")

    species = []
    for entry in doc.get("species", []):
        name = entry["name"]
        comp = {str(k): float(v) for k, v in entry["composition"].items()}
        missing = set(comp) - set(elements)
        if missing:
            raise MechanismError(f"{source}: species {name} uses undeclared elements {sorted(missing)}")
        thermo = entry.get("thermo", {})
        if thermo.get("model") != "NASA7":
            raise MechanismError(f"{source}: species {name} must use NASA7 thermo")
        T_low, T_mid, T_high = (float(x) for x in thermo["temperature-ranges"])
        low, high = thermo["data"]
        W = sum(n * elements[el] for el, n in comp.items())
        species.append(
            SpeciesThermo(
                name=name,
                composition=comp,
                W=W,
                nasa_low=tuple(float(x) for x in low),
                nasa_high=tuple(float(x) for x in high),
                T_low=T_low,
                T_mid=T_mid,
                T_high=T_high,
            )
        )

    reactions = []
    for entry in doc.get("reactions", []):
        eq = entry["equation"]
        reactants, products, reversible, collider = parse_equation(eq)
        kind = entry.get("type", "elementary")
        expected = {"elementary": None, "three-body": "M", "falloff": "(+M)"}
        if kind not in expected:
            raise MechanismError(f"{source}: unsupported reaction type {kind!r} in '{eq}'")
        if expected[kind] != collider:
            raise MechanismError(f"{source}: reaction type {kind!r} inconsistent with '{eq}'")
        order = sum(reactants.values())
        low = None
        if kind == "falloff":
            A, b, Ea = _convert_rate(entry["high-P-rate-constant"], order, conc_factor, energy)
            low = _convert_rate(entry["low-P-rate-constant"], order + 1, conc_factor, energy)
        else:
            eff_order = order + (1 if kind == "three-body" else 0)
            A, b, Ea = _convert_rate(entry["rate-constant"], eff_order, conc_factor, energy)
        reactions.append(
            ReactionSpec(
                equation=eq,
                reactants=reactants,
                products=products,
                A=A,
                b=b,
                Ea=Ea,
                reversible=reversible,
                kind=kind,
                efficiencies={str(k): float(v) for k, v in entry.get("efficiencies", {}).items()},
                low=low,
                duplicate=bool(entry.get("duplicate", False)),
            )
        )

    meta = doc.get("mechanism", {})
    return MechanismSpec(
        id=str(meta.get("id", Path(source).stem)),
        elements=elements,
        species=tuple(species),
        reactions=tuple(reactions),
        description=str(meta.get("description", "")),
    )


def load_mechanism(path: str | Path) -> MechanismSpec:
    """Load a mechanism YAML file. Missing files raise ``FileNotFoundError``."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MechanismError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise MechanismError(f"{path}: top level must be a mapping")
    try:
        return mechanism_from_dict(doc, source=str(path))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MechanismError):
            raise
        raise MechanismError(f"{path}: malformed entry ({exc})") from None


_DEFAULT: MechanismSpec | None = None


def default_mechanism_path() -> Path:
    return Path(str(resources.files("unitphysics") / "data" / "h2o2.yaml"))


def default_mechanism() -> MechanismSpec:
    """The shipped 9-species hydrogen/oxygen mechanism (cached)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_mechanism(default_mechanism_path())
    return _DEFAULT
