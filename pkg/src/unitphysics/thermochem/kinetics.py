"""Net species production rates for elementary reactions."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .mechanism import MechanismSpec
from .thermo import MixtureState


def net_production_rates(state: MixtureState, mech: MechanismSpec | None = None) -> np.ndarray:
    """Molar net production rates [kmol/m3/s] in mechanism species order.

    Forward rates are modified Arrhenius, reverse rates follow from the
    equilibrium constant in concentration units; three-body and Lindemann
    falloff reactions use the mechanism's collision efficiencies.
    """
    mech = mech or state.mech
    T_lo, T_hi = mech.valid_temperature_range
    if not T_lo <= state.T <= T_hi:
        # reuse the per-species error for a consistent message
        for s in mech.species:
            s.coefficients(state.T)
    wdot = np.empty(mech.n_species)
    W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff = mech.kernel_data
    _kernels.production_rates(state.T, state.rho, np.ascontiguousarray(state.Y),
                              W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, wdot)
    return wdot


def mass_production_rates(state: MixtureState, mech: MechanismSpec | None = None) -> np.ndarray:
    """Mass production rates ``wdot_k W_k`` [kg/m3/s]."""
    mech = mech or state.mech
    return net_production_rates(state, mech) * mech.molecular_weights


def rates_of_progress(state: MixtureState, mech: MechanismSpec | None = None):
    """Forward and reverse rates of progress per reaction [kmol/m3/s]."""
    mech = mech or state.mech
    W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff = mech.kernel_data
    ns, nr = mech.n_species, mech.n_reactions
    cp_R, h_RT, s_R = np.empty(ns), np.empty(ns), np.empty(ns)
    _kernels.species_nondim(state.T, nasa, tmid, cp_R, h_RT, s_R)
    conc = state.rho * np.asarray(state.Y) / W
    qf, qb = np.empty(nr), np.empty(nr)
    _kernels.rates_of_progress(state.T, conc, h_RT, s_R, nu_f, nu_r, rate, low, kind, rev, eff, qf, qb)
    return qf, qb
