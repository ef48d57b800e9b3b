"""Tiny fixed-pressure reactor used by scripted candidates."""

import numpy as np

from unitphysics.reactor import ReactorConfig, Trajectory
from unitphysics.thermochem import MixtureState, mixture_props, net_production_rates, species_h


def isobaric_ignition(mech, T0=1300.0, p0=101325.0, dt=1e-9, t_end=1.4e-5, stride=100):
    """Explicit Euler at fixed pressure; records carry the initial density."""
    cfg = ReactorConfig(T0=T0, p0=p0, dt=dt, t_end=t_end)
    s = cfg.initial_state(mech)
    W = mech.molecular_weights
    T, Y = s.T, s.Y.copy()
    rows = []
    for n in range(cfg.n_steps + 1):
        st = MixtureState.from_TPY(mech, T, p0, Y)
        if n % stride == 0:
            rows.append((n * dt, T, Y.copy()))
        wdot = net_production_rates(st)
        h = np.array([species_h(sp, T) for sp in mech.species])
        dY = wdot * W / st.rho
        dT = -(h * wdot * W).sum() / (st.rho * mixture_props(st).cp)
        T, Y = T + dt * dT, Y + dt * dY
    t = np.array([r[0] for r in rows])
    return Trajectory(t=t, T=np.array([r[1] for r in rows]), rho=np.full(t.shape, s.rho),
                      p=np.full(t.shape, p0), Y=np.array([r[2] for r in rows]), species=mech.species_names,
                      metadata={"mechanism_id": mech.id, "config_hash": cfg.config_hash()})
