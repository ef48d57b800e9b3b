"""Fixed-step explicit integration of the constant-volume reactor.

The packed state is ``y = [T, Y_1, ..., Y_N]`` with density held constant.
Pressure is never integrated; every emitted record recomputes it from the
equation of state. No clipping or renormalisation is applied: a step that
leaves physical bounds raises :class:`IntegrationError`.
"""

from __future__ import annotations

import numpy as np

from ..constants import GAS_CONSTANT
from ..thermochem import MechanismSpec, MixtureState
from ..thermochem import _kernels as K
from .config import ReactorConfig
from .trajectory import Trajectory

R = GAS_CONSTANT
DEFAULT_T_GUARD = 4000.0
_METHODS = {"euler": 0, "rk4": 1}


class IntegrationError(RuntimeError):
    """A step produced a non-physical state.

    ``trajectory`` holds the records accepted before the failure.
    """

    def __init__(self, message: str, *, t: float, quantity: str, value: float,
                 stage: int = 0, trajectory: Trajectory | None = None):
        super().__init__(message)
        self.t = t
        self.quantity = quantity
        self.value = value
        self.stage = stage
        self.trajectory = trajectory

    def to_dict(self) -> dict:
        return {"t": self.t, "quantity": self.quantity, "value": self.value,
                "stage": self.stage, "message": str(self)}


def _pack(state: MixtureState) -> np.ndarray:
    y = np.empty(state.mech.n_species + 1)
    y[0] = state.T
    y[1:] = state.Y
    return y


def _describe(code: int, idx: int, value: float, mech: MechanismSpec, T_guard: float):
    T_lo, T_hi = mech.valid_temperature_range
    if code == K.GUARD:
        return "T", f"temperature {value:.6g} K reached the guard {T_guard:g} K"
    if code == K.RANGE:
        return "T", f"temperature {value:.6g} K left the thermo range [{T_lo:g}, {T_hi:g}] K"
    name = "T" if idx == 0 else f"Y_{mech.species_names[idx - 1]}"
    if code == K.BOUNDS_LOW:
        return name, f"{name} = {value!r} is negative"
    if code == K.BOUNDS_HIGH:
        return name, f"{name} = {value!r} exceeds 1"
    return name, f"{name} is not finite ({value!r})"


def rhs_const_volume(state: MixtureState, mech: MechanismSpec | None = None):
    """Time derivatives ``(dY/dt [1/s], dT/dt [K/s])`` at fixed density.

    ``dY_k/dt = wdot_k W_k / rho`` and
    ``dT/dt = -sum_k u_k wdot_k W_k / (rho c_v)`` with species internal
    energies and the mixture constant-volume heat capacity.
    """
    mech = mech or state.mech
    T_lo, T_hi = mech.valid_temperature_range
    if not T_lo <= state.T <= T_hi:
        for s in mech.species:
            s.coefficients(state.T)
    y = _pack(state)
    f = np.empty_like(y)
    K.rhs_const_volume(y, state.rho, *mech.kernel_data, f)
    return f[1:], float(f[0])


def _step(state: MixtureState, dt: float, mech: MechanismSpec | None, method: str,
          T_guard: float | None) -> MixtureState:
    mech = mech or state.mech
    if dt < 0:
        raise ValueError("dt must be non-negative")
    guard = np.inf if T_guard is None else T_guard
    T_lo, T_hi = mech.valid_temperature_range
    data = mech.kernel_data
    y = _pack(state)
    k1 = np.empty_like(y)
    K.rhs_const_volume(y, state.rho, *data, k1)
    out = np.empty_like(y)
    code, stage, idx, value = K.step(y, state.rho, dt, _METHODS[method], guard, T_lo, T_hi, *data, k1, out)
    if code != K.OK:
        quantity, msg = _describe(code, idx, value, mech, guard)
        raise IntegrationError(msg, t=dt, quantity=quantity, value=value, stage=stage)
    return MixtureState(out[0], state.rho, out[1:], mech)


def step_euler(state: MixtureState, dt: float, mech: MechanismSpec | None = None,
               T_guard: float | None = DEFAULT_T_GUARD) -> MixtureState:
    """One forward-Euler step of (Y, T) at fixed density."""
    return _step(state, dt, mech, "euler", T_guard)


def step_rk4(state: MixtureState, dt: float, mech: MechanismSpec | None = None,
             T_guard: float | None = DEFAULT_T_GUARD) -> MixtureState:
    """One classical four-stage Runge-Kutta step of (Y, T) at fixed density."""
    return _step(state, dt, mech, "rk4", T_guard)


def derived_columns(T: np.ndarray, rho: np.ndarray, Y: np.ndarray, mech: MechanismSpec) -> dict:
    """Mixture ``u``, ``h`` [J/kg] and mass production rates [kg/m3/s] per record."""
    W, nasa, tmid, *kin = mech.kernel_data
    ns = mech.n_species
    n = T.shape[0]
    u = np.empty(n)
    h = np.empty(n)
    omega = np.empty((n, ns))
    cp_R, h_RT, s_R, wdot = np.empty(ns), np.empty(ns), np.empty(ns), np.empty(ns)
    for i in range(n):
        K.species_nondim(T[i], nasa, tmid, cp_R, h_RT, s_R)
        hk = h_RT * R * T[i] / W
        h[i] = Y[i] @ hk
        u[i] = Y[i] @ (hk - R * T[i] / W)
        K.production_rates(T[i], rho[i], np.ascontiguousarray(Y[i]), W, nasa, tmid, *kin, wdot)
        omega[i] = wdot * W
    return {"u": u, "h": h, "omega": omega}


def _build(steps, ys, fs, dt, rho, mech, metadata) -> Trajectory:
    T = ys[:, 0].copy()
    Y = ys[:, 1:].copy()
    rho_col = np.full(T.shape, rho)
    W = np.asarray(mech.molecular_weights)
    p = rho_col * R * T / (1.0 / (Y @ (1.0 / W)))
    return Trajectory(
        t=steps * dt,
        T=T,
        rho=rho_col,
        p=p,
        Y=Y,
        species=mech.species_names,
        dTdt=fs[:, 0].copy(),
        extra=derived_columns(T, rho_col, Y, mech),
        metadata=metadata,
    )


def integrate(config: ReactorConfig, mech: MechanismSpec) -> Trajectory:
    """March ``config`` from t = 0 to ``t_end`` with a fixed step.

    Output is sampled every ``config.output_stride`` steps plus the steps
    bracketing the maximum of dT/dt, so the ignition point is resolved to
    one step regardless of the stride.
    """
    state0 = config.initial_state(mech)
    guard = np.inf if config.T_guard is None else config.T_guard
    T_lo, T_hi = mech.valid_temperature_range
    if not T_lo <= state0.T <= T_hi:
        from ..thermochem import ThermoRangeError

        raise ThermoRangeError("mixture", state0.T, T_lo, T_hi)
    y0 = _pack(state0)
    nsteps = config.n_steps
    (rec_steps, rec_y, rec_f, nrec, ex_steps, ex_y, ex_f, y_last, f_last, fail) = K.march(
        y0, state0.rho, config.dt, nsteps, _METHODS[config.integrator], config.output_stride,
        guard, T_lo, T_hi, *mech.kernel_data)

    steps = list(rec_steps[:nrec])
    ys = list(rec_y[:nrec])
    fs = list(rec_f[:nrec])
    for s, y, f in zip(ex_steps, ex_y, ex_f):
        if s >= 0:
            steps.append(s)
            ys.append(y)
            fs.append(f)
    code, fail_step = int(fail[0]), int(fail[1])
    if code != K.OK:
        steps.append(fail_step)
        ys.append(y_last)
        fs.append(f_last)
    steps = np.array(steps, dtype=np.int64)
    order = np.unique(steps, return_index=True)[1]
    steps = steps[order]
    ys = np.array(ys)[order]
    fs = np.array(fs)[order]

    metadata = {
        "mechanism_id": mech.id,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "n_steps": nsteps,
        "status": "completed",
    }
    if code != K.OK:
        quantity, msg = _describe(code, int(fail[3]), float(fail[4]), mech, guard)
        t_fail = fail_step * config.dt
        failure = {"t": t_fail, "step": fail_step, "stage": int(fail[2]),
                   "quantity": quantity, "value": float(fail[4]), "message": msg}
        metadata["status"] = "failed"
        metadata["failure"] = failure
        traj = _build(steps, ys, fs, config.dt, state0.rho, mech, metadata)
        raise IntegrationError(f"integration failed at t = {t_fail:.6e} s: {msg}", t=t_fail,
                               quantity=quantity, value=float(fail[4]), stage=int(fail[2]),
                               trajectory=traj)
    return _build(steps, ys, fs, config.dt, state0.rho, mech, metadata)
