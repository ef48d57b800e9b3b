"""Compiled inner loops for thermodynamics and kinetics.

Arrays come from :attr:`MechanismSpec.kernel_data`. Everything here is
scalar-loop numba code; the public wrappers live in ``thermo`` and
``kinetics``.
"""

import numpy as np
from numba import njit

from ..constants import GAS_CONSTANT, P_STANDARD

R = GAS_CONSTANT


@njit(cache=True)
def species_nondim(T, nasa, tmid, cp_R, h_RT, s_R):
    """Fill cp/R, h/(RT), s/R for every species at temperature T."""
    lnT = np.log(T)
    T2 = T * T
    T3 = T2 * T
    T4 = T3 * T
    for k in range(nasa.shape[0]):
        j = 0 if T <= tmid[k] else 1
        a0 = nasa[k, j, 0]
        a1 = nasa[k, j, 1]
        a2 = nasa[k, j, 2]
        a3 = nasa[k, j, 3]
        a4 = nasa[k, j, 4]
        a5 = nasa[k, j, 5]
        a6 = nasa[k, j, 6]
        cp_R[k] = a0 + a1 * T + a2 * T2 + a3 * T3 + a4 * T4
        h_RT[k] = a0 + a1 * T / 2.0 + a2 * T2 / 3.0 + a3 * T3 / 4.0 + a4 * T4 / 5.0 + a5 / T
        s_R[k] = a0 * lnT + a1 * T + a2 * T2 / 2.0 + a3 * T3 / 3.0 + a4 * T4 / 4.0 + a6


@njit(cache=True)
def rates_of_progress(T, conc, h_RT, s_R, nu_f, nu_r, rate, low, kind, rev, eff, qf, qb):
    nr, ns = nu_f.shape
    RT = R * T
    logT = np.log(T)
    c_std = P_STANDARD / RT
    for j in range(nr):
        kf = rate[j, 0] * np.exp(rate[j, 1] * logT - rate[j, 2] / RT)
        if kind[j] != 0:
            M = 0.0
            for k in range(ns):
                M += eff[j, k] * conc[k]
            if kind[j] == 1:
                kf *= M
            else:
                k0 = low[j, 0] * np.exp(low[j, 1] * logT - low[j, 2] / RT)
                Pr = k0 * M / kf
                kf *= Pr / (1.0 + Pr)
        fwd = kf
        for k in range(ns):
            if nu_f[j, k] != 0.0:
                fwd *= conc[k] ** nu_f[j, k]
        qf[j] = fwd
        if rev[j]:
            dG = 0.0
            dnu = 0.0
            for k in range(ns):
                nu = nu_r[j, k] - nu_f[j, k]
                if nu != 0.0:
                    dG += nu * (h_RT[k] - s_R[k])
                    dnu += nu
            # kb = kf / Kc,  Kc = exp(-dG/RT) * c_std**dnu
            kb = kf * np.exp(dG) * c_std ** (-dnu)
            bwd = kb
            for k in range(ns):
                if nu_r[j, k] != 0.0:
                    bwd *= conc[k] ** nu_r[j, k]
            qb[j] = bwd
        else:
            qb[j] = 0.0


@njit(cache=True)
def production_rates(T, rho, Y, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, wdot):
    """Molar net production rates [kmol/m3/s] into ``wdot``."""
    ns = W.shape[0]
    nr = nu_f.shape[0]
    cp_R = np.empty(ns)
    h_RT = np.empty(ns)
    s_R = np.empty(ns)
    species_nondim(T, nasa, tmid, cp_R, h_RT, s_R)
    conc = np.empty(ns)
    for k in range(ns):
        conc[k] = rho * Y[k] / W[k]
    qf = np.empty(nr)
    qb = np.empty(nr)
    rates_of_progress(T, conc, h_RT, s_R, nu_f, nu_r, rate, low, kind, rev, eff, qf, qb)
    for k in range(ns):
        wdot[k] = 0.0
    for j in range(nr):
        q = qf[j] - qb[j]
        for k in range(ns):
            nu = nu_r[j, k] - nu_f[j, k]
            if nu != 0.0:
                wdot[k] += nu * q


@njit(cache=True)
def rhs_const_volume(y, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, dydt):
    """Constant-volume adiabatic RHS on the packed state ``y = [T, Y_1..Y_N]``."""
    ns = W.shape[0]
    T = y[0]
    Y = y[1:]
    cp_R = np.empty(ns)
    h_RT = np.empty(ns)
    s_R = np.empty(ns)
    species_nondim(T, nasa, tmid, cp_R, h_RT, s_R)
    conc = np.empty(ns)
    for k in range(ns):
        conc[k] = rho * Y[k] / W[k]
    nr = nu_f.shape[0]
    qf = np.empty(nr)
    qb = np.empty(nr)
    rates_of_progress(T, conc, h_RT, s_R, nu_f, nu_r, rate, low, kind, rev, eff, qf, qb)
    wdot = np.zeros(ns)
    for j in range(nr):
        q = qf[j] - qb[j]
        for k in range(ns):
            nu = nu_r[j, k] - nu_f[j, k]
            if nu != 0.0:
                wdot[k] += nu * q
    cv = 0.0
    energy = 0.0
    for k in range(ns):
        cv += Y[k] * (cp_R[k] - 1.0) * R / W[k]
        # u_k [J/kmol] = R T (h/RT - 1); sum of u_k wdot_k W_k with u per mass
        energy += (h_RT[k] - 1.0) * R * T * wdot[k]
        dydt[1 + k] = wdot[k] * W[k] / rho
    dydt[0] = -energy / (rho * cv)


# status codes returned by march()
OK = 0
GUARD = 1
RANGE = 2
BOUNDS_LOW = 3
BOUNDS_HIGH = 4
NONFINITE = 5


@njit(cache=True)
def _check(y, T_guard, T_lo, T_hi):
    T = y[0]
    if not np.isfinite(T):
        return NONFINITE, 0, T
    for k in range(1, y.shape[0]):
        if not np.isfinite(y[k]):
            return NONFINITE, k, y[k]
    if T >= T_guard:
        return GUARD, 0, T
    if T < T_lo or T > T_hi:
        return RANGE, 0, T
    for k in range(1, y.shape[0]):
        if y[k] < 0.0:
            return BOUNDS_LOW, k, y[k]
        if y[k] > 1.0:
            return BOUNDS_HIGH, k, y[k]
    return OK, 0, 0.0


@njit(cache=True)
def step(y, rho, dt, method, T_guard, T_lo, T_hi, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff,
         k1, out):
    """Advance one step. ``k1`` must already hold f(y). Returns (code, stage, index, value)."""
    n = y.shape[0]
    if method == 0:
        for i in range(n):
            out[i] = y[i] + dt * k1[i]
        code, idx, val = _check(out, T_guard, T_lo, T_hi)
        return code, 1, idx, val
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    code, idx, val = _check(tmp, T_guard, T_lo, T_hi)
    if code != OK:
        return code, 1, idx, val
    rhs_const_volume(tmp, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    code, idx, val = _check(tmp, T_guard, T_lo, T_hi)
    if code != OK:
        return code, 2, idx, val
    rhs_const_volume(tmp, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, k3)
    for i in range(n):
        tmp[i] = y[i] + dt * k3[i]
    code, idx, val = _check(tmp, T_guard, T_lo, T_hi)
    if code != OK:
        return code, 3, idx, val
    rhs_const_volume(tmp, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, k4)
    for i in range(n):
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    code, idx, val = _check(out, T_guard, T_lo, T_hi)
    return code, 4, idx, val


@njit(cache=True)
def march(y0, rho, dt, nsteps, method, stride, T_guard, T_lo, T_hi,
          W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff):
    """Fixed-step march recording every ``stride`` steps.

    The steps bracketing the maximum of dT/dt (the argmax step and its two
    neighbours) are returned separately so the caller can merge them into
    the strided output.

    Returns ``(rec_steps, rec_y, rec_f, nrec, extra_steps, extra_y, extra_f,
    y_last, f_last, fail)`` with ``fail = (code, step, stage, index, value)``;
    ``y_last`` is the last accepted state.
    """
    n = y0.shape[0]
    cap = nsteps // stride + 2
    rec_steps = np.empty(cap, dtype=np.int64)
    rec_y = np.empty((cap, n))
    rec_f = np.empty((cap, n))
    extra_steps = np.full(3, -1, dtype=np.int64)
    extra_y = np.zeros((3, n))
    extra_f = np.zeros((3, n))

    y = y0.copy()
    ynew = np.empty(n)
    f = np.empty(n)
    prev_y = y0.copy()
    prev_f = np.empty(n)
    rhs_const_volume(y, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, f)
    best = -np.inf
    pending_next = False
    nrec = 0
    fail_code = 0
    fail_step = -1
    fail_stage = 0
    fail_idx = 0
    fail_val = 0.0

    for s in range(nsteps + 1):
        if s % stride == 0 or s == nsteps:
            rec_steps[nrec] = s
            rec_y[nrec] = y
            rec_f[nrec] = f
            nrec += 1
        if pending_next:
            extra_steps[2] = s
            extra_y[2] = y
            extra_f[2] = f
            pending_next = False
        if f[0] > best:
            best = f[0]
            extra_steps[1] = s
            extra_y[1] = y
            extra_f[1] = f
            if s > 0:
                extra_steps[0] = s - 1
                extra_y[0] = prev_y
                extra_f[0] = prev_f
            extra_steps[2] = -1
            pending_next = True
        if s == nsteps:
            break
        code, stage, idx, val = step(y, rho, dt, method, T_guard, T_lo, T_hi,
                                     W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, f, ynew)
        if code != OK:
            fail_code = code
            fail_step = s
            fail_stage = stage
            fail_idx = idx
            fail_val = val
            break
        prev_y[:] = y
        prev_f[:] = f
        y[:] = ynew
        rhs_const_volume(y, rho, W, nasa, tmid, nu_f, nu_r, rate, low, kind, rev, eff, f)

    return (rec_steps, rec_y, rec_f, nrec, extra_steps, extra_y, extra_f, y, f,
            (fail_code, fail_step, fail_stage, fail_idx, fail_val))
