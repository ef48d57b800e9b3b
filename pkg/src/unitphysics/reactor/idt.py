"""Ignition-delay detection on a trajectory."""

from __future__ import annotations

import numpy as np

from .trajectory import Trajectory


class NoIgnitionError(RuntimeError):
    pass


def detect_idt(traj: Trajectory, criterion: str = "max_dTdt", delta_T: float = 100.0) -> float:
    """Ignition delay time [s].

    ``max_dTdt``: time of the global maximum of dT/dt, earliest on ties.
    ``threshold_rise``: first time with ``T >= T(0) + delta_T``.
    """
    if len(traj) == 0:
        raise NoIgnitionError("empty trajectory")
    if criterion == "max_dTdt":
        if traj.dTdt is None:
            raise ValueError("trajectory carries no dT/dt column")
        rate = traj.dTdt
        # an ignition event needs a heat-release peak in the interior of the run
        i = int(np.argmax(rate))
        if not rate[i] > 0 or i == len(traj) - 1 or traj.T.max() - traj.T[0] < 1.0:
            raise NoIgnitionError("no interior maximum of dT/dt before t_end")
        return float(traj.t[i])
    if criterion == "threshold_rise":
        hits = np.nonzero(traj.T >= traj.T[0] + delta_T)[0]
        if hits.size == 0:
            raise NoIgnitionError(f"temperature never rose by {delta_T} K before t_end")
        return float(traj.t[hits[0]])
    raise ValueError(f"unknown IDT criterion {criterion!r}")
