"""Shared helper: gravity-compensated arm energy drift over an interval."""

import numpy as np

from vkcuam.dynamics import ArmState, arm_accel, arm_dynamics_terms, arm_kinetic_energy


def gravity_compensated_drift(model, t_end=1.0, dt=1e-4,
                              q0=(0.3, 0.5, -0.4, 0.2), qd0=(0.5, -0.8, 0.6, 1.0)):
    q = np.array(q0, dtype=float)
    qd = np.array(qd0, dtype=float)
    ke0 = arm_kinetic_energy(model, ArmState(q, qd))

    def f(q_, qd_):
        _, _, G = arm_dynamics_terms(model, ArmState(q_, qd_))
        return arm_accel(model, ArmState(q_, qd_), G)

    n = int(round(t_end / dt))
    for _ in range(n):
        k1v = f(q, qd)
        k1x = qd
        k2v = f(q + dt / 2 * k1x, qd + dt / 2 * k1v)
        k2x = qd + dt / 2 * k1v
        k3v = f(q + dt / 2 * k2x, qd + dt / 2 * k2v)
        k3x = qd + dt / 2 * k2v
        k4v = f(q + dt * k3x, qd + dt * k3v)
        k4x = qd + dt * k3v
        q = q + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        qd = qd + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return abs(arm_kinetic_energy(model, ArmState(q, qd)) - ke0)
