"""Hierarchical controller: feedback-linearizing wrench computation,
minimum-norm control allocation, low-level actuator loops and
computed-torque arm control.

Default gains place the per-axis error dynamics poles at {-2,-3,-4}
(translation), {-4,-6,-8} (rotation) and {-6,-8,-10} (arm), which keeps
the closed loop auditable: the characteristic polynomial coefficients are
exactly the gain entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ArmState,
    PlatformModel,
    ThrustCommand,
    VehicleParams,
    VehicleState,
    arm_dynamics_terms,
    composite_inertia,
    gravity_torque,
    thrust_vector_to_angles,
)
from .geometry import vee


def _poly_gains(poles):
    """Characteristic coefficients (s^2, s^1, s^0) for three real poles."""
    a, b, c = [-p for p in poles]
    return a + b + c, a * b + a * c + b * c, a * b * c


_KV1, _KV2, _KV3 = _poly_gains((-2.0, -3.0, -4.0))
_KW1, _KW2, _KW3 = _poly_gains((-4.0, -6.0, -8.0))
_KM2, _KM1, _KM3 = _poly_gains((-6.0, -8.0, -10.0))


@dataclass(frozen=True)
class Gains:
    K_v1: np.ndarray = field(default_factory=lambda: np.eye(3) * _KV1)
    K_v2: np.ndarray = field(default_factory=lambda: np.eye(3) * _KV2)
    K_v3: np.ndarray = field(default_factory=lambda: np.eye(3) * _KV3)
    K_w1: np.ndarray = field(default_factory=lambda: np.eye(3) * _KW1)
    K_w2: np.ndarray = field(default_factory=lambda: np.eye(3) * _KW2)
    K_w3: np.ndarray = field(default_factory=lambda: np.eye(3) * _KW3)
    K_M1: np.ndarray = field(default_factory=lambda: np.eye(4) * _KM1)
    K_M2: np.ndarray = field(default_factory=lambda: np.eye(4) * _KM2)
    K_M3: np.ndarray = field(default_factory=lambda: np.eye(4) * _KM3)
    integral_clamp: float = 1.0

    def __post_init__(self):
        for name in ("K_v1", "K_v2", "K_v3", "K_w1", "K_w2", "K_w3",
                     "K_M1", "K_M2", "K_M3"):
            M = np.array(getattr(self, name), dtype=float)
            if M.ndim == 0 or M.ndim == 1:
                M = np.diag(np.broadcast_to(M, (3 if "v" in name or "w" in name else 4,)))
            if np.any(np.diag(M) < 0):
                raise ValueError(f"{name}: gain diagonal must be >= 0")
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    def translation_poles(self):
        return np.roots([1.0, self.K_v1[0, 0], self.K_v2[0, 0], self.K_v3[0, 0]])

    def rotation_poles(self):
        return np.roots([1.0, self.K_w1[0, 0], self.K_w2[0, 0], self.K_w3[0, 0]])


@dataclass(frozen=True)
class WrenchCommand:
    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        f = np.array(self.force, dtype=float).reshape(3)
        t = np.array(self.torque, dtype=float).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise ValueError("wrench command must be finite")
        f.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass
class TrackingErrors:
    e_p: np.ndarray
    e_v: np.ndarray
    e_theta: np.ndarray
    e_omega: np.ndarray
    int_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    int_theta: np.ndarray = field(default_factory=lambda: np.zeros(3))


def tracking_errors(state: VehicleState, ref: VehicleState) -> TrackingErrors:
    """Position/velocity errors plus the SO(3) attitude and rate errors."""
    R = state.rotation()
    Rr = ref.rotation()
    e_theta = 0.5 * vee(R.T @ Rr - Rr.T @ R)
    e_omega = R.T @ Rr @ ref.omega - state.omega
    return TrackingErrors(
        e_p=ref.p - state.p,
        e_v=ref.v - state.v,
        e_theta=e_theta,
        e_omega=e_omega,
    )


def virtual_inputs(errs: TrackingErrors, ref_accel, gains: Gains):
    """Double-integrator virtual inputs (u_v, u_omega) from tracking errors."""
    vd_r, wd_r = ref_accel
    u_v = (np.asarray(vd_r, dtype=float)
           + gains.K_v1 @ errs.e_v + gains.K_v2 @ errs.e_p + gains.K_v3 @ errs.int_p)
    u_w = (np.asarray(wd_r, dtype=float)
           + gains.K_w1 @ errs.e_omega + gains.K_w2 @ errs.e_theta
           + gains.K_w3 @ errs.int_theta)
    return u_v, u_w


def high_level_wrench(model: PlatformModel, arm, state: VehicleState,
                      u_v: np.ndarray, u_w: np.ndarray) -> WrenchCommand:
    """Feedback-linearizing body wrench: cancels gravity, the gravity
    torque of the displaced center of mass and the gyroscopic term so the
    closed loop is a double integrator driven by (u_v, u_omega)."""
    q = arm.q if isinstance(arm, ArmState) else np.asarray(arm, dtype=float)
    R = state.rotation()
    m = model.total_mass
    force = m * R.T @ (np.asarray(u_v, dtype=float) - model.vehicle.gravity_world)
    J = composite_inertia(model, q)
    tau_g = gravity_torque(model, q, R)
    w = state.omega
    torque = J @ np.asarray(u_w, dtype=float) - (tau_g - np.cross(w, J @ w))
    return WrenchCommand(force, torque)


# ---- control allocation ----


@dataclass(frozen=True)
class AllocationResult:
    command: ThrustCommand
    scale: float
    saturated: bool


def allocation_matrix(params: VehicleParams) -> np.ndarray:
    """6x12 map from stacked per-generator body forces to the body wrench."""
    A = np.zeros((6, 12))
    for i, d in enumerate(params.d_offsets):
        A[:3, 3 * i:3 * i + 3] = np.eye(3)
        A[3:, 3 * i:3 * i + 3] = np.array(
            [[0, -d[2], d[1]], [d[2], 0, -d[0]], [-d[1], d[0], 0]]
        )
    return A


def allocate(params: VehicleParams, u_d: WrenchCommand) -> AllocationResult:
    """Minimum-norm thrust allocation with proportional saturation scale-down.

    Solves for per-generator force vectors with the smallest total norm
    reproducing the commanded wrench, then converts each to thrust
    magnitude and gimbal angles. When any thrust would exceed 4 t_max the
    whole solution is scaled so the returned wrench stays parallel to the
    command.
    """
    u = u_d.as_vector() if isinstance(u_d, WrenchCommand) else np.asarray(u_d, dtype=float)
    A = allocation_matrix(params)
    f = A.T @ np.linalg.solve(A @ A.T, u)
    forces = f.reshape(4, 3)
    T = np.linalg.norm(forces, axis=1)
    t_cap = 4.0 * params.t_max
    scale = 1.0
    if np.max(T) > t_cap:
        scale = t_cap / float(np.max(T))
        forces = forces * scale
    Ts = np.empty(4)
    al = np.empty(4)
    be = np.empty(4)
    for i in range(4):
        Ts[i], al[i], be[i] = thrust_vector_to_angles(params, i, forces[i])
    return AllocationResult(ThrustCommand(Ts, al, be), scale, scale < 1.0)


# ---- low-level actuator loops ----


@dataclass(frozen=True)
class ActuatorParams:
    """Inner-loop actuator model: PID-driven gimbal angle rates plus a
    first-order thrust lag with motor time constant."""

    gimbal_kp: float = 20.0  # 1/s, pure P by default -> 50 ms time constant
    gimbal_ki: float = 0.0
    gimbal_kd: float = 0.0
    thrust_tau: float = 0.03  # s


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class ActuatorState:
    actual: ThrustCommand
    gimbal_int: np.ndarray = field(default_factory=lambda: np.zeros((2, 4)))
    gimbal_prev_err: np.ndarray = field(default_factory=lambda: np.zeros((2, 4)))


def low_level_actuator(cmd: ThrustCommand, actual: ThrustCommand, dt: float,
                       params: VehicleParams,
                       act: ActuatorParams = ActuatorParams(),
                       state: ActuatorState | None = None) -> ThrustCommand:
    """One inner-loop update at the quadcopter rate.

    Gimbal angles follow a PID-driven rate (wrap-aware); thrust follows a
    first-order lag toward the saturation-clamped command.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t_cap = 4.0 * params.t_max
    T_cmd = np.clip(cmd.T, 0.0, t_cap)
    decay = 1.0 - np.exp(-dt / act.thrust_tau)
    T_new = actual.T + decay * (T_cmd - actual.T)
    angles_new = []
    for row, (c, a) in enumerate(((cmd.alpha, actual.alpha), (cmd.beta, actual.beta))):
        err = _wrap_angle(c - a)
        rate = act.gimbal_kp * err
        if state is not None:
            state.gimbal_int[row] += err * dt
            rate = rate + act.gimbal_ki * state.gimbal_int[row]
            rate = rate + act.gimbal_kd * (err - state.gimbal_prev_err[row]) / dt
            state.gimbal_prev_err[row] = err
        angles_new.append(_wrap_angle(a + dt * rate))
    return ThrustCommand(np.clip(T_new, 0.0, t_cap), angles_new[0], angles_new[1])


# ---- computed-torque arm control ----


def arm_torque(model: PlatformModel, arm: ArmState, ref, gains: Gains,
               int_e: np.ndarray | None = None, gravity_body=None) -> np.ndarray:
    """Computed-torque command tau = M q_dd_desired + C + G."""
    q_r, qd_r, qdd_r = (np.asarray(x, dtype=float) for x in ref)
    e = q_r - arm.q
    ed = qd_r - arm.qd
    qdd_d = qdd_r + gains.K_M1 @ e + gains.K_M2 @ ed
    if int_e is not None:
        qdd_d = qdd_d + gains.K_M3 @ np.asarray(int_e, dtype=float)
    M, C, G = arm_dynamics_terms(model, arm, gravity_body)
    return M @ qdd_d + C + G


# ---- stateful trackers used by the simulator ----


@dataclass
class VehicleTracker:
    model: PlatformModel
    gains: Gains = field(default_factory=Gains)

    def __post_init__(self):
        self.int_p = np.zeros(3)
        self.int_theta = np.zeros(3)

    def reset(self):
        self.int_p[:] = 0.0
        self.int_theta[:] = 0.0

    def step(self, state: VehicleState, arm, ref: VehicleState, ref_accel, dt: float):
        errs = tracking_errors(state, ref)
        c = self.gains.integral_clamp
        self.int_p = np.clip(self.int_p + errs.e_p * dt, -c, c)
        self.int_theta = np.clip(self.int_theta + errs.e_theta * dt, -c, c)
        errs.int_p = self.int_p
        errs.int_theta = self.int_theta
        u_v, u_w = virtual_inputs(errs, ref_accel, self.gains)
        return high_level_wrench(self.model, arm, state, u_v, u_w), errs


@dataclass
class ArmTracker:
    model: PlatformModel
    gains: Gains = field(default_factory=Gains)

    def __post_init__(self):
        self.int_e = np.zeros(self.model.arm_dof)

    def reset(self):
        self.int_e[:] = 0.0

    def step(self, arm: ArmState, ref, dt: float, gravity_body=None) -> np.ndarray:
        q_r = np.asarray(ref[0], dtype=float)
        c = self.gains.integral_clamp
        self.int_e = np.clip(self.int_e + (q_r - arm.q) * dt, -c, c)
        return arm_torque(self.model, arm, ref, self.gains, self.int_e, gravity_body)
