"""Platform dynamics: simplified vehicle model, manipulator model,
configuration-dependent composite inertia and gravity torque.

World z points up and gravity is (0, 0, -g). The vehicle's rotational
dynamics live in the body frame; translational dynamics in the world
frame. The manipulator is treated as a fixed-base chain hanging from the
body, with gravity rotated into the body frame; base-motion coupling onto
the arm is intentionally dropped (the simplified model compensates the
arm's gravity torque on the vehicle side instead).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chain import FIXED, PRISMATIC, REVOLUTE, ChainError, Joint, KinematicChain, Link
from .collision import CollisionPrimitive
from .geometry import RigidTransform, axis_angle, rpy_to_matrix

CM2_TO_M2 = 1e-4  # inertia table values are given in kg*cm^2


@dataclass(frozen=True)
class VehicleParams:
    """Flying-vehicle parameters; defaults follow the hardware table."""

    m0: float = 0.168
    m_gen: tuple = (0.222, 0.222, 0.222, 0.222)
    I0: np.ndarray = field(default_factory=lambda: np.diag([0.30, 0.30, 0.60]) * CM2_TO_M2)
    I_gen: np.ndarray = field(default_factory=lambda: np.diag([2.23, 2.84, 4.51]) * CM2_TO_M2)
    arm_length: float = 0.21
    t_max: float = 2.6
    g: float = 9.81

    def __post_init__(self):
        if self.m0 <= 0 or any(m <= 0 for m in self.m_gen):
            raise ValueError("masses must be positive")
        for M in (self.I0, self.I_gen):
            if np.max(np.abs(M - M.T)) > 1e-12 or np.min(np.linalg.eigvalsh(M)) < -1e-12:
                raise ValueError("inertias must be symmetric PSD")
        object.__setattr__(self, "m_gen", tuple(float(m) for m in self.m_gen))

    @property
    def d_offsets(self) -> np.ndarray:
        """Generator positions, symmetric '+' layout at radius arm_length."""
        l = self.arm_length
        return np.array([[l, 0, 0], [0, l, 0], [-l, 0, 0], [0, -l, 0]], dtype=float)

    @property
    def gravity_world(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.g])

    def tube_axes(self):
        """Per-generator (tilt axis a_i, twist axis b_i) in the body frame."""
        d = self.d_offsets
        a = d / np.linalg.norm(d, axis=1, keepdims=True)
        b = np.cross([0.0, 0.0, 1.0], a)
        return a, b


@dataclass(frozen=True)
class VehicleState:
    p: np.ndarray
    theta: np.ndarray  # roll, pitch, yaw
    v: np.ndarray
    omega: np.ndarray  # body frame

    def __post_init__(self):
        for name in ("p", "theta", "v", "omega"):
            a = np.array(getattr(self, name), dtype=float).reshape(3)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def rotation(self) -> np.ndarray:
        return rpy_to_matrix(self.theta)

    @staticmethod
    def rest(p=(0.0, 0.0, 0.0), theta=(0.0, 0.0, 0.0)) -> "VehicleState":
        return VehicleState(np.asarray(p), np.asarray(theta), np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        qd = np.array(self.qd, dtype=float).reshape(q.shape)
        q.flags.writeable = False
        qd.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)

    @staticmethod
    def rest(dof: int = 4) -> "ArmState":
        return ArmState(np.zeros(dof), np.zeros(dof))


@dataclass(frozen=True)
class ThrustCommand:
    """Per-generator thrust magnitude, tilt angle and twist angle."""

    T: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("T", "alpha", "beta"):
            a = np.array(getattr(self, name), dtype=float).reshape(4)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if not np.all(np.isfinite(self.T)) or np.any(self.T < -1e-12):
            raise ValueError("thrust magnitudes must be finite and >= 0")

    @staticmethod
    def zero() -> "ThrustCommand":
        return ThrustCommand(np.zeros(4), np.zeros(4), np.zeros(4))

    def within_saturation(self, params: VehicleParams, tol: float = 1e-9) -> bool:
        return bool(np.all(self.T <= 4.0 * params.t_max + tol))


def params_to_dict(p: VehicleParams) -> dict:
    """Parameter file form: hardware-table field names, table units
    (masses kg, inertias kg*cm^2 diagonals, lengths m, thrust N)."""
    return {
        "m_B_0_kg": p.m0,
        "m_B_i_kg": list(p.m_gen),
        "diag_I_B_0_kgcm2": (np.diag(p.I0) / CM2_TO_M2).tolist(),
        "diag_I_B_i_kgcm2": (np.diag(p.I_gen) / CM2_TO_M2).tolist(),
        "l_m": p.arm_length,
        "t_max_N": p.t_max,
        "g_mps2": p.g,
    }


def params_from_dict(d: dict) -> VehicleParams:
    base = VehicleParams()
    m_gen = d.get("m_B_i_kg", base.m_gen)
    if np.isscalar(m_gen):
        m_gen = (float(m_gen),) * 4
    return VehicleParams(
        m0=float(d.get("m_B_0_kg", base.m0)),
        m_gen=tuple(float(m) for m in m_gen),
        I0=np.diag(np.asarray(d.get("diag_I_B_0_kgcm2",
                                    np.diag(base.I0) / CM2_TO_M2), dtype=float)) * CM2_TO_M2,
        I_gen=np.diag(np.asarray(d.get("diag_I_B_i_kgcm2",
                                       np.diag(base.I_gen) / CM2_TO_M2), dtype=float)) * CM2_TO_M2,
        arm_length=float(d.get("l_m", base.arm_length)),
        t_max=float(d.get("t_max_N", base.t_max)),
        g=float(d.get("g_mps2", base.g)),
    )


def load_params(path) -> VehicleParams:
    import json

    with open(path) as f:
        return params_from_dict(json.load(f))


def save_params(p: VehicleParams, path):
    import json

    with open(path, "w") as f:
        json.dump(params_to_dict(p), f, indent=2)


def uam_robot_chain() -> KinematicChain:
    """Body-rooted kinematic model of the platform: body link plus the
    4-DoF manipulator hanging underneath, ending in a massless TCP link.

    Link masses and inertias for the three arm links follow the hardware
    table; the gripper link carries the remaining platform mass so the
    whole model sums to the quoted 1.21 kg take-off weight. Geometry
    (mount offset, link lengths) is a desk-scale stand-in.
    """
    # vehicle hull: center sphere plus one per rotor pod (covers the props)
    pod_r = 0.07
    pods = tuple(
        CollisionPrimitive(
            "sphere", (pod_r,), attached_to="body",
            offset=RigidTransform.from_rpy_xyz(xyz=xyz), name=f"pod{i}",
        )
        for i, xyz in enumerate(
            [(0.21, 0, 0), (0, 0.21, 0), (-0.21, 0, 0), (0, -0.21, 0)]
        )
    )
    body = Link(
        name="body",
        mass=0.0,
        collision_geoms=(
            CollisionPrimitive("sphere", (0.09,), attached_to="body", name="frame"),
        ) + pods,
    )
    down = lambda z: RigidTransform.from_rpy_xyz(xyz=(0.0, 0.0, z))
    cap = lambda r, h, z, link: CollisionPrimitive(
        "capsule", (r, h), attached_to=link, offset=down(z)
    )
    pairs = [
        (
            Joint("j_arm1", REVOLUTE, axis=(0, 0, 1), origin=down(-0.05),
                  limits=(-2.9, 2.9), vel_limit=2.5, acc_limit=12.0),
            Link("arm_link1", mass=0.044, com=(0, 0, -0.02),
                 inertia=np.array([0.22, 0.21, 0.04]) * CM2_TO_M2,
                 collision_geoms=(cap(0.015, 0.02, -0.02, "arm_link1"),)),
        ),
        (
            Joint("j_arm2", REVOLUTE, axis=(0, 1, 0), origin=down(-0.04),
                  limits=(-2.2, 2.2), vel_limit=2.5, acc_limit=12.0),
            Link("arm_link2", mass=0.040, com=(0, 0, -0.045),
                 inertia=np.array([0.22, 0.19, 0.06]) * CM2_TO_M2,
                 collision_geoms=(cap(0.012, 0.045, -0.045, "arm_link2"),)),
        ),
        (
            Joint("j_arm3", REVOLUTE, axis=(0, 1, 0), origin=down(-0.09),
                  limits=(-2.4, 2.4), vel_limit=2.5, acc_limit=12.0),
            Link("arm_link3", mass=0.043, com=(0, 0, -0.045),
                 inertia=np.array([0.82, 0.80, 0.15]) * CM2_TO_M2,
                 collision_geoms=(cap(0.012, 0.045, -0.045, "arm_link3"),)),
        ),
        (
            Joint("j_arm4", REVOLUTE, axis=(0, 0, 1), origin=down(-0.09),
                  limits=(-2.9, 2.9), vel_limit=3.0, acc_limit=15.0),
            Link("gripper", mass=0.027, com=(0, 0, -0.03),
                 inertia=np.array([0.10, 0.10, 0.05]) * CM2_TO_M2,
                 collision_geoms=(
                     CollisionPrimitive("sphere", (0.018,), attached_to="gripper",
                                        offset=down(-0.04)),
                 )),
        ),
        (Joint("j_tcp", FIXED, origin=down(-0.06)), Link("tcp")),
    ]
    return KinematicChain(body, pairs)


EE_LINK = "tcp"


@dataclass(frozen=True)
class PlatformModel:
    """Vehicle parameters plus the body-rooted robot chain."""

    vehicle: VehicleParams = field(default_factory=VehicleParams)
    robot: KinematicChain = field(default_factory=uam_robot_chain)
    ee_link: str = EE_LINK

    @property
    def arm_dof(self) -> int:
        return self.robot.dof

    @property
    def total_mass(self) -> float:
        return (
            self.vehicle.m0
            + sum(self.vehicle.m_gen)
            + sum(l.mass for l in self.robot.links)
        )

    def gravity_body(self, R_WB: np.ndarray) -> np.ndarray:
        return R_WB.T @ self.vehicle.gravity_world


def _arm_frames(model: PlatformModel, q_M) -> tuple:
    return model.robot.fk_frames(np.asarray(q_M, dtype=float))


def composite_inertia(model: PlatformModel, arm) -> np.ndarray:
    """Body-frame inertia of the whole platform about the body origin.

    Generators are taken at their gimbal-neutral orientation; arm links are
    transported by the parallel-axis theorem at the current configuration.
    """
    q = arm.q if isinstance(arm, ArmState) else np.asarray(arm, dtype=float)
    v = model.vehicle
    J = np.array(v.I0)
    eye = np.eye(3)
    for m_i, d in zip(v.m_gen, v.d_offsets):
        J = J + v.I_gen + m_i * ((d @ d) * eye - np.outer(d, d))
    rot, tr = _arm_frames(model, q)
    for k, link in enumerate(model.robot.links):
        if link.mass == 0.0 and not np.any(link.inertia):
            continue
        R = rot[k]
        c = R @ link.com + tr[k]
        J = J + R @ link.inertia @ R.T + link.mass * ((c @ c) * eye - np.outer(c, c))
    return J


def mass_moment(model: PlatformModel, arm) -> np.ndarray:
    """First mass moment sum(m_j c_j) of the platform in the body frame."""
    q = arm.q if isinstance(arm, ArmState) else np.asarray(arm, dtype=float)
    v = model.vehicle
    moment = np.zeros(3)  # frame com sits at the body origin
    for m_i, d in zip(v.m_gen, v.d_offsets):
        moment = moment + m_i * d
    rot, tr = _arm_frames(model, q)
    for k, link in enumerate(model.robot.links):
        if link.mass == 0.0:
            continue
        moment = moment + link.mass * (rot[k] @ link.com + tr[k])
    return moment


def gravity_torque(model: PlatformModel, arm, attitude) -> np.ndarray:
    """Body-frame gravity torque about the body origin.

    Equals r_com x (m R_WB^T g_world) with r_com the whole-platform center
    of mass offset; attitude may be roll-pitch-yaw or a rotation matrix.
    """
    R = np.asarray(attitude, dtype=float)
    if R.shape != (3, 3):
        R = rpy_to_matrix(R.reshape(3))
    g_body = R.T @ model.vehicle.gravity_world
    return np.cross(mass_moment(model, arm), g_body)


def gimbal_rotation(a: np.ndarray, b: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Thrust-generator attitude: tilt by alpha about the arm-tube axis a,
    then twist by beta about the carried in-plane axis b."""
    return axis_angle(a, alpha) @ axis_angle(b, beta)


def generator_forces(params: VehicleParams, cmd: ThrustCommand) -> np.ndarray:
    """Per-generator thrust vectors in the body frame (4x3)."""
    a_ax, b_ax = params.tube_axes()
    z = np.array([0.0, 0.0, 1.0])
    out = np.empty((4, 3))
    for i in range(4):
        out[i] = gimbal_rotation(a_ax[i], b_ax[i], cmd.alpha[i], cmd.beta[i]) @ (z * cmd.T[i])
    return out


def vehicle_wrench(params: VehicleParams, cmd: ThrustCommand) -> np.ndarray:
    """Total body wrench [force; torque] produced by a thrust command."""
    f = generator_forces(params, cmd)
    d = params.d_offsets
    force = f.sum(axis=0)
    torque = np.cross(d, f).sum(axis=0)
    return np.concatenate([force, torque])


def thrust_vector_to_angles(params: VehicleParams, i: int, f: np.ndarray):
    """(T, alpha, beta) reproducing body-frame force f at generator i."""
    a_ax, b_ax = params.tube_axes()
    T = float(np.linalg.norm(f))
    if T < 1e-12:
        return 0.0, 0.0, 0.0
    n = f / T
    z = np.array([0.0, 0.0, 1.0])
    n_loc = np.array([a_ax[i] @ n, b_ax[i] @ n, z @ n])
    beta = float(np.arcsin(np.clip(n_loc[0], -1.0, 1.0)))
    alpha = float(np.arctan2(-n_loc[1], n_loc[2]))
    return T, alpha, beta


def vehicle_accel(model: PlatformModel, arm, state: VehicleState, u: np.ndarray):
    """(v_dot world, omega_dot body) of the simplified vehicle model."""
    R = state.rotation()
    return vehicle_accel_R(model, arm, R, state.omega, u)


def vehicle_accel_R(model: PlatformModel, arm, R_WB: np.ndarray, omega: np.ndarray,
                    u: np.ndarray, extra_wrench=None):
    q = arm.q if isinstance(arm, ArmState) else np.asarray(arm, dtype=float)
    u = np.asarray(u, dtype=float).reshape(6)
    f_body = u[:3]
    tau_body = u[3:]
    if extra_wrench is not None:
        f_body = f_body + extra_wrench[:3]
        tau_body = tau_body + extra_wrench[3:]
    m = model.total_mass
    v_dot = R_WB @ f_body / m + model.vehicle.gravity_world
    J = composite_inertia(model, q)
    tau_g = np.cross(mass_moment(model, q), R_WB.T @ model.vehicle.gravity_world)
    w_dot = np.linalg.solve(J, tau_body + tau_g - np.cross(omega, J @ omega))
    return v_dot, w_dot


# ---- manipulator dynamics ----


def _arm_packed(model: PlatformModel):
    c = model.robot
    return (c._kinds, c._axes, c._org_rot, c._org_tr, c._qidx,
            c._masses, c._coms, c._inertias)


def default_gravity_body(model: PlatformModel) -> np.ndarray:
    return np.array([0.0, 0.0, -model.vehicle.g])


def arm_dynamics_terms(model: PlatformModel, arm: ArmState, gravity_body=None):
    """(M, C, G): mass matrix, Coriolis/centrifugal vector, gravity vector.

    gravity_body defaults to level hover; pass R_WB^T g_world during flight.
    """
    if gravity_body is None:
        gravity_body = default_gravity_body(model)
    packed = _arm_packed(model)
    q = np.asarray(arm.q, dtype=float)
    qd = np.asarray(arm.qd, dtype=float)
    zero = np.zeros_like(q)
    M = kernels.mass_matrix(*packed[:5], *packed[5:], q)
    C = kernels.rne(*packed, q, qd, zero, np.zeros(3))
    G = kernels.rne(*packed, q, zero, zero, np.asarray(gravity_body, dtype=float))
    return M, C, G


def arm_inverse_dynamics(model: PlatformModel, q, qd, qdd, gravity_body=None):
    if gravity_body is None:
        gravity_body = default_gravity_body(model)
    packed = _arm_packed(model)
    return kernels.rne(*packed, np.asarray(q, float), np.asarray(qd, float),
                       np.asarray(qdd, float), np.asarray(gravity_body, float))


def arm_accel(model: PlatformModel, arm: ArmState, tau_M: np.ndarray,
              F_ext=None, J_ext=None, gravity_body=None) -> np.ndarray:
    """Joint accelerations q_dd = M^-1 (tau + J_ext^T F_ext - C - G)."""
    M, C, G = arm_dynamics_terms(model, arm, gravity_body)
    rhs = np.asarray(tau_M, dtype=float) - C - G
    if F_ext is not None:
        rhs = rhs + np.asarray(J_ext, dtype=float).T @ np.asarray(F_ext, dtype=float)
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as e:
        raise ChainError("singular arm mass matrix; corrupt parameters") from e


def coriolis_matrix(model: PlatformModel, arm: ArmState, h: float = 1e-6) -> np.ndarray:
    """Christoffel-form Coriolis matrix from central differences of M.

    Satisfies C(q, qd) qd == the RNE Coriolis vector and makes M_dot - 2C
    skew-symmetric.
    """
    q = np.asarray(arm.q, dtype=float)
    qd = np.asarray(arm.qd, dtype=float)
    n = q.shape[0]
    dM = mass_matrix_partials(model, q, h)
    C = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += (dM[k][i, j] + dM[j][i, k] - dM[i][j, k]) * qd[k]
            C[i, j] = 0.5 * s
    return C


def mass_matrix_partials(model: PlatformModel, q, h: float = 1e-6):
    packed = _arm_packed(model)
    q = np.asarray(q, dtype=float)
    out = []
    for k in range(q.shape[0]):
        qp = q.copy()
        qm = q.copy()
        qp[k] += h
        qm[k] -= h
        Mp = kernels.mass_matrix(*packed[:5], *packed[5:], qp)
        Mm = kernels.mass_matrix(*packed[:5], *packed[5:], qm)
        out.append((Mp - Mm) / (2.0 * h))
    return out


def mass_matrix_dot(model: PlatformModel, arm: ArmState, h: float = 1e-6) -> np.ndarray:
    qd = np.asarray(arm.qd, dtype=float)
    dM = mass_matrix_partials(model, arm.q, h)
    return sum(dM_k * qd_k for dM_k, qd_k in zip(dM, qd))


def arm_potential_energy(model: PlatformModel, q, gravity_body=None) -> float:
    if gravity_body is None:
        gravity_body = default_gravity_body(model)
    g = np.asarray(gravity_body, dtype=float)
    rot, tr = _arm_frames(model, q)
    U = 0.0
    for k, link in enumerate(model.robot.links):
        if link.mass == 0.0:
            continue
        U -= link.mass * g @ (rot[k] @ link.com + tr[k])
    return float(U)


def arm_kinetic_energy(model: PlatformModel, arm: ArmState) -> float:
    M, _, _ = arm_dynamics_terms(model, arm)
    return float(0.5 * arm.qd @ M @ arm.qd)
