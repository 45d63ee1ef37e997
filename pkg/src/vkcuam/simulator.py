"""Fixed-step rigid-body simulation of the platform and scene objects.

RK4 at the physics rate; the high-level controller runs at 100 Hz, the
low-level actuator loops at 500 Hz, commands cross a 20 ms delay line and
measurements carry additive Gaussian noise. Grasps on articulated objects
are a stiff 6-D spring-damper between the gripper and the handle; free
objects ride rigidly on the gripper and settle onto a support surface
when released. Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .chain import base_pose_from_state
from .controller import (
    ActuatorParams,
    ArmTracker,
    Gains,
    VehicleTracker,
    allocate,
    low_level_actuator,
)
from .dynamics import (
    ArmState,
    PlatformModel,
    ThrustCommand,
    VehicleState,
    arm_accel,
    composite_inertia,
    mass_moment,
    vehicle_wrench,
)
from .geometry import RigidTransform, hat, matrix_to_rpy, rotation_log, rpy_to_matrix
from .planner import execute_sequence

GRAVITY_DIR = np.array([0.0, 0.0, -1.0])


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    physics_dt: float = 1e-3
    high_level_rate: float = 100.0
    low_level_rate: float = 500.0
    command_delay: float = 0.020
    noise_pos_std: float = 5e-4
    noise_att_std: float = 1.7e-3
    seed: int = 0

    def __post_init__(self):
        for rate in (self.high_level_rate, self.low_level_rate):
            n = 1.0 / (rate * self.physics_dt)
            if abs(n - round(n)) > 1e-9:
                raise ValueError("controller rates must divide the physics rate")
        ticks = self.command_delay * self.high_level_rate
        if abs(ticks - round(ticks)) > 1e-9:
            raise ValueError("delay must be a whole number of high-level periods")

    @property
    def steps_per_tick(self) -> int:
        return int(round(1.0 / (self.high_level_rate * self.physics_dt)))

    @property
    def steps_per_lowlevel(self) -> int:
        return int(round(1.0 / (self.low_level_rate * self.physics_dt)))

    @property
    def delay_ticks(self) -> int:
        return int(round(self.command_delay * self.high_level_rate))


@dataclass(frozen=True)
class GraspParams:
    # rotational stiffness/damping sized for the wrist link inertia
    # (~5e-6 kg m^2): the damping pole c/I must stay inside the RK4
    # stability region at the 1 kHz physics rate
    lin_k: float = 500.0
    lin_c: float = 20.0
    rot_k: float = 2.0
    rot_c: float = 0.002
    attach_dist: float = 0.02
    attach_speed: float = 0.1


def inject_noise_delay(measurement: VehicleState, config: SimConfig, rng) -> VehicleState:
    """Additive Gaussian noise on measured position and attitude."""
    return VehicleState(
        measurement.p + rng.normal(0.0, config.noise_pos_std, 3),
        measurement.theta + rng.normal(0.0, config.noise_att_std, 3),
        measurement.v,
        measurement.omega,
    )


class DelayLine:
    """Fixed command latency measured in whole high-level ticks."""

    def __init__(self, ticks: int, initial):
        # a command pushed at tick k pops at tick k + ticks
        self.buf = [initial] * max(int(ticks), 0)

    def push(self, cmd):
        self.buf.append(cmd)
        return self.buf.pop(0)


@dataclass
class ObjectSim:
    chain: object
    base_pose: RigidTransform
    q: np.ndarray
    qd: np.ndarray
    handle_link: str
    damping: float
    friction: float
    free_pose: RigidTransform | None = None  # free (0-DoF) objects only

    def is_free(self) -> bool:
        return self.chain.dof == 0

    def link_pose(self, link: str) -> RigidTransform:
        if self.is_free() and self.free_pose is not None:
            return self.free_pose
        return self.base_pose @ self.chain.fk(self.q, link)


@dataclass
class SimWorld:
    model: PlatformModel
    config: SimConfig
    grasp: GraspParams = field(default_factory=GraspParams)
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q_M: np.ndarray = field(default_factory=lambda: np.zeros(4))
    qd_M: np.ndarray = field(default_factory=lambda: np.zeros(4))
    actual: ThrustCommand = field(default_factory=ThrustCommand.zero)
    objects: dict = field(default_factory=dict)
    attached: str | None = None
    grasp_rest: RigidTransform | None = None
    t: float = 0.0
    n_physics: int = 0
    n_lowlevel: int = 0
    n_highlevel: int = 0

    def vehicle_state(self) -> VehicleState:
        return VehicleState(self.p, matrix_to_rpy(self.R), self.v, self.w)

    def tcp_pose(self) -> RigidTransform:
        body = RigidTransform.unsafe(self.R, self.p)
        return body @ self.model.robot.fk(self.q_M, self.model.ee_link)


def _object_packed(chain):
    return (chain._kinds, chain._axes, chain._org_rot, chain._org_tr, chain._qidx,
            chain._masses, chain._coms, chain._inertias)


def _grasp_coupling(world: SimWorld, p, R, v, w, q_M, qd_M, obj: ObjectSim,
                    q_o, qd_o):
    """Spring-damper wrench at the handle: returns (generalized force on the
    object joints, 6-D external wrench on the arm at the TCP in body frame,
    6-D extra wrench on the vehicle at the body origin in body frame)."""
    model = world.model
    gp = world.grasp
    robot = model.robot
    rot_r, tr_r = robot.fk_frames(q_M)
    tcp_idx = robot.link_index(model.ee_link)
    body = RigidTransform.unsafe(R, p)
    G = body @ RigidTransform.unsafe(rot_r[tcp_idx], tr_r[tcp_idx])
    H_des = G @ world.grasp_rest
    H = obj.base_pose @ obj.chain.fk(q_o, obj.handle_link)
    e_t = H.translation - H_des.translation
    e_r = H_des.rotation @ rotation_log(H_des.rotation.T @ H.rotation)

    # handle-side velocity from the object joints
    J_o = obj.chain.jacobian(q_o, obj.handle_link)
    Rb = obj.base_pose.rotation
    v_H = Rb @ (J_o[:3] @ qd_o)
    w_H = Rb @ (J_o[3:] @ qd_o)

    # gripper-side velocity of the desired-handle frame (rigid on the arm)
    x_b = R.T @ (H_des.translation - p)  # body coords of the anchor point
    J_pnt = robot.jacobian(q_M, model.ee_link, point_world=x_b)
    v_G = v + R @ (np.cross(w, x_b) + J_pnt[:3] @ qd_M)
    w_G = R @ (w + J_pnt[3:] @ qd_M)

    F = -gp.lin_k * e_t - gp.lin_c * (v_H - v_G)
    tau = -gp.rot_k * e_r - gp.rot_c * (w_H - w_G)

    tau_obj = J_o.T @ np.concatenate([Rb.T @ F, Rb.T @ tau])

    x_tcp = G.translation
    lever = H.translation - x_tcp
    F_arm = np.concatenate([R.T @ (-F), R.T @ (np.cross(lever, -F) - tau)])
    lever_body = H.translation - p
    F_veh = np.concatenate([R.T @ (-F), R.T @ (np.cross(lever_body, -F) - tau)])
    return tau_obj, F_arm, F_veh


def _carried_object_wrench(world: SimWorld, p, R, q_M, obj: ObjectSim):
    """Weight of a rigidly carried free object, on the arm and vehicle."""
    model = world.model
    m_o = sum(l.mass for l in obj.chain.links)
    body = RigidTransform.unsafe(R, p)
    G = body @ model.robot.fk(q_M, model.ee_link)
    pose = G @ world.grasp_rest
    F = m_o * model.vehicle.g * GRAVITY_DIR
    lever_tcp = pose.translation - G.translation
    F_arm = np.concatenate([R.T @ F, R.T @ np.cross(lever_tcp, F)])
    lever_body = pose.translation - p
    F_veh = np.concatenate([R.T @ F, R.T @ np.cross(lever_body, F)])
    return F_arm, F_veh


def _derivatives(world: SimWorld, u_thrust, tau_M):
    """Continuous dynamics at the world's current (possibly staged) state."""
    model = world.model
    p, R, v, w = world.p, world.R, world.v, world.w
    q_M, qd_M = world.q_M, world.qd_M
    g_body = R.T @ (model.vehicle.g * GRAVITY_DIR)

    F_arm = None
    F_veh = np.zeros(6)
    obj_acc = {}
    if world.attached is not None:
        obj = world.objects[world.attached]
        if obj.is_free():
            F_arm, F_veh = _carried_object_wrench(world, p, R, q_M, obj)
        else:
            tau_obj, F_arm, F_veh = _grasp_coupling(
                world, p, R, v, w, q_M, qd_M, obj, obj.q, obj.qd)
            obj_acc[world.attached] = _object_joint_accel(obj, tau_obj, model)
    for name, obj in world.objects.items():
        if name == world.attached or obj.is_free():
            continue
        obj_acc[name] = _object_joint_accel(obj, np.zeros(obj.chain.dof), model)

    J_ext = model.robot.jacobian(q_M, model.ee_link) if F_arm is not None else None
    qdd_M = arm_accel(model, ArmState(q_M, qd_M), tau_M,
                      F_ext=F_arm, J_ext=J_ext, gravity_body=g_body)
    vd, wd = _vehicle_accel_fast(model, q_M, R, w, u_thrust, F_veh)
    return vd, wd, qdd_M, obj_acc


def _vehicle_accel_fast(model, q_M, R, w, u, extra):
    m = model.total_mass
    g_world = model.vehicle.g * GRAVITY_DIR
    f_body = u[:3] + extra[:3]
    tau_body = u[3:] + extra[3:]
    v_dot = R @ f_body / m + g_world
    J = composite_inertia(model, q_M)
    tau_g = np.cross(mass_moment(model, q_M), R.T @ g_world)
    w_dot = np.linalg.solve(J, tau_body + tau_g - np.cross(w, J @ w))
    return v_dot, w_dot


STOP_K = 500.0  # object joint end stops (N/m or N m/rad)
STOP_C = 20.0


def _object_joint_accel(obj: ObjectSim, tau_ext, model):
    if obj.chain.dof == 0:
        return np.zeros(0)
    packed = _object_packed(obj.chain)
    g_base = obj.base_pose.rotation.T @ (model.vehicle.g * GRAVITY_DIR)
    zeros = np.zeros(obj.chain.dof)
    M = kernels.mass_matrix(*packed[:5], *packed[5:], obj.q)
    bias = kernels.rne(*packed, obj.q, obj.qd, zeros, g_base)
    tau = tau_ext - bias - obj.damping * obj.qd - obj.friction * np.tanh(obj.qd / 0.01)
    lo, hi = obj.chain.joint_limits()
    under = np.maximum(0.0, lo - obj.q)
    over = np.maximum(0.0, obj.q - hi)
    tau = tau + STOP_K * under - STOP_K * over
    in_stop = (under > 0) | (over > 0)
    tau = tau - STOP_C * obj.qd * in_stop
    return np.linalg.solve(M, tau)


def step(world: SimWorld, commands, dt: float) -> SimWorld:
    """One RK4 physics step under fixed actuator outputs.

    commands = (ThrustCommand actuals, arm torques). Mutates and returns
    the world. Raises SimulationError on divergence.
    """
    thrust_actual, tau_M = commands
    u_thrust = vehicle_wrench(world.model.vehicle, thrust_actual)

    names = [n for n, o in world.objects.items() if not o.is_free()]

    def pack():
        return (world.p.copy(), world.R.copy(), world.v.copy(), world.w.copy(),
                world.q_M.copy(), world.qd_M.copy(),
                {n: (world.objects[n].q.copy(), world.objects[n].qd.copy())
                 for n in names})

    def load(s):
        world.p, world.R, world.v, world.w = s[0], s[1], s[2], s[3]
        world.q_M, world.qd_M = s[4], s[5]
        for n in names:
            world.objects[n].q, world.objects[n].qd = s[6][n]

    def deriv():
        vd, wd, qdd, obj_acc = _derivatives(world, u_thrust, tau_M)
        return (world.v.copy(), world.R @ hat(world.w), vd, wd,
                world.qd_M.copy(), qdd,
                {n: (world.objects[n].qd.copy(), obj_acc[n]) for n in names})

    def blend(s0, k, h):
        return (
            s0[0] + h * k[0], s0[1] + h * k[1], s0[2] + h * k[2], s0[3] + h * k[3],
            s0[4] + h * k[4], s0[5] + h * k[5],
            {n: (s0[6][n][0] + h * k[6][n][0], s0[6][n][1] + h * k[6][n][1])
             for n in names},
        )

    s0 = pack()
    k1 = deriv()
    load(blend(s0, k1, dt / 2))
    k2 = deriv()
    load(blend(s0, k2, dt / 2))
    k3 = deriv()
    load(blend(s0, k3, dt))
    k4 = deriv()

    def rk(i):
        return s0[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])

    final = (rk(0), rk(1), rk(2), rk(3), rk(4), rk(5),
             {n: (s0[6][n][0] + dt / 6.0 * (k1[6][n][0] + 2 * k2[6][n][0]
                                            + 2 * k3[6][n][0] + k4[6][n][0]),
                  s0[6][n][1] + dt / 6.0 * (k1[6][n][1] + 2 * k2[6][n][1]
                                            + 2 * k3[6][n][1] + k4[6][n][1]))
              for n in names})
    load(final)
    # project the rotation back onto SO(3)
    U, _, Vt = np.linalg.svd(world.R)
    world.R = U @ Vt
    if world.attached is not None:
        obj = world.objects[world.attached]
        if obj.is_free():
            obj.free_pose = world.tcp_pose() @ world.grasp_rest
    world.t += dt
    world.n_physics += 1
    if not np.all(np.isfinite(world.p)) or np.linalg.norm(world.v) > 50.0:
        raise SimulationError(f"simulation diverged at t={world.t:.3f}s")
    return world


# ---- reference tracks ----


class ReferenceTrack:
    """Per-tick references derived from a planned trajectory by the same
    finite differences the optimizer uses, then held through a settle
    phase."""

    def __init__(self, traj_states, dt_plan, robot_dof, tick_dt, settle_time):
        X = np.asarray(traj_states, dtype=float)
        T = X.shape[0]
        duration = (T - 1) * dt_plan
        n_move = int(round(duration / tick_dt))
        n_settle = int(round(settle_time / tick_dt))
        self.n_ticks = n_move + n_settle
        ticks = np.arange(self.n_ticks + 1) * tick_dt
        self.base = []
        xs = []
        for tau in ticks:
            s = min(tau / dt_plan, T - 1 - 1e-9)
            k = int(s)
            a = s - k
            xs.append((1 - a) * X[k] + a * X[min(k + 1, T - 1)])
        xs = np.asarray(xs)
        self.states = xs
        self.robot_dof = robot_dof
        # base pose series
        poses = []
        for x in xs:
            pb, rpy = base_pose_from_state(x[:6])
            poses.append((pb, rpy_to_matrix(rpy)))
        self.p = np.array([p for p, _ in poses])
        self.Rs = [R for _, R in poses]
        h = tick_dt
        self.v = np.vstack([(self.p[1:] - self.p[:-1]) / h, np.zeros((1, 3))])
        self.a = np.vstack([(self.v[1:] - self.v[:-1]) / h, np.zeros((1, 3))])
        self.wr = np.zeros((len(poses), 3))
        for k in range(len(poses) - 1):
            self.wr[k] = rotation_log(self.Rs[k].T @ self.Rs[k + 1]) / h
        self.wd = np.vstack([(self.wr[1:] - self.wr[:-1]) / h, np.zeros((1, 3))])
        q = xs[:, 6:6 + 4]
        self.q_M = q
        self.qd_M = np.vstack([(q[1:] - q[:-1]) / h, np.zeros((1, 4))])
        self.qdd_M = np.vstack([(self.qd_M[1:] - self.qd_M[:-1]) / h, np.zeros((1, 4))])

    def at(self, k):
        k = min(k, self.n_ticks - 1)
        ref = VehicleState(self.p[k], matrix_to_rpy(self.Rs[k]), self.v[k], self.wr[k])
        return (ref, (self.a[k], self.wd[k]),
                (self.q_M[k], self.qd_M[k], self.qdd_M[k]), self.states[k])


# ---- episode logging ----


class SimLog:
    def __init__(self, object_names, seed):
        self.object_names = list(object_names)
        self.columns = (
            ["t"]
            + [f"ref_{c}" for c in ("x", "y", "z", "roll", "pitch", "yaw")]
            + list(("x", "y", "z", "roll", "pitch", "yaw"))
            + [f"ref_qm{i}" for i in range(1, 5)]
            + [f"qm{i}" for i in range(1, 5)]
            + [f"ref_obj_{n}" for n in self.object_names]
            + [f"obj_{n}" for n in self.object_names]
            + [f"cmd_T{i}" for i in range(1, 5)]
            + [f"cmd_alpha{i}" for i in range(1, 5)]
            + [f"cmd_beta{i}" for i in range(1, 5)]
            + [f"act_T{i}" for i in range(1, 5)]
            + [f"act_alpha{i}" for i in range(1, 5)]
            + [f"act_beta{i}" for i in range(1, 5)]
            + ["e_p_norm", "e_att_norm", "step_index", "saturated"]
        )
        self.rows = []
        self.events = [{"t": 0.0, "kind": "start", "seed": seed}]
        self.failed = False

    def add_event(self, t, kind, **data):
        self.events.append({"t": float(t), "kind": kind, **data})

    def add_row(self, values):
        assert len(values) == len(self.columns)
        self.rows.append([float(v) for v in values])

    def array(self) -> np.ndarray:
        return np.asarray(self.rows)

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, self.columns.index(name)]

    def save_csv(self, path):
        with open(path, "w") as f:
            f.write(",".join(self.columns) + "\n")
            for row in self.rows:
                f.write(",".join(repr(v) for v in row) + "\n")

    def save_events(self, path):
        with open(path, "w") as f:
            json.dump({"failed": self.failed, "events": self.events}, f, indent=2)


# ---- episode runner ----


@dataclass
class EpisodeResult:
    log: SimLog
    plans: list
    world: SimWorld

    def __iter__(self):  # (log, plans) unpacking convenience
        return iter((self.log, self.plans))


def run_episode(scenario, config: SimConfig | None = None, plans=None,
                gains: Gains | None = None, grasp: GraspParams | None = None) -> EpisodeResult:
    """Plan (unless given) and simulate a whole task sequence."""
    cfg_kwargs = dict(scenario.config_overrides)
    if config is None:
        config = SimConfig(**cfg_kwargs)
    model = scenario.model()
    scene = scenario.plan_scene()
    if plans is None:
        plans = execute_sequence(scene, scenario.task_steps(),
                                 problem_defaults=scenario.planner_defaults())

    world = SimWorld(model=model, config=config,
                     grasp=grasp if grasp is not None else GraspParams())
    x0 = scenario.x_start(scenario.robot_vkc())
    p0, rpy0 = base_pose_from_state(x0[:6])
    world.p = p0
    world.R = rpy_to_matrix(rpy0)
    world.q_M = x0[6:10].copy()
    for spec in scenario.objects:
        world.objects[spec.name] = ObjectSim(
            chain=spec.chain, base_pose=spec.base_pose, q=spec.initial_q.copy(),
            qd=np.zeros(spec.chain.dof), handle_link=spec.handle_link,
            damping=spec.joint_damping, friction=spec.dry_friction,
            free_pose=(spec.base_pose if spec.chain.dof == 0 else None),
        )
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    vtracker = VehicleTracker(model, gains or Gains())
    atracker = ArmTracker(model, gains or Gains())
    hover = allocate(model.vehicle,
                     np.concatenate([[0, 0, model.total_mass * model.vehicle.g],
                                     np.zeros(3)]))
    world.actual = hover.command
    delay = DelayLine(config.delay_ticks, (hover.command, np.zeros(4)))

    log = SimLog([o.name for o in scenario.objects], config.seed)
    tick_dt = 1.0 / config.high_level_rate

    for step_index, plan in enumerate(plans):
        ok = _apply_sim_pre_action(world, scenario, plan, log)
        if not ok:
            log.failed = True
            log.add_event(world.t, "failure", step=plan.step.name,
                          reason="grasp conditions not met")
            return EpisodeResult(log, plans, world)
        log.add_event(world.t, "step_start", step=plan.step.name, index=step_index)
        track = ReferenceTrack(plan.trajectory.states, plan.trajectory.dt,
                               scene.robot.dof, tick_dt, plan.step.settle_time)
        try:
            _track_reference(world, track, scenario, config, rng, vtracker, atracker,
                             delay, log, step_index, plans)
        except SimulationError as e:
            log.failed = True
            log.add_event(world.t, "failure", step=plan.step.name, reason=str(e))
            return EpisodeResult(log, plans, world)
        log.add_event(world.t, "step_end", step=plan.step.name, index=step_index)
    return EpisodeResult(log, plans, world)


def _apply_sim_pre_action(world: SimWorld, scenario, plan, log) -> bool:
    kind = plan.step.pre_action.kind
    if kind == "none":
        return True
    if kind == "detach":
        obj = world.objects[world.attached]
        if obj.is_free():
            spec = scenario.object_spec(world.attached)
            radius = 0.02
            geoms = [g for l in obj.chain.links for g in l.collision_geoms]
            if geoms and geoms[0].kind == "sphere":
                radius = geoms[0].dimensions[0]
            obj.free_pose = scenario.settle_pose(obj.free_pose, radius)
        log.add_event(world.t, "detach", object=world.attached)
        world.attached = None
        world.grasp_rest = None
        return True
    name = plan.step.pre_action.object_name
    obj = world.objects[name]
    handle = obj.link_pose(obj.handle_link)
    tcp = world.tcp_pose()
    dist = float(np.linalg.norm(handle.translation - tcp.translation))
    speed = float(np.linalg.norm(world.v))
    gp = world.grasp
    if dist > gp.attach_dist or speed > gp.attach_speed:
        log.add_event(world.t, "grasp_failed", object=name, dist=dist, speed=speed)
        return False
    world.attached = name
    world.grasp_rest = plan.grasp_offset
    if obj.is_free():
        obj.free_pose = tcp @ plan.grasp_offset
    log.add_event(world.t, "attach", object=name, dist=dist)
    return True


def _track_reference(world, track, scenario, config, rng, vtracker, atracker,
                     delay, log, step_index, plans):
    n_sub = config.steps_per_tick
    n_ll = config.steps_per_lowlevel
    dt = config.physics_dt
    model = world.model
    for k in range(track.n_ticks):
        ref, ref_acc, arm_ref, ref_state = track.at(k)
        meas = inject_noise_delay(world.vehicle_state(), config, rng)
        world.n_highlevel += 1
        wrench, errs = vtracker.step(meas, world.q_M, ref, ref_acc,
                                     1.0 / config.high_level_rate)
        alloc = allocate(model.vehicle, wrench)
        g_body = rpy_to_matrix(meas.theta).T @ (model.vehicle.g * GRAVITY_DIR)
        tau_M = atracker.step(ArmState(world.q_M, world.qd_M), arm_ref,
                              1.0 / config.high_level_rate, gravity_body=g_body)
        cmd_del, tau_del = delay.push((alloc.command, tau_M))
        _log_row(log, world, ref, arm_ref, ref_state, alloc, cmd_del, errs,
                 step_index, scenario)
        for i in range(n_sub):
            if i % n_ll == 0:
                world.n_lowlevel += 1
                world.actual = low_level_actuator(cmd_del, world.actual,
                                                  dt * n_ll, model.vehicle)
            step(world, (world.actual, tau_del), dt)


def _log_row(log, world, ref, arm_ref, ref_state, alloc, cmd_del, errs,
             step_index, scenario):
    rpy = matrix_to_rpy(world.R)
    obj_refs = []
    obj_actual = []
    for name in log.object_names:
        obj = world.objects[name]
        if obj.is_free():
            obj_refs.append(0.0)
            obj_actual.append(0.0)
        else:
            # while this object is grasped its planned value rides in the
            # VKC state tail (inverted sign); otherwise hold the actual
            if world.attached == name and len(ref_state) > 10:
                obj_refs.append(-ref_state[10:][::-1][0])
            else:
                obj_refs.append(obj.q[0])
            obj_actual.append(obj.q[0])
    row = (
        [world.t]
        + list(ref.p) + list(ref.theta)
        + list(world.p) + list(rpy)
        + list(arm_ref[0]) + list(world.q_M)
        + obj_refs + obj_actual
        + list(cmd_del.T) + list(cmd_del.alpha) + list(cmd_del.beta)
        + list(world.actual.T) + list(world.actual.alpha) + list(world.actual.beta)
        + [np.linalg.norm(errs.e_p), np.linalg.norm(errs.e_theta),
           step_index, 1.0 if alloc.saturated else 0.0]
    )
    log.add_row(row)
