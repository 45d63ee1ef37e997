"""Scenario descriptions: scene objects, obstacles, task steps and the
built-in demo tasks (bulb install, cabinet relocation, drawer relocation).

Scenario files are JSON; goals use a small declarative form resolved
against the live scene when each step is planned, because grasp poses
move with the objects (an open door carries its handle along).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    KinematicChain,
    base_state_from_pose,
    build_virtual_base,
    chain_from_dict,
    chain_to_dict,
)
from .collision import CollisionPrimitive, CollisionWorld
from .dynamics import EE_LINK, PlatformModel, uam_robot_chain
from .geometry import RigidTransform, rpy_to_matrix
from .planner import (
    GoalSpec,
    PlanScene,
    PreAction,
    SceneObjectState,
    TaskStep,
)


class ScenarioError(ValueError):
    pass


@dataclass
class ObjectSpec:
    name: str
    chain: KinematicChain  # world-rooted, tip = handle link
    base_pose: RigidTransform
    handle_link: str
    grasp_offset: RigidTransform = field(default_factory=RigidTransform.identity)
    initial_q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    joint_damping: float = 0.5
    dry_friction: float = 0.1

    def __post_init__(self):
        self.initial_q = np.asarray(self.initial_q, dtype=float).reshape(-1)
        if self.initial_q.shape[0] != self.chain.dof:
            self.initial_q = np.zeros(self.chain.dof)


@dataclass
class SupportRegion:
    """Horizontal patch a released free object settles onto."""

    top_z: float
    x_range: tuple
    y_range: tuple

    def contains_xy(self, p) -> bool:
        return (self.x_range[0] <= p[0] <= self.x_range[1]
                and self.y_range[0] <= p[1] <= self.y_range[1])


@dataclass
class StepSpec:
    name: str
    pre: str = "none"  # none | attach:<object> | detach
    goal: dict = field(default_factory=dict)
    T: int = 30
    dt: float = 0.1
    settle_time: float = 1.0
    ignore: tuple = ()  # objects whose geometry this step may touch


@dataclass
class Scenario:
    name: str
    objects: list
    obstacles: tuple
    steps: list
    supports: list = field(default_factory=list)
    start_base: np.ndarray = field(default_factory=lambda: base_state_from_pose(
        (0.0, 0.0, 0.8), (0.0, 0.0, 0.0)))
    start_arm: np.ndarray = field(default_factory=lambda: np.zeros(4))
    dist_safe: float = 0.02
    dist_safe_self: float = 0.005
    xi_dist: float = 1e-6
    config_overrides: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def model(self) -> PlatformModel:
        return PlatformModel()

    def robot_vkc(self) -> KinematicChain:
        return build_virtual_base(uam_robot_chain())

    def x_start(self, robot: KinematicChain) -> np.ndarray:
        x = np.zeros(robot.dof)
        x[:6] = self.start_base
        x[6:10] = self.start_arm
        return x

    def plan_scene(self) -> PlanScene:
        robot = self.robot_vkc()
        objects = {
            o.name: SceneObjectState(
                chain=o.chain,
                base_pose=o.base_pose,
                q=o.initial_q.copy(),
                handle_link=o.handle_link,
                joint_damping=o.joint_damping,
                dry_friction=o.dry_friction,
            )
            for o in self.objects
        }
        return PlanScene(
            robot=robot,
            objects=objects,
            world=CollisionWorld(self.obstacles),
            x_robot=self.x_start(robot),
        )

    def object_spec(self, name: str) -> ObjectSpec:
        for o in self.objects:
            if o.name == name:
                return o
        raise ScenarioError(f"unknown object {name!r}")

    def task_steps(self) -> list:
        out = []
        for s in self.steps:
            pre = PreAction()
            if s.pre.startswith("attach:"):
                pre = PreAction("attach", s.pre.split(":", 1)[1])
            elif s.pre == "detach":
                pre = PreAction("detach")
            out.append(
                TaskStep(
                    name=s.name,
                    pre_action=pre,
                    goal_builder=_goal_builder(self, s.goal),
                    T=s.T,
                    dt=s.dt,
                    settle_time=s.settle_time,
                    ignore_objects=tuple(s.ignore),
                )
            )
        return out

    def planner_defaults(self) -> dict:
        return {
            "dist_safe": self.dist_safe,
            "dist_safe_self": self.dist_safe_self,
            "xi_dist": self.xi_dist,
        }

    def settle_pose(self, pose: RigidTransform, radius: float) -> RigidTransform:
        """Drop a released free object straight down onto the best support."""
        best = None
        for s in self.supports:
            if s.contains_xy(pose.translation) and s.top_z <= pose.translation[2] + 1e-6:
                if best is None or s.top_z > best.top_z:
                    best = s
        if best is None:
            return pose
        p = pose.translation.copy()
        p[2] = best.top_z + radius
        return RigidTransform(pose.rotation, p)


# ---- goal resolution ----


def _named_joint_indices(vkc: KinematicChain, names):
    index = {j.name: k for k, j in enumerate(vkc.moving_joints)}
    try:
        return np.array([index[n] for n in names], dtype=int)
    except KeyError as e:
        raise ScenarioError(f"goal names unknown joint {e}") from e


def _goal_builder(scenario: Scenario, goal: dict):
    kind = goal.get("kind")

    def build(scene, vkc, robot_dof):
        xi = float(goal.get("xi_goal", 1e-4))
        if kind == "joint_target":
            names = list(goal["joints"].keys())
            values = np.array([goal["joints"][n] for n in names], dtype=float)
            return GoalSpec("joint_target", target_joints=values,
                            joint_indices=_named_joint_indices(vkc, names), xi_goal=xi)
        if kind == "base_pose":
            values = base_state_from_pose(goal["xyz"], goal.get("rpy", (0, 0, 0)))
            names = ["vb_x", "vb_y", "vb_z", "vb_yaw", "vb_pitch", "vb_roll"]
            joints = dict(zip(names, values))
            for n, v in goal.get("arm", {}).items():
                joints[n] = v
            keys = list(joints.keys())
            return GoalSpec("joint_target",
                            target_joints=np.array([joints[k] for k in keys]),
                            joint_indices=_named_joint_indices(vkc, keys), xi_goal=xi)
        if kind == "grasp_handle":
            obj = scene.objects[goal["object"]]
            offset = scenario.object_spec(goal["object"]).grasp_offset
            target = obj.handle_pose() @ offset.inverse()
            return GoalSpec("ee_pose", link=EE_LINK, target_pose=target, xi_goal=xi)
        if kind == "object_joint":
            if scene.attached != goal["object"]:
                raise ScenarioError(
                    f"object_joint goal requires {goal['object']!r} to be attached")
            # inverted object joints sit after the robot DoF, reversed and negated
            obj = scene.objects[goal["object"]]
            values = np.asarray(goal["values"], dtype=float)
            inv_values = -values[::-1]
            idx = robot_dof + np.arange(obj.chain.dof)
            return GoalSpec("joint_target", target_joints=inv_values,
                            joint_indices=idx, xi_goal=xi)
        if kind == "link_pose":
            target = _pose_from_dict(goal["pose"])
            return GoalSpec("link_pose", link=goal["link"], target_pose=target, xi_goal=xi)
        if kind == "ee_pose":
            target = _pose_from_dict(goal["pose"])
            return GoalSpec("ee_pose", link=EE_LINK, target_pose=target, xi_goal=xi)
        raise ScenarioError(f"unknown goal kind {kind!r}")

    return build


def _pose_from_dict(d) -> RigidTransform:
    return RigidTransform.from_rpy_xyz(d.get("rpy", (0, 0, 0)), d.get("xyz", (0, 0, 0)))


def _pose_to_dict(p: RigidTransform) -> dict:
    from .geometry import matrix_to_rpy

    return {"xyz": p.translation.tolist(), "rpy": matrix_to_rpy(p.rotation).tolist()}


# ---- scenario files ----


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "name": s.name,
        "start_base": s.start_base.tolist(),
        "start_arm": s.start_arm.tolist(),
        "dist_safe": s.dist_safe,
        "dist_safe_self": s.dist_safe_self,
        "xi_dist": s.xi_dist,
        "config": s.config_overrides,
        "checks": s.checks,
        "objects": [
            {
                "name": o.name,
                "chain": chain_to_dict(o.chain),
                "base_pose": _pose_to_dict(o.base_pose),
                "handle_link": o.handle_link,
                "grasp_offset": _pose_to_dict(o.grasp_offset),
                "initial_q": o.initial_q.tolist(),
                "joint_damping": o.joint_damping,
                "dry_friction": o.dry_friction,
            }
            for o in s.objects
        ],
        "obstacles": [
            {
                "kind": g.kind,
                "dimensions": list(g.dimensions),
                "pose": _pose_to_dict(g.offset),
                "name": g.name,
            }
            for g in s.obstacles
        ],
        "supports": [
            {"top_z": r.top_z, "x_range": list(r.x_range), "y_range": list(r.y_range)}
            for r in s.supports
        ],
        "steps": [
            {
                "name": st.name,
                "pre": st.pre,
                "goal": st.goal,
                "T": st.T,
                "dt": st.dt,
                "settle_time": st.settle_time,
                "ignore": list(st.ignore),
            }
            for st in s.steps
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    try:
        objects = [
            ObjectSpec(
                name=o["name"],
                chain=chain_from_dict(o["chain"], where=f"objects[{k}].chain"),
                base_pose=_pose_from_dict(o.get("base_pose", {})),
                handle_link=o["handle_link"],
                grasp_offset=_pose_from_dict(o.get("grasp_offset", {})),
                initial_q=np.asarray(o.get("initial_q", ()), dtype=float),
                joint_damping=float(o.get("joint_damping", 0.5)),
                dry_friction=float(o.get("dry_friction", 0.1)),
            )
            for k, o in enumerate(d.get("objects", ()))
        ]
        obstacles = tuple(
            CollisionPrimitive(
                kind=g["kind"],
                dimensions=tuple(g["dimensions"]),
                attached_to="world",
                offset=_pose_from_dict(g.get("pose", {})),
                name=g.get("name", ""),
            )
            for g in d.get("obstacles", ())
        )
        steps = [
            StepSpec(
                name=st["name"],
                pre=st.get("pre", "none"),
                goal=st["goal"],
                T=int(st.get("T", 30)),
                dt=float(st.get("dt", 0.1)),
                settle_time=float(st.get("settle_time", 1.0)),
                ignore=tuple(st.get("ignore", ())),
            )
            for st in d.get("steps", ())
        ]
        supports = [
            SupportRegion(float(r["top_z"]), tuple(r["x_range"]), tuple(r["y_range"]))
            for r in d.get("supports", ())
        ]
        sc = Scenario(
            name=d.get("name", "scenario"),
            objects=objects,
            obstacles=obstacles,
            steps=steps,
            supports=supports,
            dist_safe=float(d.get("dist_safe", 0.02)),
            dist_safe_self=float(d.get("dist_safe_self", 0.005)),
            xi_dist=float(d.get("xi_dist", 1e-6)),
            config_overrides=d.get("config", {}),
            checks=d.get("checks", {}),
        )
        if "start_base" in d:
            sc.start_base = np.asarray(d["start_base"], dtype=float)
        if "start_arm" in d:
            sc.start_arm = np.asarray(d["start_arm"], dtype=float)
        return sc
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"bad scenario file: {e}") from e


def load_scenario(path) -> Scenario:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path):
    with open(path, "w") as f:
        json.dump(scenario_to_dict(s), f, indent=2)


# ---- built-in demo scenarios ----


def _box(name, center, half, rpy=(0, 0, 0)) -> CollisionPrimitive:
    return CollisionPrimitive(
        "box", tuple(half), attached_to="world",
        offset=RigidTransform.from_rpy_xyz(rpy, center), name=name,
    )


def _single_link_object(name, mass, geom: CollisionPrimitive) -> KinematicChain:
    from .chain import Link

    return KinematicChain(
        Link(name, mass=mass, inertia=np.eye(3) * mass * 1e-5,
             collision_geoms=(geom,)), [],
    )


def _bulb_scenario() -> Scenario:
    from .chain import Link

    bulb = _single_link_object(
        "bulb", 0.02,
        CollisionPrimitive("sphere", (0.025,), attached_to="bulb", name="bulb_glass"),
    )
    stand = _box("bulb_stand", (0.9, 0.0, 0.25), (0.04, 0.04, 0.25))
    shelf = _box("socket_shelf", (0.0, 0.8, 1.38), (0.15, 0.15, 0.03))
    floor = _box("floor", (0.5, 0.4, -0.5), (3.0, 3.0, 0.5))
    socket = {"xyz": [0.0, 0.8, 1.27], "rpy": [np.pi, 0.0, 0.0]}
    steps = [
        StepSpec("approach", goal={"kind": "grasp_handle", "object": "bulb",
                                   "xi_goal": 1e-6}, ignore=("bulb",)),
        StepSpec("pick-up", pre="attach:bulb",
                 goal={"kind": "base_pose", "xyz": [0.5, 0.4, 0.95],
                       "rpy": [0, 0, 0]}),
        StepSpec("rotate-and-translate",
                 goal={"kind": "base_pose", "xyz": [0.0, 0.8, 0.90],
                       "rpy": [np.pi, 0.0, 0.0],
                       "arm": {"j_arm1": 0.0, "j_arm2": 0.0, "j_arm3": 0.0,
                               "j_arm4": 0.0}},
                 T=40),
        StepSpec("feed-in", goal={"kind": "link_pose", "link": "bulb",
                                  "pose": socket, "xi_goal": 1e-8}, T=25),
    ]
    return Scenario(
        name="task1",
        objects=[ObjectSpec("bulb", bulb,
                            RigidTransform.from_rpy_xyz(xyz=(0.9, 0.0, 0.525)),
                            handle_link="bulb")],
        obstacles=(stand, shelf, floor),
        steps=steps,
        supports=[SupportRegion(0.50, (0.86, 0.94), (-0.04, 0.04))],
        start_base=base_state_from_pose((0.3, 0.0, 0.9), (0, 0, 0)),
        checks={"socket_pose": socket, "flip_min_deg": 150.0,
                "pose_tol_m": 0.02, "pose_tol_deg": 5.0},
    )


def _cabinet_chain() -> KinematicChain:
    from .chain import Joint, Link

    hinge = Joint("hinge", "revolute", axis=(0, 0, 1), limits=(0.0, 1.6),
                  vel_limit=1.2, acc_limit=8.0)
    door = Link(
        "door", mass=0.5, com=(0.0, 0.19, 0.0),
        inertia=np.array([[2e-3, 0, 0], [0, 1e-4, 0], [0, 0, 2e-3]]),
        collision_geoms=(
            CollisionPrimitive("box", (0.008, 0.18, 0.12), attached_to="door",
                               offset=RigidTransform.from_rpy_xyz(xyz=(0, 0.19, 0)),
                               name="door_panel"),
        ),
    )
    mount = Joint("handle_mount", "fixed",
                  origin=RigidTransform.from_rpy_xyz(xyz=(-0.05, 0.33, 0.0)))
    handle = Link(
        "handle", mass=0.02, inertia=np.eye(3) * 1e-6,
        collision_geoms=(
            CollisionPrimitive("sphere", (0.012,), attached_to="handle",
                               name="handle_knob"),
        ),
    )
    return KinematicChain(Link("cabinet_base", mass=10.0),
                          [(hinge, door), (mount, handle)])


def _cabinet_scenario() -> Scenario:
    cab_c = (1.25, 0.55)
    walls = (
        _box("cab_bottom", (cab_c[0], cab_c[1], 0.31), (0.20, 0.20, 0.01)),
        _box("cab_top", (cab_c[0], cab_c[1], 0.55), (0.20, 0.20, 0.01)),
        _box("cab_left", (cab_c[0], 0.36, 0.43), (0.20, 0.01, 0.13)),
        _box("cab_right", (cab_c[0], 0.74, 0.43), (0.20, 0.01, 0.13)),
        _box("cab_back", (1.44, cab_c[1], 0.43), (0.01, 0.20, 0.13)),
    )
    stand = _box("toy_stand", (0.7, 0.0, 0.15), (0.04, 0.04, 0.15))
    floor = _box("floor", (0.8, 0.4, -0.5), (3.0, 3.0, 0.5))
    toy = _single_link_object(
        "toy", 0.015,
        CollisionPrimitive("sphere", (0.02,), attached_to="toy", name="toy_ball"),
    )
    open_angle = 1.4
    steps = [
        StepSpec("approach-door", goal={"kind": "grasp_handle", "object": "cabinet",
                                        "xi_goal": 1e-6}, ignore=("cabinet",)),
        StepSpec("open-door", pre="attach:cabinet",
                 goal={"kind": "object_joint", "object": "cabinet",
                       "values": [open_angle], "xi_goal": 1e-6}, T=35),
        StepSpec("pick-toy", pre="detach",
                 goal={"kind": "grasp_handle", "object": "toy", "xi_goal": 1e-6},
                 T=35, ignore=("toy",)),
        StepSpec("place-toy", pre="attach:toy",
                 goal={"kind": "base_pose", "xyz": [1.0053, 0.55, 0.698],
                       "rpy": [0.0, 0.0073, 0.0],
                       "arm": {"j_arm1": 0.0, "j_arm2": 0.0693,
                               "j_arm3": -0.739, "j_arm4": 0.0},
                       "xi_goal": 1e-6}, T=35),
        StepSpec("approach-door-again", pre="detach",
                 goal={"kind": "grasp_handle", "object": "cabinet", "xi_goal": 1e-6},
                 T=35, ignore=("cabinet", "toy")),
        StepSpec("close-door", pre="attach:cabinet",
                 goal={"kind": "object_joint", "object": "cabinet", "values": [0.01],
                       "xi_goal": 1e-6}, T=35),
    ]
    return Scenario(
        name="task2",
        objects=[
            ObjectSpec("cabinet", _cabinet_chain(),
                       RigidTransform.from_rpy_xyz(xyz=(1.05, 0.35, 0.43)),
                       handle_link="handle", joint_damping=0.15, dry_friction=0.02),
            ObjectSpec("toy", toy, RigidTransform.from_rpy_xyz(xyz=(0.7, 0.0, 0.32)),
                       handle_link="toy"),
        ],
        obstacles=walls + (stand, floor),
        steps=steps,
        supports=[SupportRegion(0.32, (1.07, 1.43), (0.37, 0.73)),
                  SupportRegion(0.30, (0.66, 0.74), (-0.04, 0.04))],
        start_base=base_state_from_pose((0.5, 0.6, 0.85), (0, 0, 0)),
        checks={"articulated": "cabinet", "open_value": open_angle,
                "open_fraction": 0.8, "close_tol": np.deg2rad(3.0),
                "container": {"x": [1.07, 1.43], "y": [0.37, 0.73], "z": [0.31, 0.54]},
                "free_object": "toy"},
    )


def _drawer_chain() -> KinematicChain:
    from .chain import Joint, Link

    slide = Joint("slide", "prismatic", axis=(-1.0, 0.0, 0.0), limits=(0.0, 0.22),
                  vel_limit=0.8, acc_limit=6.0)
    tray = Link(
        "tray", mass=0.4, com=(0.0, 0.0, -0.08),
        inertia=np.array([2e-3, 3e-3, 4e-3]) * 1.0,
        collision_geoms=(
            CollisionPrimitive("box", (0.155, 0.11, 0.008), attached_to="tray",
                               offset=RigidTransform.from_rpy_xyz(xyz=(0.0, 0, -0.10)),
                               name="tray_bottom"),
            CollisionPrimitive("box", (0.008, 0.12, 0.065), attached_to="tray",
                               offset=RigidTransform.from_rpy_xyz(xyz=(-0.185, 0, -0.045)),
                               name="tray_face"),
        ),
    )
    knob_mount = Joint("knob_mount", "fixed",
                       origin=RigidTransform.from_rpy_xyz(xyz=(-0.23, 0.0, -0.045)))
    knob = Link(
        "drawer_handle", mass=0.01, inertia=np.eye(3) * 1e-6,
        collision_geoms=(
            CollisionPrimitive("sphere", (0.012,), attached_to="drawer_handle",
                               name="drawer_knob"),
        ),
    )
    return KinematicChain(Link("drawer_base", mass=8.0), [(slide, tray), (knob_mount, knob)])


def _drawer_scenario() -> Scenario:
    unit = (
        _box("unit_bottom", (1.25, 0.40, 0.21), (0.18, 0.15, 0.01)),
        _box("unit_top", (1.25, 0.40, 0.45), (0.18, 0.15, 0.01)),
        _box("unit_left", (1.25, 0.26, 0.33), (0.18, 0.01, 0.11)),
        _box("unit_right", (1.25, 0.54, 0.33), (0.18, 0.01, 0.11)),
        _box("unit_back", (1.42, 0.40, 0.33), (0.01, 0.15, 0.11)),
    )
    stand = _box("toy_stand", (0.55, 0.0, 0.15), (0.04, 0.04, 0.15))
    floor = _box("floor", (0.8, 0.3, -0.5), (3.0, 3.0, 0.5))
    toy = _single_link_object(
        "toy", 0.015,
        CollisionPrimitive("sphere", (0.02,), attached_to="toy", name="toy_ball"),
    )
    open_dist = 0.18
    steps = [
        StepSpec("approach-drawer", goal={"kind": "grasp_handle", "object": "drawer",
                                          "xi_goal": 1e-6}, ignore=("drawer",)),
        StepSpec("open-drawer", pre="attach:drawer",
                 goal={"kind": "object_joint", "object": "drawer",
                       "values": [open_dist], "xi_goal": 1e-8}, T=30),
        StepSpec("pick-toy", pre="detach",
                 goal={"kind": "grasp_handle", "object": "toy", "xi_goal": 1e-6},
                 T=35, ignore=("toy",)),
        StepSpec("drop-toy", pre="attach:toy",
                 goal={"kind": "link_pose", "link": "toy",
                       "pose": {"xyz": [0.98, 0.40, 0.36]}, "xi_goal": 1e-6}, T=35),
        StepSpec("approach-knob", pre="detach",
                 goal={"kind": "grasp_handle", "object": "drawer", "xi_goal": 1e-6},
                 T=30, ignore=("drawer", "toy")),
        StepSpec("close-drawer", pre="attach:drawer",
                 goal={"kind": "object_joint", "object": "drawer", "values": [0.005],
                       "xi_goal": 1e-8}, T=30),
    ]
    return Scenario(
        name="drawer",
        objects=[
            ObjectSpec("drawer", _drawer_chain(),
                       RigidTransform.from_rpy_xyz(xyz=(1.25, 0.40, 0.34)),
                       handle_link="drawer_handle",
                       joint_damping=2.0, dry_friction=0.25),
            ObjectSpec("toy", toy, RigidTransform.from_rpy_xyz(xyz=(0.55, 0.0, 0.32)),
                       handle_link="toy"),
        ],
        obstacles=unit + (stand, floor),
        steps=steps,
        supports=[SupportRegion(0.248, (0.915, 1.065), (0.30, 0.50)),
                  SupportRegion(0.30, (0.51, 0.59), (-0.04, 0.04))],
        start_base=base_state_from_pose((0.5, 0.4, 0.85), (0, 0, 0)),
        checks={"articulated": "drawer", "open_value": open_dist,
                "open_fraction": 0.8, "close_tol": 0.01,
                "container": {"x": [0.90, 1.07], "y": [0.30, 0.50], "z": [0.24, 0.40]},
                "free_object": "toy"},
    )


_BUILTINS = {"task1": _bulb_scenario, "task2": _cabinet_scenario, "drawer": _drawer_scenario}


def builtin_scenario(name: str) -> Scenario:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ScenarioError(
            f"unknown demo {name!r}; choose from {sorted(_BUILTINS)}") from None


def builtin_names():
    return sorted(_BUILTINS)
