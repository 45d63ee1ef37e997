"""Serial kinematic chains: forward kinematics, Jacobians, kinematic
inversion, virtual-joint attachment and virtual-base construction.

A chain is a root link followed by alternating (joint, link) pairs; the
transform across joint j at value q is origin(j) followed by the joint
motion, so child = parent @ origin @ motion(q). Chains are immutable;
every operation returns a new chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collision import CollisionPrimitive
from .geometry import RigidTransform, is_rotation, rotation_log

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"
_KIND_CODE = {REVOLUTE: kernels.REVOLUTE, PRISMATIC: kernels.PRISMATIC, FIXED: kernels.FIXED}

VIRTUAL_JOINT_NAME = "virtual_grasp"
_PIVOT_SUFFIX = "__pivot"


class ChainError(ValueError):
    pass


class ChainLoadError(ChainError):
    pass


@dataclass(frozen=True)
class Joint:
    name: str
    kind: str
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    origin: RigidTransform = field(default_factory=RigidTransform.identity)
    limits: tuple = (-1e9, 1e9)
    vel_limit: float = 1e9
    acc_limit: float = 1e9

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC, FIXED):
            raise ChainError(f"joint {self.name!r}: unknown kind {self.kind!r}")
        axis = np.array(self.axis, dtype=float).reshape(3)
        if self.kind != FIXED and abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ChainError(f"joint {self.name!r}: axis must be a unit vector")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if lo > hi:
            raise ChainError(f"joint {self.name!r}: limits out of order")
        object.__setattr__(self, "limits", (lo, hi))
        if self.vel_limit < 0.0 or self.acc_limit < 0.0:
            raise ChainError(f"joint {self.name!r}: rate limits must be >= 0")


@dataclass(frozen=True)
class Link:
    name: str
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    collision_geoms: tuple = ()

    def __post_init__(self):
        if self.mass < 0.0:
            raise ChainError(f"link {self.name!r}: negative mass")
        com = np.array(self.com, dtype=float).reshape(3)
        com.flags.writeable = False
        inertia = np.array(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        inertia = inertia.reshape(3, 3)
        if np.max(np.abs(inertia - inertia.T)) > 1e-12:
            raise ChainError(f"link {self.name!r}: inertia not symmetric")
        ev = np.sort(np.linalg.eigvalsh(inertia))
        tol = 1e-9 + 1e-6 * max(ev[2], 0.0)
        if ev[0] < -tol:
            raise ChainError(f"link {self.name!r}: inertia not positive semidefinite")
        if ev[0] + ev[1] < ev[2] - tol:
            raise ChainError(f"link {self.name!r}: principal moments violate the triangle inequality")
        inertia.flags.writeable = False
        object.__setattr__(self, "com", com)
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "collision_geoms", tuple(self.collision_geoms))

    def is_auto_pivot(self) -> bool:
        return (
            self.name.endswith(_PIVOT_SUFFIX)
            and self.mass == 0.0
            and not self.collision_geoms
            and not np.any(self.inertia)
        )


@dataclass(frozen=True)
class ChainState:
    """Joint values of a chain, in chain joint order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def _state_values(chain: "KinematicChain", state) -> np.ndarray:
    v = state.values if isinstance(state, ChainState) else np.asarray(state, dtype=float)
    v = v.reshape(-1)
    if v.shape[0] != chain.dof:
        raise ChainError(f"state has {v.shape[0]} values, chain dof is {chain.dof}")
    return v


class KinematicChain:
    """Strictly serial chain of links and joints, immutable after build."""

    def __init__(self, root_link: Link, pairs):
        pairs = tuple(pairs)
        links = (root_link,) + tuple(l for _, l in pairs)
        joints = tuple(j for j, _ in pairs)
        names = [l.name for l in links] + [j.name for j in joints]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ChainError(f"duplicate names in chain: {sorted(dupes)}")
        self.root_link = root_link
        self.pairs = pairs
        self.links = links
        self.joints = joints
        self._link_index = {l.name: i for i, l in enumerate(links)}
        self.dof = sum(1 for j in joints if j.kind != FIXED)
        self._moving = tuple(j for j in joints if j.kind != FIXED)
        self._pack()

    def _pack(self):
        nj = len(self.joints)
        self._kinds = np.empty(nj, dtype=np.int32)
        self._axes = np.empty((nj, 3))
        self._org_rot = np.empty((nj, 3, 3))
        self._org_tr = np.empty((nj, 3))
        self._qidx = np.empty(nj, dtype=np.int32)
        k = 0
        for i, j in enumerate(self.joints):
            self._kinds[i] = _KIND_CODE[j.kind]
            self._axes[i] = j.axis
            self._org_rot[i] = j.origin.rotation
            self._org_tr[i] = j.origin.translation
            if j.kind == FIXED:
                self._qidx[i] = -1
            else:
                self._qidx[i] = k
                k += 1
        L = nj + 1
        self._masses = np.array([l.mass for l in self.links])
        self._coms = np.array([l.com for l in self.links]).reshape(L, 3)
        self._inertias = np.array([l.inertia for l in self.links]).reshape(L, 3, 3)

    # ---- queries ----

    @property
    def tip_link(self) -> Link:
        return self.links[-1]

    def link(self, name: str) -> Link:
        try:
            return self.links[self._link_index[name]]
        except KeyError:
            raise ChainError(f"unknown link {name!r}") from None

    def link_index(self, name: str) -> int:
        try:
            return self._link_index[name]
        except KeyError:
            raise ChainError(f"unknown link {name!r}") from None

    def has_link(self, name: str) -> bool:
        return name in self._link_index

    @property
    def link_names(self):
        return [l.name for l in self.links]

    @property
    def moving_joints(self):
        return self._moving

    def joint_limits(self):
        """(lo, hi) arrays over the moving joints, in state order."""
        lo = np.array([j.limits[0] for j in self._moving])
        hi = np.array([j.limits[1] for j in self._moving])
        return lo, hi

    def rate_limits(self):
        vel = np.array([j.vel_limit for j in self._moving])
        acc = np.array([j.acc_limit for j in self._moving])
        return vel, acc

    def clamp(self, values) -> np.ndarray:
        lo, hi = self.joint_limits()
        return np.clip(np.asarray(values, dtype=float), lo, hi)

    def within_limits(self, state, tol: float = 0.0) -> bool:
        v = _state_values(self, state)
        lo, hi = self.joint_limits()
        return bool(np.all(v >= lo - tol) and np.all(v <= hi + tol))

    # ---- kinematics ----

    def fk_frames(self, state):
        """Pose arrays (rot[L,3,3], tr[L,3]) of every link frame in root frame."""
        q = _state_values(self, state)
        return kernels.fk_all(self._kinds, self._axes, self._org_rot, self._org_tr,
                              self._qidx, q)

    def fk(self, state, target_link: str) -> RigidTransform:
        idx = self.link_index(target_link)
        rot, tr = self.fk_frames(state)
        return RigidTransform(rot[idx], tr[idx])

    def jacobian(self, state, target_link: str, point_world=None) -> np.ndarray:
        """Geometric Jacobian (3 linear rows then 3 angular rows) in root frame.

        point_world overrides the reference point (defaults to the target
        link frame origin); it must be a point rigidly attached to the link.
        """
        idx = self.link_index(target_link)
        rot, tr = self.fk_frames(state)
        p_ref = tr[idx] if point_world is None else np.asarray(point_world, dtype=float)
        J = np.zeros((6, self.dof))
        for i, joint in enumerate(self.joints):
            if i >= idx or joint.kind == FIXED:
                continue
            col = self._qidx[i]
            z = rot[i + 1] @ joint.axis
            if joint.kind == REVOLUTE:
                J[:3, col] = np.cross(z, p_ref - tr[i + 1])
                J[3:, col] = z
            else:
                J[:3, col] = z
        return J


def forward_kinematics(chain: KinematicChain, state, target_link: str) -> RigidTransform:
    return chain.fk(state, target_link)


def jacobian(chain: KinematicChain, state, target_link: str, point_world=None) -> np.ndarray:
    return chain.jacobian(state, target_link, point_world)


def pose_error(pose: RigidTransform, target: RigidTransform) -> np.ndarray:
    """6-D pose error (translation; rotation log in target frame)."""
    e_t = pose.translation - target.translation
    e_r = rotation_log(target.rotation.T @ pose.rotation)
    return np.concatenate([e_t, e_r])


# ---- structural operations ----


def invert_chain(chain: KinematicChain, new_root: str) -> KinematicChain:
    """Re-root the chain at its tip link, reversing every parent-child pair.

    Joint values on the inverted chain are the negation of the original;
    joint kinds, axes and (mirrored) limits are preserved. Where a joint
    origin cannot be folded into a neighbouring transform, a massless
    pivot link plus a fixed offset joint is inserted; pivots are stripped
    again on re-inversion so the operation is an involution.
    """
    if not chain.has_link(new_root):
        raise ChainError(f"unknown link {new_root!r}")
    if new_root == chain.root_link.name:
        return chain
    if new_root != chain.tip_link.name:
        raise ChainError(
            f"re-rooting at interior link {new_root!r} would branch; "
            "only the tip link can become the new root"
        )

    identity = RigidTransform.identity()
    out_pairs = []
    pending = identity
    open_joint = None  # moving joint waiting for its child link
    fixed_proto = None  # original fixed joint whose identity this segment can reuse

    def close_segment(link: Link):
        nonlocal pending, open_joint, fixed_proto
        dirty = not pending.almost_equal(identity, 1e-12)
        if open_joint is not None:
            if dirty:
                pivot = Link(name=open_joint.name + _PIVOT_SUFFIX)
                out_pairs.append((open_joint, pivot))
                out_pairs.append(
                    (Joint(name=open_joint.name + "__offset", kind=FIXED, origin=pending), link)
                )
            else:
                out_pairs.append((open_joint, link))
        else:
            proto = fixed_proto if fixed_proto is not None else Joint(
                name=link.name + "__offset", kind=FIXED
            )
            out_pairs.append(
                (
                    Joint(name=proto.name, kind=FIXED, axis=proto.axis, origin=pending,
                          limits=proto.limits, vel_limit=proto.vel_limit,
                          acc_limit=proto.acc_limit),
                    link,
                )
            )
        pending = identity
        open_joint = None
        fixed_proto = None

    for i in range(len(chain.joints) - 1, -1, -1):
        j = chain.joints[i]
        parent_link = chain.links[i]
        if j.kind != FIXED:
            if open_joint is not None:
                # two motions with only constants between them
                out_pairs.append((open_joint, Link(name=open_joint.name + _PIVOT_SUFFIX)))
            open_joint = Joint(
                name=j.name,
                kind=j.kind,
                axis=j.axis,
                origin=pending,
                limits=(-j.limits[1], -j.limits[0]),
                vel_limit=j.vel_limit,
                acc_limit=j.acc_limit,
            )
            pending = j.origin.inverse()
        else:
            pending = pending @ j.origin.inverse()
            if fixed_proto is None:
                fixed_proto = j
        if parent_link.is_auto_pivot() and i > 0:
            continue
        close_segment(parent_link)

    return KinematicChain(chain.tip_link, out_pairs)


def attach_virtual_joint(robot: KinematicChain, ee_link: str, obj: KinematicChain,
                         grasp_offset: RigidTransform) -> KinematicChain:
    """Join robot and (already inverted) object chains with a fixed grasp joint."""
    if not robot.has_link(ee_link):
        raise ChainError(f"unknown link {ee_link!r}")
    if ee_link != robot.tip_link.name:
        raise ChainError("virtual joint must attach at the robot tip link to stay serial")
    if any(j.name == VIRTUAL_JOINT_NAME for j in robot.joints):
        raise ChainError("robot chain already carries a virtual joint")
    shared = set(robot.link_names) & set(obj.link_names)
    if shared:
        raise ChainError(f"name collision between robot and object links: {sorted(shared)}")
    virtual = Joint(name=VIRTUAL_JOINT_NAME, kind=FIXED, origin=grasp_offset)
    return KinematicChain(robot.root_link, robot.pairs + ((virtual, obj.root_link),) + obj.pairs)


def detach_virtual_joint(vkc: KinematicChain):
    """Split a VKC at its virtual joint, returning (robot, object) chains."""
    for i, j in enumerate(vkc.joints):
        if j.name == VIRTUAL_JOINT_NAME:
            robot = KinematicChain(vkc.root_link, vkc.pairs[:i])
            obj = KinematicChain(vkc.pairs[i][1], vkc.pairs[i + 1:])
            return robot, obj
    raise ChainError("no virtual joint present")


VIRTUAL_BASE_JOINTS = ("vb_x", "vb_y", "vb_z", "vb_yaw", "vb_pitch", "vb_roll")


def build_virtual_base(robot_body: KinematicChain,
                       lin_limits=(-10.0, 10.0), ang_limits=(-3.5, 3.5),
                       lin_vel=1.2, ang_vel=1.6, lin_acc=3.0, ang_acc=6.0) -> KinematicChain:
    """Prepend the 6-DoF floating-base chain to a body-rooted robot chain.

    Three prismatic joints along the world axes, then three revolute joints
    at the body-frame center ordered yaw-pitch-roll so that the composed
    rotation is Rz(yaw) Ry(pitch) Rx(roll), the roll-pitch-yaw convention
    used by the vehicle dynamics. The base block of a chain state is
    therefore ordered (x, y, z, yaw, pitch, roll).
    """
    ex, ey, ez = np.eye(3)
    specs = [
        ("vb_x", PRISMATIC, ex, lin_limits, lin_vel, lin_acc),
        ("vb_y", PRISMATIC, ey, lin_limits, lin_vel, lin_acc),
        ("vb_z", PRISMATIC, ez, lin_limits, lin_vel, lin_acc),
        ("vb_yaw", REVOLUTE, ez, ang_limits, ang_vel, ang_acc),
        ("vb_pitch", REVOLUTE, ey, ang_limits, ang_vel, ang_acc),
        ("vb_roll", REVOLUTE, ex, ang_limits, ang_vel, ang_acc),
    ]
    pairs = []
    world = Link(name="world")
    for k, (name, kind, axis, lim, vmax, amax) in enumerate(specs):
        child = Link(name=f"{name}_link") if k < 5 else robot_body.root_link
        pairs.append(
            (Joint(name=name, kind=kind, axis=axis, limits=lim,
                   vel_limit=vmax, acc_limit=amax), child)
        )
    return KinematicChain(world, tuple(pairs) + robot_body.pairs)


def base_state_from_pose(p, rpy) -> np.ndarray:
    """Virtual-base joint values (chain order) for a body pose."""
    roll, pitch, yaw = rpy
    return np.array([p[0], p[1], p[2], yaw, pitch, roll], dtype=float)


def base_pose_from_state(values) -> tuple:
    """(position, (roll, pitch, yaw)) from the 6 leading base joint values."""
    x, y, z, yaw, pitch, roll = np.asarray(values, dtype=float)[:6]
    return np.array([x, y, z]), np.array([roll, pitch, yaw])


# ---- chain description files ----


def _transform_from_dict(d, where: str) -> RigidTransform:
    xyz = d.get("xyz", (0.0, 0.0, 0.0))
    if "rotation" in d:
        R = np.array(d["rotation"], dtype=float)
        if not is_rotation(R):
            raise ChainLoadError(f"{where}: rotation matrix not in SO(3)")
        return RigidTransform(R, np.asarray(xyz, dtype=float))
    return RigidTransform.from_rpy_xyz(d.get("rpy", (0.0, 0.0, 0.0)), xyz)


def _transform_to_dict(t: RigidTransform) -> dict:
    return {"rotation": t.rotation.tolist(), "xyz": t.translation.tolist()}


def _geom_from_dict(d, link_name: str, where: str) -> CollisionPrimitive:
    try:
        return CollisionPrimitive(
            kind=d["kind"],
            dimensions=tuple(d["dimensions"]),
            attached_to=link_name,
            offset=_transform_from_dict(d.get("offset", {}), where),
            name=d.get("name", ""),
        )
    except (KeyError, ValueError) as e:
        raise ChainLoadError(f"{where}: {e}") from e


def _link_from_dict(d, where: str) -> Link:
    try:
        name = d["name"]
        return Link(
            name=name,
            mass=float(d.get("mass", 0.0)),
            com=np.asarray(d.get("com", (0.0, 0.0, 0.0)), dtype=float),
            inertia=np.asarray(d.get("inertia", np.zeros(3)), dtype=float),
            collision_geoms=tuple(
                _geom_from_dict(g, name, f"{where}.collision_geoms[{k}]")
                for k, g in enumerate(d.get("collision_geoms", ()))
            ),
        )
    except (KeyError, ChainError) as e:
        raise ChainLoadError(f"{where}: {e}") from e


def chain_from_dict(data: dict, where: str = "chain") -> KinematicChain:
    try:
        root_name = data["root_link"]
        link_dicts = {d["name"]: (i, d) for i, d in enumerate(data["links"])}
    except (KeyError, TypeError) as e:
        raise ChainLoadError(f"{where}: missing required field {e}") from e
    if root_name not in link_dicts:
        raise ChainLoadError(f"{where}: root_link {root_name!r} not among links")
    by_parent = {}
    for k, jd in enumerate(data.get("joints", ())):
        for fld in ("name", "parent", "child"):
            if fld not in jd:
                raise ChainLoadError(f"{where}.joints[{k}]: missing {fld!r}")
        if jd["parent"] in by_parent:
            raise ChainLoadError(
                f"{where}.joints[{k}]: link {jd['parent']!r} has two child joints; chains must be serial"
            )
        by_parent[jd["parent"]] = (k, jd)
    pairs = []
    current = root_name
    used = {root_name}
    while current in by_parent:
        k, jd = by_parent.pop(current)
        where_j = f"{where}.joints[{k}]"
        child = jd["child"]
        if child not in link_dicts:
            raise ChainLoadError(f"{where_j}: unknown child link {child!r}")
        if child in used:
            raise ChainLoadError(f"{where_j}: link {child!r} used twice; chains must be acyclic")
        used.add(child)
        try:
            joint = Joint(
                name=jd["name"],
                kind=jd.get("kind", REVOLUTE),
                axis=np.asarray(jd.get("axis", (0.0, 0.0, 1.0)), dtype=float),
                origin=_transform_from_dict(jd.get("origin", {}), where_j),
                limits=tuple(jd.get("limits", (-1e9, 1e9))),
                vel_limit=float(jd.get("vel_limit", 1e9)),
                acc_limit=float(jd.get("acc_limit", 1e9)),
            )
        except ChainError as e:
            raise ChainLoadError(f"{where_j}: {e}") from e
        li, ld = link_dicts[child]
        pairs.append((joint, _link_from_dict(ld, f"{where}.links[{li}]")))
        current = child
    if by_parent:
        orphans = sorted(jd["name"] for _, jd in by_parent.values())
        raise ChainLoadError(f"{where}: joints not reachable from root: {orphans}")
    unreached = sorted(set(link_dicts) - used)
    if unreached:
        raise ChainLoadError(f"{where}: links not reachable from root: {unreached}")
    li, ld = link_dicts[root_name]
    try:
        return KinematicChain(_link_from_dict(ld, f"{where}.links[{li}]"), pairs)
    except ChainError as e:
        raise ChainLoadError(f"{where}: {e}") from e


def chain_to_dict(chain: KinematicChain) -> dict:
    links = []
    for l in chain.links:
        links.append(
            {
                "name": l.name,
                "mass": l.mass,
                "com": l.com.tolist(),
                "inertia": l.inertia.tolist(),
                "collision_geoms": [
                    {
                        "kind": g.kind,
                        "dimensions": list(g.dimensions),
                        "offset": _transform_to_dict(g.offset),
                        "name": g.name,
                    }
                    for g in l.collision_geoms
                ],
            }
        )
    joints = []
    for i, j in enumerate(chain.joints):
        joints.append(
            {
                "name": j.name,
                "kind": j.kind,
                "parent": chain.links[i].name,
                "child": chain.links[i + 1].name,
                "axis": j.axis.tolist(),
                "origin": _transform_to_dict(j.origin),
                "limits": list(j.limits),
                "vel_limit": j.vel_limit,
                "acc_limit": j.acc_limit,
            }
        )
    return {"root_link": chain.root_link.name, "links": links, "joints": joints}


def load_chain(path) -> KinematicChain:
    """Load a chain description file, reporting syntax errors with line numbers."""
    with open(path) as f:
        text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ChainLoadError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    return chain_from_dict(data, where=str(path))


def save_chain(chain: KinematicChain, path):
    with open(path, "w") as f:
        json.dump(chain_to_dict(chain), f, indent=2)
