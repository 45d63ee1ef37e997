"""Trajectory optimization on virtual kinematic chains.

The problem: find a T-step path minimizing weighted path length plus
smoothness, subject to loop-closure (chain) equalities, a goal
constraint on the final state, per-step box/rate limits and signed
distance collision margins. Solved with an augmented-Lagrangian outer
loop around a damped Gauss-Newton inner loop; box limits are enforced by
projection so they hold exactly on the returned trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .chain import KinematicChain, attach_virtual_joint, invert_chain, pose_error
from .collision import CollisionWorld, bounding_radius, signed_distance_witness, supported_pair
from .geometry import RigidTransform, so3_right_jacobian_inv

DEFAULT_XI_GOAL = 1e-4
DEFAULT_DIST_SAFE = 0.05
DEFAULT_DIST_SAFE_SELF = 0.01
DEFAULT_XI_DIST = 1e-6
SELF_PAIR_MIN_SEPARATION = 4  # links closer than this along the chain are skipped


class PlanningError(ValueError):
    pass


class InfeasiblePlanError(PlanningError):
    def __init__(self, report, trajectory=None, message="plan infeasible"):
        super().__init__(f"{message}: {report.summary()}")
        self.report = report
        self.trajectory = trajectory


@dataclass(frozen=True)
class GoalSpec:
    """Final-state goal: a pose for a link or a (partial) joint target."""

    kind: str  # ee_pose | link_pose | joint_target
    link: str | None = None
    target_pose: RigidTransform | None = None
    target_joints: np.ndarray | None = None
    joint_indices: np.ndarray | None = None  # defaults to all
    xi_goal: float = DEFAULT_XI_GOAL

    def __post_init__(self):
        if self.kind not in ("ee_pose", "link_pose", "joint_target"):
            raise PlanningError(f"unknown goal kind {self.kind!r}")
        if self.xi_goal <= 0:
            raise PlanningError("xi_goal must be positive")
        if self.kind == "joint_target":
            if self.target_joints is None:
                raise PlanningError("joint_target goal needs target_joints")
            object.__setattr__(self, "target_joints",
                               np.asarray(self.target_joints, dtype=float))
            if self.joint_indices is not None:
                object.__setattr__(self, "joint_indices",
                                   np.asarray(self.joint_indices, dtype=int))
        elif self.target_pose is None or self.link is None:
            raise PlanningError(f"{self.kind} goal needs link and target_pose")


@dataclass(frozen=True)
class Limits:
    """Per-DoF box and rate limits; rates are physical (per second)."""

    x_min: np.ndarray
    x_max: np.ndarray
    vel_max: np.ndarray
    acc_max: np.ndarray

    def __post_init__(self):
        for name in ("x_min", "x_max", "vel_max", "acc_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.x_min > self.x_max):
            raise PlanningError("limits out of order")

    @staticmethod
    def from_chain(chain: KinematicChain) -> "Limits":
        lo, hi = chain.joint_limits()
        vel, acc = chain.rate_limits()
        return Limits(lo, hi, vel, acc)


@dataclass(frozen=True)
class PlanningProblem:
    vkc: KinematicChain
    x_start: np.ndarray
    goal: GoalSpec
    T: int = 30
    dt: float = 0.1
    W_v: np.ndarray | None = None  # per-DoF diagonal weights
    W_a: np.ndarray | None = None
    limits: Limits | None = None
    chain_anchors: tuple = ()  # (link_name, RigidTransform) pairs
    world: CollisionWorld = field(default_factory=CollisionWorld)
    dist_safe: float = DEFAULT_DIST_SAFE
    dist_safe_self: float = DEFAULT_DIST_SAFE_SELF
    xi_dist: float = DEFAULT_XI_DIST
    check_self_collision: bool = True

    def __post_init__(self):
        x0 = np.asarray(self.x_start, dtype=float).reshape(-1)
        if x0.shape[0] != self.vkc.dof:
            raise PlanningError("x_start dimension does not match the chain dof")
        object.__setattr__(self, "x_start", x0)
        if self.T < 2:
            raise PlanningError("T must be at least 2")
        n = self.vkc.dof
        W_v = np.ones(n) if self.W_v is None else np.asarray(self.W_v, dtype=float)
        W_a = 0.5 * np.ones(n) if self.W_a is None else np.asarray(self.W_a, dtype=float)
        if np.any(W_v < 0) or np.any(W_a < 0):
            raise PlanningError("weights must be nonnegative")
        object.__setattr__(self, "W_v", W_v)
        object.__setattr__(self, "W_a", W_a)
        lim = self.limits if self.limits is not None else Limits.from_chain(self.vkc)
        object.__setattr__(self, "limits", lim)
        for link, _ in self.chain_anchors:
            self.vkc.link_index(link)  # raises on unknown link


@dataclass
class Trajectory:
    states: np.ndarray  # T x dof
    dt: float
    joint_names: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2:
            raise PlanningError("trajectory states must be a T x dof array")
        if not np.all(np.isfinite(self.states)):
            raise PlanningError("trajectory contains non-finite entries")

    @property
    def T(self) -> int:
        return self.states.shape[0]


# ---- constraint evaluators (also used independently by `verify`) ----


def objective(traj, W_v, W_a) -> float:
    """Weighted path length plus smoothness of a trajectory.

    Sum over forward differences |W_v (x_{t+1} - x_t)|^2 plus second-order
    central differences |W_a (x_{t+1} - 2 x_t + x_{t-1})|^2.
    """
    X = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    W_v = np.asarray(W_v, dtype=float)
    W_a = np.asarray(W_a, dtype=float)
    dx = np.diff(X, axis=0)
    cost = float(np.sum((dx * W_v) ** 2))
    if X.shape[0] >= 3:
        ddx = X[2:] - 2.0 * X[1:-1] + X[:-2]
        cost += float(np.sum((ddx * W_a) ** 2))
    return cost


def chain_constraint(vkc: KinematicChain, x_t, anchors) -> np.ndarray:
    """Loop-closure residual: 6-D pose error per anchored link."""
    if not anchors:
        return np.zeros(0)
    out = []
    for link, target in anchors:
        out.append(pose_error(vkc.fk(x_t, link), target))
    return np.concatenate(out)


def goal_constraint(vkc: KinematicChain, x_T, goal: GoalSpec) -> float:
    """Inequality value |f_task(x_T) - G|^2 - xi_goal (feasible iff <= 0)."""
    e = goal_error(vkc, x_T, goal)
    return float(e @ e - goal.xi_goal)


def goal_error(vkc: KinematicChain, x_T, goal: GoalSpec) -> np.ndarray:
    x_T = np.asarray(x_T, dtype=float)
    if goal.kind == "joint_target":
        if goal.joint_indices is None:
            return x_T - goal.target_joints
        return x_T[goal.joint_indices] - goal.target_joints
    return pose_error(vkc.fk(x_T, goal.link), goal.target_pose)


def limit_constraints(traj, limits: Limits, dt: float | None = None) -> dict:
    """Hinge residuals for box, velocity and acceleration limits.

    Box limits apply at every step; rate limits follow the interior-step
    convention of the optimization (t = 2 .. T-1, one-based).
    """
    X = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if dt is None:
        dt = traj.dt if isinstance(traj, Trajectory) else 1.0
    box = np.maximum(0.0, np.maximum(limits.x_min - X, X - limits.x_max))
    dx = np.diff(X, axis=0)
    vel = np.zeros((0, X.shape[1]))
    acc = np.zeros((0, X.shape[1]))
    if X.shape[0] >= 3:
        vel = np.maximum(0.0, np.abs(dx[1:]) - limits.vel_max * dt)
        ddx = X[2:] - 2.0 * X[1:-1] + X[:-2]
        acc = np.maximum(0.0, np.abs(ddx) - limits.acc_max * dt * dt)
    return {"box": box, "vel": vel, "acc": acc}


def link_geom_pairs(vkc: KinematicChain):
    """(link_index, primitive) pairs over every link carrying geometry."""
    out = []
    for idx, link in enumerate(vkc.links):
        for g in link.collision_geoms:
            out.append((idx, g))
    return out


def collision_constraints(vkc: KinematicChain, x_t, world: CollisionWorld,
                          dist_safe: float = DEFAULT_DIST_SAFE,
                          xi_dist: float = DEFAULT_XI_DIST,
                          dist_safe_self: float = DEFAULT_DIST_SAFE_SELF,
                          check_self: bool = True):
    """Summed hinge penalties (environment, self) at one configuration.

    Each term is |dist_safe - signed_distance|^+ ; the step is feasible
    when each sum stays below xi_dist. Pairs whose bounding spheres are
    separated beyond the margin contribute exactly zero and are skipped.
    """
    rot, tr = vkc.fk_frames(x_t)
    geoms = link_geom_pairs(vkc)
    poses = [RigidTransform.unsafe(rot[i], tr[i]) @ g.offset for i, g in geoms]
    radii = [bounding_radius(g) for _, g in geoms]
    env = 0.0
    for k, ((i, g), pose) in enumerate(zip(geoms, poses)):
        for obs in world.obstacles:
            if not supported_pair(g.kind, obs.kind):
                continue
            gap = pose.translation - obs.offset.translation
            if np.sqrt(gap @ gap) - radii[k] - bounding_radius(obs) > dist_safe:
                continue
            d = signed_distance_witness(g, pose, obs, obs.offset)[0]
            env += max(0.0, dist_safe - d)
    slf = 0.0
    if check_self:
        for a in range(len(geoms)):
            ia, ga = geoms[a]
            for b in range(a + 1, len(geoms)):
                ib, gb = geoms[b]
                if abs(ia - ib) < SELF_PAIR_MIN_SEPARATION:
                    continue
                if not supported_pair(ga.kind, gb.kind):
                    continue
                gap = poses[a].translation - poses[b].translation
                if np.sqrt(gap @ gap) - radii[a] - radii[b] > dist_safe_self:
                    continue
                d = signed_distance_witness(ga, poses[a], gb, poses[b])[0]
                slf += max(0.0, dist_safe_self - d)
    return env, slf


@dataclass
class ResidualReport:
    """Worst residual per constraint family over a whole trajectory."""

    chain_max: float = 0.0
    goal_value: float = -np.inf
    box_max: float = 0.0
    vel_max: float = 0.0
    acc_max: float = 0.0
    collision_env_max: float = 0.0
    collision_self_max: float = 0.0
    objective: float = 0.0

    def feasible(self, problem: PlanningProblem, chain_tol=1e-4, goal_tol=1e-6,
                 rate_tol=1e-12) -> bool:
        return (
            self.chain_max <= chain_tol
            and self.goal_value <= goal_tol
            and self.box_max <= 0.0
            and self.vel_max <= rate_tol
            and self.acc_max <= rate_tol
            and self.collision_env_max <= problem.xi_dist
            and self.collision_self_max <= problem.xi_dist
        )

    def summary(self) -> str:
        return (
            f"chain={self.chain_max:.3e} goal={self.goal_value:.3e} "
            f"box={self.box_max:.3e} vel={self.vel_max:.3e} acc={self.acc_max:.3e} "
            f"coll_env={self.collision_env_max:.3e} coll_self={self.collision_self_max:.3e}"
        )

    def as_dict(self) -> dict:
        return {
            "chain_max": self.chain_max,
            "goal_value": self.goal_value,
            "box_max": self.box_max,
            "vel_max": self.vel_max,
            "acc_max": self.acc_max,
            "collision_env_max": self.collision_env_max,
            "collision_self_max": self.collision_self_max,
            "objective": self.objective,
        }


def verify_trajectory(problem: PlanningProblem, traj) -> ResidualReport:
    """Re-evaluate every constraint family on a trajectory from scratch.

    Step 0 is the handed-in boundary condition (it may legitimately start
    in contact, e.g. right after releasing a handle), so collision sums
    are taken over steps 1..T-1; everything else covers the whole path.
    """
    X = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    rep = ResidualReport()
    rep.objective = objective(X, problem.W_v, problem.W_a)
    for t in range(X.shape[0]):
        h = chain_constraint(problem.vkc, X[t], problem.chain_anchors)
        if h.size:
            rep.chain_max = max(rep.chain_max, float(np.max(np.abs(h))))
        if t == 0:
            continue
        env, slf = collision_constraints(
            problem.vkc, X[t], problem.world, problem.dist_safe, problem.xi_dist,
            problem.dist_safe_self, problem.check_self_collision,
        )
        rep.collision_env_max = max(rep.collision_env_max, env)
        rep.collision_self_max = max(rep.collision_self_max, slf)
    rep.goal_value = goal_constraint(problem.vkc, X[-1], problem.goal)
    lims = limit_constraints(X, problem.limits, problem.dt)
    rep.box_max = float(np.max(lims["box"])) if lims["box"].size else 0.0
    rep.vel_max = float(np.max(lims["vel"])) if lims["vel"].size else 0.0
    rep.acc_max = float(np.max(lims["acc"])) if lims["acc"].size else 0.0
    return rep


# ---- solver ----


def _jac_from_frames(vkc: KinematicChain, rot, tr, link_idx: int, point=None):
    p_ref = tr[link_idx] if point is None else np.asarray(point, dtype=float)
    J = np.zeros((6, vkc.dof))
    for i, joint in enumerate(vkc.joints):
        if i >= link_idx or joint.kind == "fixed":
            continue
        col = vkc._qidx[i]
        z = rot[i + 1] @ joint.axis
        if joint.kind == "revolute":
            J[:3, col] = np.cross(z, p_ref - tr[i + 1])
            J[3:, col] = z
        else:
            J[:3, col] = z
    return J


def _pose_rows(vkc, rot, tr, link_idx, target: RigidTransform):
    """Residual and exact Jacobian of the 6-D pose error at a link."""
    R = rot[link_idx]
    e_t = tr[link_idx] - target.translation
    from .geometry import rotation_log

    e_r = rotation_log(target.rotation.T @ R)
    J6 = _jac_from_frames(vkc, rot, tr, link_idx)
    rows = np.empty((6, vkc.dof))
    rows[:3] = J6[:3]
    rows[3:] = so3_right_jacobian_inv(e_r) @ (R.T @ J6[3:])
    return np.concatenate([e_t, e_r]), rows


class _CollisionPairs:
    """Precomputed collision pair list with broad-phase radii.

    Pair entries: (margin, geom_index_a, geom_index_b_or_None, obstacle).
    """

    def __init__(self, problem: PlanningProblem):
        self.geoms = link_geom_pairs(problem.vkc)
        self.radii = [bounding_radius(g) for _, g in self.geoms]
        self.entries = []
        for k in range(len(self.geoms)):
            for o in problem.world.obstacles:
                if not supported_pair(self.geoms[k][1].kind, o.kind):
                    continue  # e.g. box-box: rail-guided contact, not checked
                self.entries.append((problem.dist_safe, k, None, o, bounding_radius(o)))
        if problem.check_self_collision:
            for a in range(len(self.geoms)):
                for b in range(a + 1, len(self.geoms)):
                    if abs(self.geoms[a][0] - self.geoms[b][0]) < SELF_PAIR_MIN_SEPARATION:
                        continue
                    if not supported_pair(self.geoms[a][1].kind, self.geoms[b][1].kind):
                        continue
                    self.entries.append((problem.dist_safe_self, a, b, None, None))

    def __len__(self):
        return len(self.entries)

    def evaluate(self, rot, tr, pid, poses):
        """(violation c, ia, pa, ib, pb, normal) for one pair, exact."""
        margin, a, b, obs, _ = self.entries[pid]
        ia, ga = self.geoms[a]
        if b is None:
            d, pa, pb, nrm = signed_distance_witness(ga, poses[a], obs, obs.offset)
            return margin - d, ia, pa, None, pb, nrm
        ib, gb = self.geoms[b]
        d, pa, pb, nrm = signed_distance_witness(ga, poses[a], gb, poses[b])
        return margin - d, ia, pa, ib, pb, nrm

    def violation_upper_bound(self, pid, poses):
        """Bounding-sphere distance bound turned into a violation bound."""
        margin, a, b, obs, r_obs = self.entries[pid]
        if b is None:
            gap = np.linalg.norm(poses[a].translation - obs.offset.translation)
            return margin - (gap - self.radii[a] - r_obs)
        gap = np.linalg.norm(poses[a].translation - poses[b].translation)
        return margin - (gap - self.radii[a] - self.radii[b])

    def poses(self, rot, tr):
        return [RigidTransform.unsafe(rot[i], tr[i]) @ g.offset for i, g in self.geoms]


@dataclass
class _SolveStats:
    outer_iters: int = 0
    inner_iters: int = 0
    final_cost: float = 0.0
    converged: bool = False

    def as_dict(self):
        return {
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "final_cost": self.final_cost,
            "converged": self.converged,
        }


def _seed_ik(problem: PlanningProblem) -> np.ndarray:
    """Goal-consistent seed state via damped least squares from x_start."""
    goal = problem.goal
    lims = problem.limits
    x = problem.x_start.copy()
    if goal.kind == "joint_target":
        if goal.joint_indices is None:
            x = goal.target_joints.copy()
        else:
            x = x.copy()
            x[goal.joint_indices] = goal.target_joints
        return np.clip(x, lims.x_min, lims.x_max)
    lam = 1e-3
    for _ in range(200):
        rot, tr = problem.vkc.fk_frames(x)
        res_blocks = []
        jac_blocks = []
        e_g, J_g = _pose_rows(problem.vkc, rot, tr,
                              problem.vkc.link_index(goal.link), goal.target_pose)
        res_blocks.append(e_g)
        jac_blocks.append(J_g)
        for link, target in problem.chain_anchors:
            e_a, J_a = _pose_rows(problem.vkc, rot, tr,
                                  problem.vkc.link_index(link), target)
            res_blocks.append(e_a * 3.0)
            jac_blocks.append(J_a * 3.0)
        r = np.concatenate(res_blocks)
        if np.linalg.norm(r) < 1e-11:
            break
        J = np.vstack(jac_blocks)
        H = J.T @ J + lam * np.eye(problem.vkc.dof)
        dx = np.linalg.solve(H, -J.T @ r)
        step = 1.0
        x = np.clip(x + step * dx, lims.x_min, lims.x_max)
    return x


def _interp_seed(problem: PlanningProblem) -> np.ndarray:
    x_goal = _seed_ik(problem)
    alphas = np.linspace(0.0, 1.0, problem.T)[:, None]
    X = (1 - alphas) * problem.x_start[None, :] + alphas * x_goal[None, :]
    # deterministic symmetry-breaking bump: keeps collision gradients from
    # dying on exactly symmetric seeds; vanishes at both endpoints
    lims = problem.limits
    amp = 1e-3 * np.minimum(1.0, lims.x_max - lims.x_min)
    bump = np.sin(np.pi * np.linspace(0.0, 1.0, problem.T))[:, None] * amp[None, :]
    return np.clip(X + bump, lims.x_min, lims.x_max)


class _PenaltyProblem:
    """Augmented-Lagrangian subproblem over the free steps states[1:].

    Equalities (chain anchors, goal error) carry classic multipliers;
    inequalities (rate limits, collision margins) use the
    Powell-Hestenes-Rockafellar shifted hinge max(0, c + s/mu), which
    drives active constraints to exact feasibility as s converges.
    """

    def __init__(self, problem: PlanningProblem):
        self.p = problem
        self.n = problem.vkc.dof
        self.T = problem.T
        self.pairs = _CollisionPairs(problem)
        n_anchor = 6 * len(problem.chain_anchors)
        self.lam_chain = np.zeros((self.T, n_anchor))
        g = problem.goal
        self.goal_dim = g.target_joints.shape[0] if g.kind == "joint_target" else 6
        self.lam_goal = np.zeros(self.goal_dim)
        self.s_vel = np.zeros((self.T, self.n))
        self.s_acc = np.zeros((self.T, self.n))
        self.s_coll = np.zeros((self.T, len(self.pairs)))
        self.mu_eq = 10.0
        self.mu_goal = 10.0
        self.mu_ineq = 10.0
        self.vel_cap = problem.limits.vel_max * problem.dt
        self.acc_cap = problem.limits.acc_max * problem.dt * problem.dt

    def unpack(self, z):
        X = np.empty((self.T, self.n))
        X[0] = self.p.x_start
        X[1:] = z.reshape(self.T - 1, self.n)
        return X

    def _goal_rows(self, X, get_frames):
        g = self.p.goal
        t = self.T - 1
        if g.kind == "joint_target":
            e = goal_error(self.p.vkc, X[t], g)
            if g.joint_indices is None:
                Jg = np.eye(self.n)
            else:
                Jg = np.zeros((e.shape[0], self.n))
                for r, c in enumerate(g.joint_indices):
                    Jg[r, c] = 1.0
        else:
            rot, tr = get_frames(t)
            e, Jg = _pose_rows(self.p.vkc, rot, tr,
                               self.p.vkc.link_index(g.link), g.target_pose)
        return e, Jg

    def residuals(self, z, with_jac=False):
        p = self.p
        X = self.unpack(z)
        rows = []
        jacs = []  # per block: [(t, matrix), ...] or None

        def add(res, cols):
            rows.append(np.atleast_1d(res))
            jacs.append(cols)

        W_v = p.W_v
        W_a = p.W_a
        I = np.eye(self.n)
        for t in range(self.T - 1):
            res = W_v * (X[t + 1] - X[t])
            cols = [(t + 1, W_v[:, None] * I)]
            if t > 0:
                cols.append((t, -W_v[:, None] * I))
            add(res, cols if with_jac else None)
        for t in range(1, self.T - 1):
            res = W_a * (X[t + 1] - 2 * X[t] + X[t - 1])
            cols = [(t + 1, W_a[:, None] * I), (t, -2 * W_a[:, None] * I)]
            if t - 1 > 0:
                cols.append((t - 1, W_a[:, None] * I))
            add(res, cols if with_jac else None)

        frames = {}

        def get_frames(t):
            if t not in frames:
                frames[t] = p.vkc.fk_frames(X[t])
            return frames[t]

        if p.chain_anchors:
            w = np.sqrt(self.mu_eq / 2.0)
            for t in range(1, self.T):
                rot, tr = get_frames(t)
                res_parts = []
                jac_parts = []
                for link, target in p.chain_anchors:
                    e, J = _pose_rows(p.vkc, rot, tr, p.vkc.link_index(link), target)
                    res_parts.append(e)
                    jac_parts.append(J)
                h = np.concatenate(res_parts)
                add(w * (h + self.lam_chain[t] / self.mu_eq),
                    [(t, w * np.vstack(jac_parts))] if with_jac else None)

        w = np.sqrt(self.mu_goal / 2.0)
        e, Jg = self._goal_rows(X, get_frames)
        add(w * (e + self.lam_goal / self.mu_goal),
            [(self.T - 1, w * Jg)] if with_jac else None)

        wi = np.sqrt(self.mu_ineq / 2.0)
        for t in range(1, self.T - 1):
            dx = X[t + 1] - X[t]
            arg = np.abs(dx) - self.vel_cap + self.s_vel[t] / self.mu_ineq
            mask = arg > 0
            if np.any(mask):
                res = wi * arg[mask]
                if with_jac:
                    sgn = np.sign(dx)[mask]
                    D = np.zeros((int(mask.sum()), self.n))
                    D[np.arange(D.shape[0]), np.where(mask)[0]] = sgn
                    add(res, [(t + 1, wi * D), (t, -wi * D)])
                else:
                    add(res, None)
            ddx = X[t + 1] - 2 * X[t] + X[t - 1]
            arg = np.abs(ddx) - self.acc_cap + self.s_acc[t] / self.mu_ineq
            mask = arg > 0
            if np.any(mask):
                res = wi * arg[mask]
                if with_jac:
                    sgn = np.sign(ddx)[mask]
                    D = np.zeros((int(mask.sum()), self.n))
                    D[np.arange(D.shape[0]), np.where(mask)[0]] = sgn
                    cols = [(t + 1, wi * D), (t, -2 * wi * D)]
                    if t - 1 > 0:
                        cols.append((t - 1, wi * D))
                    add(res, cols)
                else:
                    add(res, None)

        for t in range(1, self.T):
            rot, tr = get_frames(t)
            poses = self.pairs.poses(rot, tr)
            for pid in range(len(self.pairs)):
                s = self.s_coll[t, pid]
                if s == 0.0 and self.pairs.violation_upper_bound(pid, poses) <= -0.02:
                    continue
                c, ia, pa, ib, pb, nrm = self.pairs.evaluate(rot, tr, pid, poses)
                arg = c + s / self.mu_ineq
                if arg <= 0.0:
                    continue
                if with_jac:
                    row = -wi * (nrm @ _jac_from_frames(p.vkc, rot, tr, ia, pa)[:3])
                    if ib is not None:
                        row = row + wi * (nrm @ _jac_from_frames(p.vkc, rot, tr, ib, pb)[:3])
                    add(np.array([wi * arg]), [(t, row)])
                else:
                    add(np.array([wi * arg]), None)

        r = np.concatenate(rows) if rows else np.zeros(0)
        if not with_jac:
            return r
        m = r.shape[0]
        J = np.zeros((m, (self.T - 1) * self.n))
        at = 0
        for res, cols in zip(rows, jacs):
            k = res.shape[0]
            if cols:
                for t, M in cols:
                    if t >= 1:
                        J[at:at + k, (t - 1) * self.n:t * self.n] += np.atleast_2d(M)
            at += k
        return r, J

    def update_multipliers(self, z):
        p = self.p
        X = self.unpack(z)
        if p.chain_anchors:
            for t in range(1, self.T):
                h = chain_constraint(p.vkc, X[t], p.chain_anchors)
                self.lam_chain[t] += self.mu_eq * h
        e = goal_error(p.vkc, X[-1], p.goal)
        self.lam_goal += self.mu_goal * e
        for t in range(1, self.T - 1):
            c_v = np.abs(X[t + 1] - X[t]) - self.vel_cap
            self.s_vel[t] = np.maximum(0.0, self.s_vel[t] + self.mu_ineq * c_v)
            c_a = np.abs(X[t + 1] - 2 * X[t] + X[t - 1]) - self.acc_cap
            self.s_acc[t] = np.maximum(0.0, self.s_acc[t] + self.mu_ineq * c_a)
        for t in range(1, self.T):
            rot, tr = p.vkc.fk_frames(X[t])
            poses = self.pairs.poses(rot, tr)
            for pid in range(len(self.pairs)):
                c_ub = self.pairs.violation_upper_bound(pid, poses)
                if self.s_coll[t, pid] == 0.0 and c_ub <= -0.02:
                    continue
                if c_ub <= -0.02:
                    c = c_ub
                else:
                    c = self.pairs.evaluate(rot, tr, pid, poses)[0]
                self.s_coll[t, pid] = max(0.0, self.s_coll[t, pid] + self.mu_ineq * c)


def _gauss_newton(pen: _PenaltyProblem, z0, max_iter=60, tol=1e-12):
    lims = pen.p.limits
    lo = np.tile(lims.x_min, pen.T - 1)
    hi = np.tile(lims.x_max, pen.T - 1)
    z = np.clip(z0, lo, hi)
    r = pen.residuals(z)
    cost = float(r @ r)
    lam = 1e-8
    iters = 0
    for _ in range(max_iter):
        iters += 1
        r, J = pen.residuals(z, with_jac=True)
        g = J.T @ r
        if np.max(np.abs(g)) < 1e-10:
            break
        H = J.T @ J
        diag = np.diag(H).copy()
        diag[diag < 1e-12] = 1e-12
        improved = False
        for _ in range(12):
            try:
                dz = np.linalg.solve(H + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            z_new = np.clip(z + dz, lo, hi)
            r_new = pen.residuals(z_new)
            cost_new = float(r_new @ r_new)
            if cost_new < cost - 1e-15:
                rel = (cost - cost_new) / max(cost, 1e-30)
                z = z_new
                cost = cost_new
                lam = max(lam * 0.33, 1e-10)
                improved = True
                break
            lam *= 6.0
        if not improved:
            break
        if rel < tol:
            break
    return z, cost, iters


def solve(problem: PlanningProblem, max_outer=8, max_inner=60) -> Trajectory:
    """Solve the trajectory optimization; raises InfeasiblePlanError with a
    residual report when constraints cannot be met.

    Outer iterations continue past formal feasibility until attainable
    constraints are essentially exact (chain 1e-8, goal error squared
    1e-15), so the returned optimum is not biased by penalty softness.
    """
    lims = problem.limits
    if np.any(problem.x_start < lims.x_min - 1e-12) or np.any(problem.x_start > lims.x_max + 1e-12):
        raise PlanningError("x_start violates joint limits")
    pen = _PenaltyProblem(problem)
    X0 = _interp_seed(problem)
    z = X0[1:].reshape(-1)
    stats = _SolveStats()
    best = None  # (report, X) of the last formally feasible iterate
    for outer in range(max_outer):
        stats.outer_iters = outer + 1
        z, cost, inner = _gauss_newton(pen, z, max_iter=max_inner)
        stats.inner_iters += inner
        stats.final_cost = cost
        X = pen.unpack(z)
        report = verify_trajectory(problem, X)
        if report.feasible(problem):
            best = (report, X.copy())
            goal_err_sq = report.goal_value + problem.goal.xi_goal
            if report.chain_max <= 1e-8 and goal_err_sq <= 1e-15:
                stats.converged = True
                break
        pen.update_multipliers(z)
        pen.mu_eq = min(pen.mu_eq * 10.0, 1e7)
        pen.mu_goal = min(pen.mu_goal * 10.0, 1e7)
        pen.mu_ineq = min(pen.mu_ineq * 10.0, 1e7)
    if best is None:
        X = pen.unpack(z)
        report = verify_trajectory(problem, X)
        raise InfeasiblePlanError(report, Trajectory(X, problem.dt))
    report, X = best
    stats.converged = True
    return Trajectory(
        X, problem.dt,
        joint_names=[j.name for j in problem.vkc.moving_joints],
        metadata={"residuals": report.as_dict(), "stats": stats.as_dict(),
                  "objective": objective(X, problem.W_v, problem.W_a)},
    )


# ---- multi-step sequences ----


@dataclass
class PreAction:
    kind: str = "none"  # none | attach | detach
    object_name: str | None = None


@dataclass
class TaskStep:
    """One step of a sequential manipulation task."""

    name: str
    pre_action: PreAction = field(default_factory=PreAction)
    goal: GoalSpec | None = None
    goal_builder: object = None  # callable(scene, vkc, robot_dof) -> GoalSpec
    T: int = 30
    dt: float = 0.1
    settle_time: float = 1.0  # simulator hold after the trajectory ends
    ignore_objects: tuple = ()  # scene objects excluded from collision, e.g.
    # the object about to be grasped (touching it is the point)


@dataclass
class SceneObjectState:
    chain: KinematicChain  # world-rooted, tip = graspable handle link
    base_pose: RigidTransform
    q: np.ndarray
    handle_link: str
    joint_damping: float = 0.5
    dry_friction: float = 0.1
    support_z: float | None = None  # where a released free object settles

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)

    def handle_pose(self) -> RigidTransform:
        return self.base_pose @ self.chain.fk(self.q, self.handle_link)

    def link_world_pose(self, link: str, q=None) -> RigidTransform:
        qq = self.q if q is None else np.asarray(q, dtype=float)
        return self.base_pose @ self.chain.fk(qq, link)

    def world_geoms(self):
        """Collision primitives of the object re-expressed as world obstacles."""
        from .collision import CollisionPrimitive

        out = []
        rot, tr = self.chain.fk_frames(self.q)
        for idx, link in enumerate(self.chain.links):
            for g in link.collision_geoms:
                pose = self.base_pose @ RigidTransform(rot[idx], tr[idx]) @ g.offset
                out.append(CollisionPrimitive(g.kind, g.dimensions, "world", pose,
                                              name=f"{link.name}:{g.name}"))
        return out


@dataclass
class PlanScene:
    """Kinematic world state threaded through a planned sequence."""

    robot: KinematicChain
    objects: dict
    world: CollisionWorld
    x_robot: np.ndarray
    attached: str | None = None
    grasp_offset: RigidTransform | None = None

    def current_vkc(self):
        if self.attached is None:
            return self.robot, self.x_robot.copy(), ()
        obj = self.objects[self.attached]
        inv = invert_chain(obj.chain, obj.handle_link)
        vkc = attach_virtual_joint(self.robot, self.robot.tip_link.name, inv,
                                   self.grasp_offset)
        x = np.concatenate([self.x_robot, -obj.q[::-1]])
        # loop closure pins the base of articulated objects to the world;
        # free rigid objects simply ride along
        anchors = ()
        if obj.chain.dof > 0:
            anchors = ((obj.chain.root_link.name, obj.base_pose),)
        return vkc, x, anchors

    def static_world(self, exclude=()) -> CollisionWorld:
        obstacles = list(self.world.obstacles)
        for name, obj in self.objects.items():
            if name == self.attached or name in exclude:
                continue
            obstacles.extend(obj.world_geoms())
        return CollisionWorld(tuple(obstacles))


@dataclass
class StepPlan:
    step: TaskStep
    vkc: KinematicChain
    x_start: np.ndarray
    anchors: tuple
    trajectory: Trajectory
    report: ResidualReport
    attached: str | None
    grasp_offset: RigidTransform | None


def apply_pre_action(scene: PlanScene, action: PreAction):
    if action.kind == "none":
        return
    if action.kind == "attach":
        if scene.attached is not None:
            raise PlanningError(f"attach while already holding {scene.attached!r}")
        obj = scene.objects[action.object_name]
        ee = scene.robot.fk(scene.x_robot, scene.robot.tip_link.name)
        scene.grasp_offset = ee.inverse() @ obj.handle_pose()
        scene.attached = action.object_name
        return
    if action.kind == "detach":
        if scene.attached is None:
            raise PlanningError("detach with nothing attached")
        scene.attached = None
        scene.grasp_offset = None
        return
    raise PlanningError(f"unknown pre-action {action.kind!r}")


def execute_sequence(scene: PlanScene, steps, problem_defaults=None,
                     on_step=None) -> list:
    """Plan a sequence of task steps, handing object state across
    attach/detach transitions; aborts with step context on infeasibility."""
    defaults = problem_defaults or {}
    plans = []
    for idx, step in enumerate(steps):
        apply_pre_action(scene, step.pre_action)
        vkc, x_start, anchors = scene.current_vkc()
        goal = step.goal
        if goal is None:
            goal = step.goal_builder(scene, vkc, scene.robot.dof)
        weights = _default_weights(vkc, **defaults.get("weight_kwargs", {}))
        problem = PlanningProblem(
            vkc=vkc,
            x_start=x_start,
            goal=goal,
            T=step.T,
            dt=step.dt,
            W_v=weights[0],
            W_a=weights[1],
            chain_anchors=anchors,
            world=scene.static_world(exclude=step.ignore_objects),
            **{k: v for k, v in defaults.items() if k in
               ("dist_safe", "dist_safe_self", "xi_dist", "check_self_collision")},
        )
        try:
            traj = solve(problem)
        except InfeasiblePlanError as e:
            raise InfeasiblePlanError(
                e.report, e.trajectory,
                message=f"step {idx + 1} ({step.name!r}) infeasible",
            ) from e
        report = verify_trajectory(problem, traj)
        plans.append(StepPlan(step, vkc, x_start, anchors, traj, report,
                              scene.attached, scene.grasp_offset))
        x_final = traj.states[-1]
        scene.x_robot = x_final[:scene.robot.dof].copy()
        if scene.attached is not None:
            obj = scene.objects[scene.attached]
            obj.q = -x_final[scene.robot.dof:][::-1]
        if on_step is not None:
            on_step(plans[-1])
    return plans


def _default_weights(vkc: KinematicChain, w_prismatic=1.0, w_revolute=2.0, w_arm=1.0,
                     accel_ratio=0.5):
    """Per-DoF objective weights: virtual-base prismatic, revolute, rest."""
    W_v = np.empty(vkc.dof)
    for j, joint in enumerate(vkc.moving_joints):
        if joint.name.startswith("vb_"):
            W_v[j] = w_prismatic if joint.kind == "prismatic" else w_revolute
        else:
            W_v[j] = w_arm
    return W_v, accel_ratio * W_v


# ---- trajectory files ----


def save_trajectory(traj: Trajectory, csv_path, sidecar_path=None):
    names = traj.joint_names or [f"q{i}" for i in range(traj.states.shape[1])]
    with open(csv_path, "w") as f:
        f.write(",".join(["t"] + names) + "\n")
        for t in range(traj.T):
            vals = [repr(float(t * traj.dt))] + [repr(float(v)) for v in traj.states[t]]
            f.write(",".join(vals) + "\n")
    if sidecar_path is not None:
        with open(sidecar_path, "w") as f:
            json.dump({"dt": traj.dt, "joint_names": names, **traj.metadata}, f, indent=2)


def load_trajectory(csv_path) -> Trajectory:
    with open(csv_path) as f:
        header = f.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in f if line.strip()]
    arr = np.asarray(rows)
    times = arr[:, 0]
    dt = float(times[1] - times[0]) if arr.shape[0] > 1 else 0.1
    return Trajectory(arr[:, 1:], dt, joint_names=header[1:])
