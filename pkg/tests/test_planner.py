import numpy as np
import pytest
from oracles import fk_oracle
from scipy.spatial.transform import Rotation

from vkcuam.chain import Joint, KinematicChain, Link, build_virtual_base, invert_chain
from vkcuam.collision import CollisionPrimitive, CollisionWorld
from vkcuam.dynamics import uam_robot_chain
from vkcuam.geometry import RigidTransform
from vkcuam.planner import (
    GoalSpec,
    InfeasiblePlanError,
    Limits,
    PlanningProblem,
    PlanScene,
    PreAction,
    SceneObjectState,
    TaskStep,
    Trajectory,
    chain_constraint,
    collision_constraints,
    execute_sequence,
    goal_constraint,
    limit_constraints,
    load_trajectory,
    objective,
    save_trajectory,
    solve,
    verify_trajectory,
)


def planar_robot(with_geom=True):
    geoms = (CollisionPrimitive("sphere", (0.1,), attached_to="tip"),) if with_geom else ()
    return KinematicChain(
        Link("origin"),
        [(Joint("px", "prismatic", axis=(1, 0, 0), limits=(-5, 5),
                vel_limit=2.0, acc_limit=20.0), Link("xcar")),
         (Joint("py", "prismatic", axis=(0, 1, 0), limits=(-5, 5),
                vel_limit=2.0, acc_limit=20.0), Link("tip", collision_geoms=geoms))],
    )


def drawer_chain():
    return KinematicChain(
        Link("drawer_base", mass=2.0),
        [(Joint("slide", "prismatic", axis=(-1, 0, 0), limits=(0.0, 0.25)),
          Link("tray", mass=0.3)),
         (Joint("knob", "fixed",
                origin=RigidTransform.from_rpy_xyz(xyz=(-0.18, 0.0, 0.05))),
          Link("drawer_handle"))],
    )


# ---- objective ----

def test_objective_constant_zero():
    X = np.tile([[0.3, -0.2]], (8, 1))
    assert objective(X, np.ones(2), np.ones(2)) == 0.0


def test_objective_linear_no_accel_term():
    X = np.linspace(0, 1, 9)[:, None] * np.array([[1.0, -2.0]])
    only_acc = objective(X, np.zeros(2), np.ones(2))
    assert only_acc == 0.0


def test_objective_matches_hand_unrolled_sum():
    rng = np.random.default_rng(60)
    X = rng.normal(size=(5, 2))
    W_v = np.array([1.3, 0.7])
    W_a = np.array([0.4, 2.1])
    expected = 0.0
    for t in range(4):
        d = X[t + 1] - X[t]
        expected += (W_v[0] * d[0]) ** 2 + (W_v[1] * d[1]) ** 2
    for t in range(1, 4):
        dd = X[t + 1] - 2 * X[t] + X[t - 1]
        expected += (W_a[0] * dd[0]) ** 2 + (W_a[1] * dd[1]) ** 2
    assert abs(objective(X, W_v, W_a) - expected) < 1e-12


def test_objective_time_reversal_invariant():
    rng = np.random.default_rng(61)
    X = rng.normal(size=(12, 4))
    W_v = rng.uniform(0.1, 2, 4)
    W_a = rng.uniform(0.1, 2, 4)
    assert objective(X, W_v, W_a) == pytest.approx(objective(X[::-1], W_v, W_a), abs=1e-12)


# ---- constraint evaluators ----

def test_chain_constraint_empty_without_anchors():
    c = planar_robot()
    assert chain_constraint(c, [0.0, 0.0], ()).size == 0


def test_chain_constraint_zero_at_match_and_oracle():
    vkc = build_virtual_base(uam_robot_chain())
    rng = np.random.default_rng(62)
    q = rng.uniform(-0.5, 0.5, vkc.dof)
    target = vkc.fk(q, "arm_link2")
    h = chain_constraint(vkc, q, (("arm_link2", target),))
    assert np.max(np.abs(h)) < 1e-10
    # independent pose-error oracle via matrix-product FK and scipy log
    for _ in range(20):
        q2 = rng.uniform(-0.5, 0.5, vkc.dof)
        h = chain_constraint(vkc, q2, (("arm_link2", target),))
        T = fk_oracle(vkc, q2, "arm_link2")
        e_t = T[:3, 3] - target.translation
        e_r = Rotation.from_matrix(target.rotation.T @ T[:3, :3]).as_rotvec()
        assert np.max(np.abs(h - np.concatenate([e_t, e_r]))) < 1e-10


def test_goal_constraint_values():
    c = planar_robot()
    g = GoalSpec("joint_target", target_joints=[0.5, -0.5], xi_goal=1e-4)
    assert goal_constraint(c, [0.5, -0.5], g) == pytest.approx(-1e-4)
    g2 = GoalSpec("joint_target", target_joints=[0.5], joint_indices=[0], xi_goal=1e-4)
    assert goal_constraint(c, [0.5 + 0.01, 9.0], g2) == pytest.approx(0.01 ** 2 - 1e-4)


def test_goal_constraint_pose_matches_fk_oracle():
    vkc = build_virtual_base(uam_robot_chain())
    rng = np.random.default_rng(63)
    q_goal = rng.uniform(-0.4, 0.4, vkc.dof)
    target = vkc.fk(q_goal, "tcp")
    g = GoalSpec("ee_pose", link="tcp", target_pose=target, xi_goal=1e-4)
    q = rng.uniform(-0.4, 0.4, vkc.dof)
    T = fk_oracle(vkc, q, "tcp")
    e_t = T[:3, 3] - target.translation
    e_r = Rotation.from_matrix(target.rotation.T @ T[:3, :3]).as_rotvec()
    expected = float(e_t @ e_t + e_r @ e_r) - 1e-4
    assert goal_constraint(vkc, q, g) == pytest.approx(expected, abs=1e-10)


def test_limit_constraints_cases():
    lims = Limits(np.array([-1.0, -1.0]), np.array([1.0, 1.0]),
                  np.array([10.0, 10.0]), np.array([100.0, 100.0]))
    X = np.zeros((5, 2))
    r = limit_constraints(X, lims, dt=0.1)
    assert all(np.all(v == 0) for v in r.values())
    X2 = X.copy()
    X2[2, 1] = 1.1
    r = limit_constraints(X2, lims, dt=0.1)
    assert r["box"][2, 1] == pytest.approx(0.1)
    assert np.sum(r["box"] > 0) == 1
    # random trajectories vs brute-force elementwise oracle
    rng = np.random.default_rng(64)
    for _ in range(10):
        X3 = rng.normal(scale=1.2, size=(7, 2))
        r = limit_constraints(X3, lims, dt=0.1)
        for t in range(7):
            for j in range(2):
                expected = max(0.0, X3[t, j] - 1.0, -1.0 - X3[t, j])
                assert r["box"][t, j] == pytest.approx(expected)
        for t in range(1, 6):
            dxv = np.abs(X3[t + 1] - X3[t]) - 10.0 * 0.1
            assert np.allclose(r["vel"][t - 1], np.maximum(0, dxv))


def test_collision_constraints_cases():
    vkc = build_virtual_base(uam_robot_chain())
    q = np.zeros(vkc.dof)
    q[2] = 1.0  # hover at 1 m, empty world
    env, slf = collision_constraints(vkc, q, CollisionWorld())
    assert env == 0.0
    # an obstacle exactly dist_safe away from the body disc: boundary residual 0
    obs = CollisionPrimitive("sphere", (0.1,), offset=RigidTransform(
        np.eye(3), np.array([0.0, 0.0, 1.0 + 0.30 + 0.03 + 0.1 + 0.05])))
    env, _ = collision_constraints(vkc, q, CollisionWorld((obs,)), dist_safe=0.05)
    assert env == pytest.approx(0.0, abs=1e-9)
    # cluttered scene equals the brute-force pairwise oracle
    rng = np.random.default_rng(65)
    from vkcuam.collision import signed_distance
    from vkcuam.planner import link_geom_pairs

    obstacles = tuple(
        CollisionPrimitive("sphere", (0.15,), offset=RigidTransform(
            np.eye(3), rng.uniform(-1, 1, 3) + [0, 0, 1]))
        for _ in range(6)
    )
    env, _ = collision_constraints(vkc, q, CollisionWorld(obstacles), dist_safe=0.4)
    rot, tr = vkc.fk_frames(q)
    expected = 0.0
    for idx, g in link_geom_pairs(vkc):
        pose_g = RigidTransform(rot[idx], tr[idx]) @ g.offset
        for o in obstacles:
            expected += max(0.0, 0.4 - signed_distance(g, pose_g, o, o.offset))
    assert env == pytest.approx(expected, abs=1e-9)


def test_pose_rows_match_finite_differences():
    from vkcuam.planner import _pose_rows

    vkc = build_virtual_base(uam_robot_chain())
    rng = np.random.default_rng(66)
    target = vkc.fk(rng.uniform(-0.5, 0.5, vkc.dof), "tcp")
    idx = vkc.link_index("tcp")
    for _ in range(10):
        q = rng.uniform(-0.5, 0.5, vkc.dof)
        rot, tr = vkc.fk_frames(q)
        e, J = _pose_rows(vkc, rot, tr, idx, target)
        h = 1e-6
        J_fd = np.zeros_like(J)
        from vkcuam.chain import pose_error

        for k in range(vkc.dof):
            qp, qm = q.copy(), q.copy()
            qp[k] += h
            qm[k] -= h
            ep = pose_error(vkc.fk(qp, "tcp"), target)
            em = pose_error(vkc.fk(qm, "tcp"), target)
            J_fd[:, k] = (ep - em) / (2 * h)
        scale = max(1.0, np.max(np.abs(J_fd)))
        assert np.max(np.abs(J - J_fd)) / scale < 1e-4


# ---- solve ----

def test_solve_start_equals_goal_constant():
    c = planar_robot(with_geom=False)
    p = PlanningProblem(
        vkc=c, x_start=[0.2, 0.3],
        goal=GoalSpec("joint_target", target_joints=[0.2, 0.3]),
        T=10,
    )
    traj = solve(p)
    assert np.max(np.abs(traj.states - np.array([0.2, 0.3]))) < 1e-9
    assert traj.metadata["objective"] < 1e-12


def test_solve_1dof_analytic_straight_line():
    c = KinematicChain(
        Link("b"),
        [(Joint("q", "prismatic", axis=(1, 0, 0), limits=(-5, 5),
                vel_limit=5.0, acc_limit=50.0), Link("t"))],
    )
    T = 11
    p = PlanningProblem(
        vkc=c, x_start=[0.0],
        goal=GoalSpec("joint_target", target_joints=[1.0]),
        T=T, W_v=np.ones(1), W_a=np.zeros(1),
    )
    traj = solve(p)
    line = np.linspace(0, 1, T)
    assert np.max(np.abs(traj.states[:, 0] - line)) < 1e-6
    closed_form = 1.0 / (T - 1)
    assert abs(objective(traj.states, p.W_v, p.W_a) - closed_form) < 1e-8


def test_solve_avoids_obstacle_and_verifies():
    c = planar_robot()
    obstacle = CollisionPrimitive("sphere", (0.3,), offset=RigidTransform(
        np.eye(3), np.array([0.5, 0.0, 0.0])))
    p = PlanningProblem(
        vkc=c, x_start=[0.0, 0.0],
        goal=GoalSpec("joint_target", target_joints=[1.0, 0.0]),
        T=25, world=CollisionWorld((obstacle,)),
        dist_safe=0.05, check_self_collision=False,
    )
    traj = solve(p)
    report = verify_trajectory(p, traj)
    assert report.feasible(p)
    # the straight line would graze the obstacle; the plan must bow out
    assert np.max(np.abs(traj.states[:, 1])) > 0.2
    assert traj.states[0] == pytest.approx([0.0, 0.0])
    assert np.linalg.norm(traj.states[-1] - [1.0, 0.0]) < 0.02


def test_solve_pose_goal_on_vkc():
    vkc = build_virtual_base(uam_robot_chain())
    rng = np.random.default_rng(67)
    q_goal = np.zeros(vkc.dof)
    q_goal[:3] = [0.5, 0.2, 0.8]
    q_goal[7] = 0.6
    target = vkc.fk(q_goal, "tcp")
    p = PlanningProblem(
        vkc=vkc, x_start=np.zeros(vkc.dof),
        goal=GoalSpec("ee_pose", link="tcp", target_pose=target, xi_goal=1e-6),
        T=15, check_self_collision=False,
    )
    traj = solve(p)
    rep = verify_trajectory(p, traj)
    assert rep.feasible(p)
    assert rep.goal_value <= 1e-6


def test_solve_reports_infeasible():
    c = planar_robot()
    # goal buried inside a big obstacle: no feasible trajectory exists
    obstacle = CollisionPrimitive("box", (0.5, 0.5, 0.5), offset=RigidTransform(
        np.eye(3), np.array([1.0, 0.0, 0.0])))
    p = PlanningProblem(
        vkc=c, x_start=[0.0, 0.0],
        goal=GoalSpec("joint_target", target_joints=[1.0, 0.0], xi_goal=1e-6),
        T=12, world=CollisionWorld((obstacle,)), check_self_collision=False,
    )
    with pytest.raises(InfeasiblePlanError) as err:
        solve(p, max_outer=3, max_inner=25)
    assert err.value.report.collision_env_max > 0 or err.value.report.goal_value > 0


# ---- sequences ----

def drawer_scene():
    robot = planar_robot()
    drawer = SceneObjectState(
        chain=drawer_chain(),
        base_pose=RigidTransform.from_rpy_xyz(xyz=(1.0, 0.0, 0.0)),
        q=np.zeros(1),
        handle_link="drawer_handle",
    )
    return PlanScene(robot=robot, objects={"drawer": drawer},
                     world=CollisionWorld(), x_robot=np.zeros(2))


def test_sequence_single_noop_step():
    scene = drawer_scene()
    step = TaskStep("hold", goal=GoalSpec("joint_target", target_joints=[0.0, 0.0]), T=8)
    plans = execute_sequence(scene, [step])
    assert len(plans) == 1
    assert np.max(np.abs(plans[0].trajectory.states - 0.0)) < 1e-9


def test_sequence_open_drawer_continuity():
    scene = drawer_scene()
    handle0 = scene.objects["drawer"].handle_pose()
    approach = TaskStep(
        "approach",
        goal=GoalSpec("joint_target",
                      target_joints=handle0.translation[:2], xi_goal=1e-8),
        T=12,
    )

    def open_goal(sc, vkc, robot_dof):
        # drawer slide value in VKC coordinates is the negated object value
        return GoalSpec("joint_target", target_joints=[-0.2],
                        joint_indices=[robot_dof], xi_goal=1e-8)

    openstep = TaskStep("open", pre_action=PreAction("attach", "drawer"),
                        goal_builder=open_goal, T=15)
    away = TaskStep("away", pre_action=PreAction("detach"),
                    goal=GoalSpec("joint_target", target_joints=[0.0, 0.0]), T=10)
    plans = execute_sequence(scene, [approach, openstep, away])
    assert len(plans) == 3
    # handoff continuity: recorded drawer state equals the planned final value
    assert scene.objects["drawer"].q[0] == pytest.approx(0.2, abs=1e-4)
    assert plans[1].trajectory.states[-1][2] == pytest.approx(-0.2, abs=1e-4)
    # away step starts exactly where the open step left the robot
    assert np.allclose(plans[2].trajectory.states[0],
                       plans[1].trajectory.states[-1][:2])
    # while grasped, the chain anchor held: residuals verified feasible
    assert plans[1].report.chain_max <= 1e-4


def test_trajectory_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(68)
    traj = Trajectory(rng.normal(size=(6, 3)), 0.1, joint_names=["a", "b", "c"],
                      metadata={"residuals": {}})
    csv = tmp_path / "traj.csv"
    side = tmp_path / "traj.json"
    save_trajectory(traj, csv, side)
    back = load_trajectory(csv)
    assert np.allclose(back.states, traj.states)
    assert back.dt == pytest.approx(0.1)
    assert back.joint_names == ["a", "b", "c"]
    # byte stability
    save_trajectory(traj, tmp_path / "traj2.csv", tmp_path / "traj2.json")
    assert (tmp_path / "traj.csv").read_bytes() == (tmp_path / "traj2.csv").read_bytes()
