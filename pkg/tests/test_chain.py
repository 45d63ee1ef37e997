import json

import numpy as np
import pytest
from oracles import fk_oracle, jacobian_fd, random_chain

from vkcuam.chain import (
    ChainError,
    ChainLoadError,
    ChainState,
    Joint,
    KinematicChain,
    Link,
    attach_virtual_joint,
    base_pose_from_state,
    base_state_from_pose,
    build_virtual_base,
    chain_from_dict,
    chain_to_dict,
    detach_virtual_joint,
    forward_kinematics,
    invert_chain,
    jacobian,
    load_chain,
)
from vkcuam.dynamics import uam_robot_chain
from vkcuam.geometry import RigidTransform


def one_rev_z():
    return KinematicChain(
        Link("base"),
        [(Joint("j0", "revolute", axis=(0, 0, 1)), Link("tip"))],
    )


def cabinet_chain():
    hinge = Joint(
        "hinge", "revolute", axis=(0, 0, 1),
        origin=RigidTransform.from_rpy_xyz(xyz=(0.1, 0.2, 0.0)),
        limits=(0.0, 1.6),
    )
    mount = Joint(
        "handle_mount", "fixed",
        origin=RigidTransform.from_rpy_xyz(rpy=(0.0, 0.0, 0.3), xyz=(0.0, 0.35, 0.1)),
    )
    return KinematicChain(
        Link("cabinet_base", mass=5.0),
        [(hinge, Link("door", mass=0.8, com=(0.0, 0.2, 0.0),
                      inertia=np.diag([1e-3, 1e-3, 2e-3]))),
         (mount, Link("handle", mass=0.05))],
    )


def chains_equal(a, b, tol=1e-12):
    da, db = chain_to_dict(a), chain_to_dict(b)

    def eq(x, y):
        if isinstance(x, dict):
            return set(x) == set(y) and all(eq(x[k], y[k]) for k in x)
        if isinstance(x, list):
            return len(x) == len(y) and all(eq(u, v) for u, v in zip(x, y))
        if isinstance(x, float) or isinstance(y, float):
            return abs(x - y) <= tol * max(1.0, abs(x), abs(y))
        return x == y

    return eq(da, db)


# ---- forward kinematics ----

def test_fk_zero_state_is_product_of_origins():
    rng = np.random.default_rng(10)
    for _ in range(10):
        c = random_chain(rng)
        T = forward_kinematics(c, np.zeros(c.dof), c.tip_link.name)
        T_ref = fk_oracle(c, np.zeros(c.dof), c.tip_link.name)
        assert np.allclose(T.matrix(), T_ref, atol=1e-12)


def test_fk_elementary_rotation():
    c = one_rev_z()
    T = forward_kinematics(c, [np.pi / 2], "tip")
    assert np.allclose(T.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)


def test_fk_uam_vkc_matches_matrix_product_oracle():
    vkc = build_virtual_base(uam_robot_chain())
    assert vkc.dof == 10
    rng = np.random.default_rng(11)
    for _ in range(20):
        q = rng.uniform(-1.0, 1.0, size=10)
        for name in ("body", "arm_link3", "tcp"):
            T = forward_kinematics(vkc, q, name)
            assert np.max(np.abs(T.matrix() - fk_oracle(vkc, q, name))) < 1e-10


def test_fk_composition_splits():
    rng = np.random.default_rng(12)
    for _ in range(10):
        c = random_chain(rng)
        q = rng.uniform(-2, 2, size=c.dof)
        k = int(rng.integers(1, len(c.links)))
        mid = c.links[k].name
        sub = KinematicChain(c.links[k], c.pairs[k:])
        n_sub = sub.dof
        q_sub = q[c.dof - n_sub:] if n_sub else np.zeros(0)
        whole = forward_kinematics(c, q, c.tip_link.name)
        left = forward_kinematics(c, q, mid)
        right = forward_kinematics(sub, q_sub, sub.tip_link.name)
        assert (left @ right).almost_equal(whole, 1e-10)


def test_fk_errors():
    c = one_rev_z()
    with pytest.raises(ChainError):
        forward_kinematics(c, [0.0], "nope")
    with pytest.raises(ChainError):
        forward_kinematics(c, [0.0, 1.0], "tip")


# ---- jacobian ----

def test_jacobian_prismatic_only_no_angular():
    c = KinematicChain(
        Link("base"),
        [(Joint("px", "prismatic", axis=(1, 0, 0)), Link("l1")),
         (Joint("pz", "prismatic", axis=(0, 0, 1)), Link("l2"))],
    )
    J = jacobian(c, [0.3, -0.2], "l2")
    assert np.allclose(J[3:], 0.0)
    assert np.allclose(J[:3, 0], [1, 0, 0])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(13)
    for _ in range(25):
        c = random_chain(rng)
        q = rng.uniform(-1.5, 1.5, size=c.dof)
        J = jacobian(c, q, c.tip_link.name)
        J_fd = jacobian_fd(c, q, c.tip_link.name)
        scale = max(1.0, np.max(np.abs(J_fd)))
        assert np.max(np.abs(J - J_fd)) / scale < 1e-5


def test_fixed_joint_contributes_no_column():
    c = KinematicChain(
        Link("base"),
        [(Joint("j0", "revolute", axis=(0, 0, 1)), Link("l1")),
         (Joint("glue", "fixed",
                origin=RigidTransform.from_rpy_xyz(xyz=(0.5, 0.0, 0.0))), Link("l2"))],
    )
    assert c.dof == 1
    J = jacobian(c, [0.2], "l2")
    assert J.shape == (6, 1)


# ---- inversion ----

def test_invert_single_link_identity():
    c = KinematicChain(Link("only"), [])
    assert invert_chain(c, "only") is c


def test_invert_interior_link_rejected():
    c = cabinet_chain()
    with pytest.raises(ChainError):
        invert_chain(c, "door")
    with pytest.raises(ChainError):
        invert_chain(c, "nope")


def test_invert_cabinet_structure():
    inv = invert_chain(cabinet_chain(), "handle")
    assert inv.root_link.name == "handle"
    names = inv.link_names
    assert names[0] == "handle" and names[-1] == "cabinet_base"
    assert "door" in names
    assert inv.dof == 1
    kinds = [j.kind for j in inv.joints]
    assert kinds.count("revolute") == 1
    # limits mirrored
    (hinge,) = [j for j in inv.joints if j.kind == "revolute"]
    assert hinge.limits == (-1.6, 0.0)


def test_invert_fk_roundtrip_random_chains():
    rng = np.random.default_rng(14)
    for _ in range(20):
        c = random_chain(rng)
        q = rng.uniform(-1.0, 1.0, size=c.dof)
        inv = invert_chain(c, c.tip_link.name)
        q_inv = -q[::-1]
        T_fwd = forward_kinematics(c, q, c.tip_link.name)
        T_back = forward_kinematics(inv, q_inv, c.root_link.name)
        assert T_back.almost_equal(T_fwd.inverse(), 1e-10)


def test_invert_involution_fk_map():
    rng = np.random.default_rng(15)
    for _ in range(10):
        c = random_chain(rng)
        back = invert_chain(invert_chain(c, c.tip_link.name), c.root_link.name)
        assert chains_equal(c, back)
        for _ in range(5):
            q = rng.uniform(-1.0, 1.0, size=c.dof)
            for name in c.link_names:
                assert forward_kinematics(back, q, name).almost_equal(
                    forward_kinematics(c, q, name), 1e-10
                )


def test_inverted_chain_rotations_stay_orthonormal():
    rng = np.random.default_rng(16)
    c = random_chain(rng, n_joints=10)
    inv = invert_chain(c, c.tip_link.name)
    for _ in range(20):
        q = rng.uniform(-2.0, 2.0, size=inv.dof)
        rot, _ = inv.fk_frames(q)
        for R in rot:
            assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9


# ---- attach / detach ----

def test_attach_detach_roundtrip():
    robot = uam_robot_chain()
    obj = invert_chain(cabinet_chain(), "handle")
    offset = RigidTransform.from_rpy_xyz(rpy=(0.1, 0.0, 0.0), xyz=(0.0, 0.0, -0.02))
    vkc = attach_virtual_joint(robot, "tcp", obj, offset)
    assert vkc.dof == robot.dof + obj.dof
    r2, o2 = detach_virtual_joint(vkc)
    assert chains_equal(robot, r2)
    assert chains_equal(obj, o2)
    with pytest.raises(ChainError):
        detach_virtual_joint(r2)


def test_attach_rigid_object_adds_no_dof():
    robot = uam_robot_chain()
    toy = KinematicChain(Link("toy", mass=0.02), [])
    vkc = attach_virtual_joint(robot, "tcp", toy, RigidTransform.identity())
    assert vkc.dof == robot.dof


def test_attach_drawer_gives_11_dof_vkc():
    robot = build_virtual_base(uam_robot_chain())
    drawer = KinematicChain(
        Link("drawer_base"),
        [(Joint("slide", "prismatic", axis=(1, 0, 0), limits=(0.0, 0.25)),
          Link("tray", mass=0.3)),
         (Joint("knob", "fixed",
                origin=RigidTransform.from_rpy_xyz(xyz=(0.0, 0.0, 0.05))),
          Link("drawer_handle"))],
    )
    obj = invert_chain(drawer, "drawer_handle")
    vkc = attach_virtual_joint(robot, "tcp", obj, RigidTransform.identity())
    assert vkc.dof == 11


def test_attach_requires_tip_and_unique_names():
    robot = uam_robot_chain()
    with pytest.raises(ChainError):
        attach_virtual_joint(robot, "arm_link2", KinematicChain(Link("x"), []),
                             RigidTransform.identity())
    with pytest.raises(ChainError):
        attach_virtual_joint(robot, "tcp", KinematicChain(Link("body"), []),
                             RigidTransform.identity())
    # detached object state: FK of the robot tip is untouched by the round trip
    obj = KinematicChain(Link("ball"), [])
    vkc = attach_virtual_joint(robot, "tcp", obj, RigidTransform.identity())
    r2, _ = detach_virtual_joint(vkc)
    q = np.full(robot.dof, 0.3)
    assert forward_kinematics(r2, q, "tcp").almost_equal(
        forward_kinematics(robot, q, "tcp"), 1e-12
    )


# ---- virtual base ----

def test_virtual_base_zero_state():
    vkc = build_virtual_base(uam_robot_chain())
    T = forward_kinematics(vkc, np.zeros(vkc.dof), "body")
    assert T.almost_equal(RigidTransform.identity(), 1e-12)


def test_virtual_base_translation_and_yaw():
    vkc = build_virtual_base(uam_robot_chain())
    q = np.zeros(vkc.dof)
    q[:6] = base_state_from_pose((1.0, 2.0, 3.0), (0.0, 0.0, np.pi / 2))
    T = forward_kinematics(vkc, q, "body")
    assert np.allclose(T.translation, [1.0, 2.0, 3.0])
    assert np.allclose(T.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)
    p, rpy = base_pose_from_state(q[:6])
    assert np.allclose(p, [1, 2, 3]) and np.allclose(rpy, [0, 0, np.pi / 2])


def test_virtual_base_matches_rpy_convention():
    from vkcuam.geometry import rpy_to_matrix

    vkc = build_virtual_base(uam_robot_chain())
    rng = np.random.default_rng(17)
    for _ in range(10):
        p = rng.uniform(-1, 1, size=3)
        rpy = rng.uniform(-1.2, 1.2, size=3)
        q = np.zeros(vkc.dof)
        q[:6] = base_state_from_pose(p, rpy)
        T = forward_kinematics(vkc, q, "body")
        assert np.allclose(T.rotation, rpy_to_matrix(rpy), atol=1e-12)
        assert np.allclose(T.translation, p)


# ---- states and files ----

def test_chain_state_and_limits():
    c = cabinet_chain()
    s = ChainState([0.4])
    assert len(s) == 1
    assert c.within_limits(s)
    assert not c.within_limits([-0.2])
    assert np.allclose(c.clamp([2.5]), [1.6])


def test_chain_json_roundtrip(tmp_path):
    c = uam_robot_chain()
    path = tmp_path / "robot.json"
    from vkcuam.chain import save_chain

    save_chain(c, path)
    c2 = load_chain(path)
    assert chains_equal(c, c2)
    rng = np.random.default_rng(18)
    q = rng.uniform(-1, 1, size=c.dof)
    assert forward_kinematics(c2, q, "tcp").almost_equal(
        forward_kinematics(c, q, "tcp"), 1e-12
    )


def test_loader_reports_syntax_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "root_link": "a",\n "links": [,]\n}\n')
    with pytest.raises(ChainLoadError) as err:
        load_chain(p)
    assert ":3:" in str(err.value)


def test_loader_rejects_branching_and_bad_axis():
    base = {
        "root_link": "a",
        "links": [{"name": "a"}, {"name": "b"}, {"name": "c"}],
    }
    branch = dict(base, joints=[
        {"name": "j1", "parent": "a", "child": "b", "kind": "revolute"},
        {"name": "j2", "parent": "a", "child": "c", "kind": "revolute"},
    ])
    with pytest.raises(ChainLoadError, match="serial"):
        chain_from_dict(branch)
    bad_axis = dict(base, joints=[
        {"name": "j1", "parent": "a", "child": "b", "axis": [0, 0, 2]},
        {"name": "j2", "parent": "b", "child": "c"},
    ])
    with pytest.raises(ChainLoadError, match="unit"):
        chain_from_dict(bad_axis)
    orphan = dict(base, joints=[{"name": "j1", "parent": "a", "child": "b"}])
    with pytest.raises(ChainLoadError, match="reachable"):
        chain_from_dict(orphan)
