import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from vkcuam.geometry import (
    RigidTransform,
    euler_rate_matrix,
    hat,
    matrix_to_rpy,
    rotation_exp,
    rotation_log,
    rpy_to_matrix,
    so3_right_jacobian_inv,
    vee,
)


def test_hat_vee_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.normal(size=3)
        assert np.allclose(vee(hat(v)), v)
        w = rng.normal(size=3)
        assert np.allclose(hat(v) @ w, np.cross(v, w))


def test_rpy_matches_scipy_zyx():
    rng = np.random.default_rng(1)
    for _ in range(50):
        rpy = rng.uniform(-np.pi, np.pi, size=3)
        R = rpy_to_matrix(rpy)
        R_ref = Rotation.from_euler("ZYX", [rpy[2], rpy[1], rpy[0]]).as_matrix()
        assert np.allclose(R, R_ref, atol=1e-12)


def test_rpy_extraction_roundtrip():
    rng = np.random.default_rng(2)
    for _ in range(50):
        rpy = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(-1.4, 1.4),
                        rng.uniform(-np.pi, np.pi)])
        back = matrix_to_rpy(rpy_to_matrix(rpy))
        assert np.allclose(back, rpy, atol=1e-10)


def test_log_exp_roundtrip_including_near_pi():
    rng = np.random.default_rng(3)
    angles = list(rng.uniform(-3.0, 3.0, size=30)) + [1e-12, np.pi - 1e-9, -np.pi + 1e-7]
    for a in angles:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        R = Rotation.from_rotvec(axis * a).as_matrix()
        v = rotation_log(R)
        assert np.allclose(rotation_exp(v), R, atol=1e-8)
        assert np.allclose(v, Rotation.from_matrix(R).as_rotvec(), atol=1e-8)


def test_right_jacobian_inverse_matches_fd():
    # d/dt Log(R exp(w t)) at t=0 should equal Jr_inv(Log R) w
    rng = np.random.default_rng(4)
    for _ in range(20):
        v = rng.uniform(-1.5, 1.5, size=3)
        w = rng.normal(size=3)
        R = rotation_exp(v)
        h = 1e-7
        lp = rotation_log(R @ rotation_exp(w * h))
        lm = rotation_log(R @ rotation_exp(-w * h))
        fd = (lp - lm) / (2 * h)
        assert np.allclose(so3_right_jacobian_inv(v) @ w, fd, atol=1e-6)


def test_transform_compose_inverse():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = RigidTransform(Rotation.random(random_state=6).as_matrix(), rng.normal(size=3))
        b = RigidTransform(Rotation.random(random_state=7).as_matrix(), rng.normal(size=3))
        p = rng.normal(size=3)
        assert np.allclose((a @ b).apply(p), a.apply(b.apply(p)))
        assert (a @ a.inverse()).almost_equal(RigidTransform.identity())


def test_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))


def test_euler_rate_guard():
    with pytest.raises(ValueError):
        euler_rate_matrix((0.0, np.pi / 2, 0.0))
    E = euler_rate_matrix((0.0, 0.0, 0.0))
    assert np.allclose(E, np.eye(3))
