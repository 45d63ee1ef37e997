import numpy as np
import pytest
from oracles import random_chain

from vkcuam import kernels
from vkcuam.dynamics import uam_robot_chain


def packed(chain):
    return (chain._kinds, chain._axes, chain._org_rot, chain._org_tr, chain._qidx,
            chain._masses, chain._coms, chain._inertias)


BACKENDS = kernels.backends()


def test_compiled_backend_available():
    # the build is expected to produce the extension in this repo
    assert "compiled" in BACKENDS, "compiled kernel extension missing"


@pytest.mark.skipif("compiled" not in BACKENDS, reason="no compiled backend")
def test_backends_agree_on_fk():
    rng = np.random.default_rng(70)
    chains = [random_chain(rng) for _ in range(10)] + [uam_robot_chain()]
    for c in chains:
        for _ in range(5):
            q = rng.uniform(-2, 2, c.dof)
            args = packed(c)[:5]
            r1, t1 = BACKENDS["pure"].fk_all(*args, q)
            r2, t2 = BACKENDS["compiled"].fk_all(*args, q)
            assert np.max(np.abs(r1 - r2)) < 1e-14
            assert np.max(np.abs(t1 - t2)) < 1e-14


@pytest.mark.skipif("compiled" not in BACKENDS, reason="no compiled backend")
def test_backends_agree_on_rne_and_mass_matrix():
    rng = np.random.default_rng(71)
    chains = [random_chain(rng) for _ in range(10)] + [uam_robot_chain()]
    for c in chains:
        if c.dof == 0:
            continue
        args = packed(c)
        for _ in range(5):
            q = rng.uniform(-2, 2, c.dof)
            qd = rng.uniform(-2, 2, c.dof)
            qdd = rng.uniform(-2, 2, c.dof)
            g = rng.uniform(-10, 10, 3)
            tau1 = BACKENDS["pure"].rne(*args, q, qd, qdd, g)
            tau2 = BACKENDS["compiled"].rne(*args, q, qd, qdd, g)
            scale = max(1.0, np.max(np.abs(tau1)))
            assert np.max(np.abs(tau1 - tau2)) / scale < 1e-13
            M1 = BACKENDS["pure"].mass_matrix(*args, q)
            M2 = BACKENDS["compiled"].mass_matrix(*args, q)
            scale = max(1.0, np.max(np.abs(M1)))
            assert np.max(np.abs(M1 - M2)) / scale < 1e-13


@pytest.mark.skipif("compiled" not in BACKENDS, reason="no compiled backend")
def test_kernels_accept_noncontiguous_state():
    c = uam_robot_chain()
    rng = np.random.default_rng(72)
    q = rng.uniform(-1, 1, c.dof)
    q_rev = np.ascontiguousarray(q[::-1])[::-1]  # negative-stride view of q
    args = packed(c)[:5]
    r1, t1 = BACKENDS["compiled"].fk_all(*args, q.copy())
    r2, t2 = BACKENDS["compiled"].fk_all(*args, q_rev)
    assert np.array_equal(r1, r2) and np.array_equal(t1, t2)


def test_env_var_forces_pure_backend():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import vkcuam; print(vkcuam.KERNEL_BACKEND)"],
        env={"VKCUAM_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True,
    )
    assert out.stdout.strip() == "pure"
