"""Pure numpy implementations of the hot chain kernels.

These are the reference semantics for the compiled backend: forward
kinematics sweeps, recursive Newton-Euler inverse dynamics and the
composite-rigid-body mass matrix over a packed serial chain.

Packed layout (J joints, L = J + 1 link frames, frame 0 = root):
  kinds   int32  [J]    0 revolute, 1 prismatic, 2 fixed
  axes    f64    [J,3]  unit axis in the child/joint frame
  org_rot f64    [J,3,3] joint origin rotation (parent -> joint frame)
  org_tr  f64    [J,3]
  qidx    int32  [J]    index into q, -1 for fixed joints
  masses  f64    [L]; coms f64 [L,3]; inertias f64 [L,3,3] (about com)

Joint i connects link frame i (parent) to link frame i+1 (child); the
child frame is the joint frame after the joint motion.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"

REVOLUTE = 0
PRISMATIC = 1
FIXED = 2


def _axis_rot(axis, angle):
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    v = 1.0 - c
    return np.array(
        [
            [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
            [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
            [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
        ]
    )


def joint_local(kinds, axes, org_rot, org_tr, qidx, q, i):
    """Parent->child transform (R, p) of joint i at configuration q."""
    kind = kinds[i]
    if kind == FIXED:
        return org_rot[i].copy(), org_tr[i].copy()
    qi = q[qidx[i]]
    if kind == REVOLUTE:
        return org_rot[i] @ _axis_rot(axes[i], qi), org_tr[i].copy()
    # prismatic: motion translates along the axis expressed in the joint frame
    return org_rot[i].copy(), org_tr[i] + org_rot[i] @ (axes[i] * qi)


def fk_all(kinds, axes, org_rot, org_tr, qidx, q):
    """Pose of every link frame in the root frame.

    Returns (rot[L,3,3], tr[L,3]) with entry 0 the identity.
    """
    nj = kinds.shape[0]
    rot = np.empty((nj + 1, 3, 3))
    tr = np.empty((nj + 1, 3))
    rot[0] = np.eye(3)
    tr[0] = 0.0
    for i in range(nj):
        R, p = joint_local(kinds, axes, org_rot, org_tr, qidx, q, i)
        rot[i + 1] = rot[i] @ R
        tr[i + 1] = rot[i] @ p + tr[i]
    return rot, tr


def rne(kinds, axes, org_rot, org_tr, qidx, masses, coms, inertias, q, qd, qdd, g_root):
    """Inverse dynamics torques for a fixed-base serial chain.

    Gravity enters through the classic base-acceleration trick: the root
    frame is given linear acceleration -g_root. All per-link quantities are
    expressed in that link's own frame.
    """
    nj = kinds.shape[0]
    ndof = int(np.sum(kinds != FIXED))
    # forward pass
    w = np.zeros(3)
    wd = np.zeros(3)
    av = -np.asarray(g_root, dtype=float)
    R_loc = np.empty((nj, 3, 3))
    p_loc = np.empty((nj, 3))
    w_all = np.empty((nj, 3))
    wd_all = np.empty((nj, 3))
    Fc = np.empty((nj, 3))
    Nc = np.empty((nj, 3))
    for i in range(nj):
        R, p = joint_local(kinds, axes, org_rot, org_tr, qidx, q, i)
        R_loc[i] = R
        p_loc[i] = p
        Rt = R.T
        kind = kinds[i]
        w_par = w
        wd_par = wd
        a_base = Rt @ (av + np.cross(wd_par, p) + np.cross(w_par, np.cross(w_par, p)))
        if kind == REVOLUTE:
            qi_d = qd[qidx[i]]
            qi_dd = qdd[qidx[i]]
            a = axes[i]
            w = Rt @ w_par + a * qi_d
            wd = Rt @ wd_par + a * qi_dd + np.cross(Rt @ w_par, a * qi_d)
            av = a_base
        elif kind == PRISMATIC:
            qi_d = qd[qidx[i]]
            qi_dd = qdd[qidx[i]]
            a = axes[i]
            w = Rt @ w_par
            wd = Rt @ wd_par
            av = a_base + a * qi_dd + 2.0 * np.cross(w, a * qi_d)
        else:
            w = Rt @ w_par
            wd = Rt @ wd_par
            av = a_base
        w_all[i] = w
        wd_all[i] = wd
        c = coms[i + 1]
        ac = av + np.cross(wd, c) + np.cross(w, np.cross(w, c))
        Fc[i] = masses[i + 1] * ac
        Ic = inertias[i + 1]
        Nc[i] = Ic @ wd + np.cross(w, Ic @ w)
    # backward pass
    tau = np.zeros(ndof)
    f = np.zeros(3)
    n = np.zeros(3)
    for i in range(nj - 1, -1, -1):
        if i < nj - 1:
            Rn = R_loc[i + 1]
            pn = p_loc[i + 1]
            f_child = Rn @ f
            n = Rn @ n + np.cross(pn, f_child)
            f = f_child
        else:
            f = np.zeros(3)
            n = np.zeros(3)
        f = f + Fc[i]
        n = n + Nc[i] + np.cross(coms[i + 1], Fc[i])
        kind = kinds[i]
        if kind == REVOLUTE:
            tau[qidx[i]] = axes[i] @ n
        elif kind == PRISMATIC:
            tau[qidx[i]] = axes[i] @ f
    return tau


def mass_matrix(kinds, axes, org_rot, org_tr, qidx, masses, coms, inertias, q):
    """Joint-space mass matrix via the composite-rigid-body algorithm."""
    nj = kinds.shape[0]
    ndof = int(np.sum(kinds != FIXED))
    R_loc = np.empty((nj, 3, 3))
    p_loc = np.empty((nj, 3))
    for i in range(nj):
        R_loc[i], p_loc[i] = joint_local(kinds, axes, org_rot, org_tr, qidx, q, i)
    # composite inertia of the subtree rooted at each link, in link coords,
    # stored as (mass, h = m*com, I about the frame origin)
    cm = masses[1:].copy()
    ch = np.empty((nj, 3))
    cI = np.empty((nj, 3, 3))
    for i in range(nj):
        c = coms[i + 1]
        ch[i] = masses[i + 1] * c
        cc = _skew(c)
        cI[i] = inertias[i + 1] + masses[i + 1] * (cc @ cc.T)
    for i in range(nj - 1, 0, -1):
        R = R_loc[i]
        p = p_loc[i]
        m = cm[i]
        h_par = R @ ch[i] + m * p
        ph = _skew(p)
        hs = _skew(R @ ch[i])
        I_par = R @ cI[i] @ R.T + ph @ hs.T + hs @ ph.T + m * (ph @ ph.T)
        cm[i - 1] += m
        ch[i - 1] += h_par
        cI[i - 1] += I_par
    H = np.zeros((ndof, ndof))
    for i in range(nj):
        if kinds[i] == FIXED:
            continue
        ii = qidx[i]
        a = axes[i]
        if kinds[i] == REVOLUTE:
            # spatial force of a unit joint acceleration on the composite body
            fn = cI[i] @ a
            fl = np.cross(a, ch[i])
            H[ii, ii] = a @ fn
        else:
            fn = np.cross(ch[i], a)
            fl = cm[i] * a
            H[ii, ii] = a @ fl
        # walk toward the root transforming the spatial force
        fn_j = fn
        fl_j = fl
        for j in range(i - 1, -1, -1):
            R = R_loc[j + 1]
            p = p_loc[j + 1]
            fl_p = R @ fl_j
            fn_p = R @ fn_j + np.cross(p, fl_p)
            fn_j, fl_j = fn_p, fl_p
            if kinds[j] == FIXED:
                continue
            jj = qidx[j]
            if kinds[j] == REVOLUTE:
                H[ii, jj] = axes[j] @ fn_j
            else:
                H[ii, jj] = axes[j] @ fl_j
            H[jj, ii] = H[ii, jj]
    return H


def _skew(v):
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def _point_box_batch(P, half):
    q = np.abs(P) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside


def seg_box_sd(a, b, half, n_scan=65, iters=36):
    """Minimum point-box signed distance along segment a->b (box frame).

    Returns (distance, s) with s in [0, 1] the minimizing parameter.
    Coarse scan plus ternary refinement around the best scan cell.
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    half = np.asarray(half, dtype=float)
    ss = np.linspace(0.0, 1.0, n_scan)
    vals = _point_box_batch(a[None, :] + ss[:, None] * d[None, :], half)
    k = int(np.argmin(vals))
    lo = ss[max(k - 1, 0)]
    hi = ss[min(k + 1, n_scan - 1)]
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        v = _point_box_batch(a[None, :] + np.array([[m1], [m2]]) * d[None, :], half)
        if v[0] <= v[1]:
            hi = m2
        else:
            lo = m1
    s = 0.5 * (lo + hi)
    v_best = float(_point_box_batch(a + s * d, half))
    if vals[0] <= v_best:
        s, v_best = 0.0, float(vals[0])
    if vals[-1] < v_best:
        s, v_best = 1.0, float(vals[-1])
    return v_best, s
