# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled chain kernels: forward kinematics sweep, recursive
Newton-Euler inverse dynamics and the composite-rigid-body mass matrix.

Semantics mirror vkcuam.kernels.pure exactly; see that module for the
packed-layout documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

BACKEND = "compiled"

REVOLUTE = 0
PRISMATIC = 1
FIXED = 2

cdef enum:
    _REV = 0
    _PRISM = 1
    _FIX = 2


cdef inline void _axis_rot(const double* a, double angle, double* R) noexcept nogil:
    cdef double c = cos(angle)
    cdef double s = sin(angle)
    cdef double v = 1.0 - c
    cdef double x = a[0], y = a[1], z = a[2]
    R[0] = c + x * x * v
    R[1] = x * y * v - z * s
    R[2] = x * z * v + y * s
    R[3] = y * x * v + z * s
    R[4] = c + y * y * v
    R[5] = y * z * v - x * s
    R[6] = z * x * v - y * s
    R[7] = z * y * v + x * s
    R[8] = c + z * z * v


cdef inline void _mat_mul(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = (A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j]
                            + A[3 * i + 2] * B[6 + j])


cdef inline void _mat_vec(const double* A, const double* x, double* y) noexcept nogil:
    cdef int i
    for i in range(3):
        y[i] = A[3 * i] * x[0] + A[3 * i + 1] * x[1] + A[3 * i + 2] * x[2]


cdef inline void _matT_vec(const double* A, const double* x, double* y) noexcept nogil:
    cdef int i
    for i in range(3):
        y[i] = A[i] * x[0] + A[3 + i] * x[1] + A[6 + i] * x[2]


cdef inline void _cross(const double* a, const double* b, double* c) noexcept nogil:
    c[0] = a[1] * b[2] - a[2] * b[1]
    c[1] = a[2] * b[0] - a[0] * b[2]
    c[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef void _joint_local(const int* kinds, const double* axes, const double* org_rot,
                       const double* org_tr, const int* qidx, const double* q,
                       int i, double* R, double* p) noexcept nogil:
    cdef int kind = kinds[i]
    cdef double M[9]
    cdef double av[3]
    cdef double qi
    cdef int k
    if kind == _FIX:
        for k in range(9):
            R[k] = org_rot[9 * i + k]
        for k in range(3):
            p[k] = org_tr[3 * i + k]
        return
    qi = q[qidx[i]]
    if kind == _REV:
        _axis_rot(&axes[3 * i], qi, M)
        _mat_mul(&org_rot[9 * i], M, R)
        for k in range(3):
            p[k] = org_tr[3 * i + k]
        return
    for k in range(9):
        R[k] = org_rot[9 * i + k]
    for k in range(3):
        av[k] = axes[3 * i + k] * qi
    _mat_vec(&org_rot[9 * i], av, M)  # reuse M[0:3] as scratch
    for k in range(3):
        p[k] = org_tr[3 * i + k] + M[k]


def fk_all(cnp.ndarray[cnp.int32_t, ndim=1] kinds,
           cnp.ndarray[cnp.float64_t, ndim=2] axes,
           cnp.ndarray[cnp.float64_t, ndim=3] org_rot,
           cnp.ndarray[cnp.float64_t, ndim=2] org_tr,
           cnp.ndarray[cnp.int32_t, ndim=1] qidx,
           cnp.ndarray[cnp.float64_t, ndim=1] q):
    q = np.ascontiguousarray(q)
    cdef int nj = kinds.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] rot = np.empty((nj + 1, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tr = np.empty((nj + 1, 3))
    cdef double* rp = <double*> rot.data
    cdef double* tp = <double*> tr.data
    cdef const int* kp = <const int*> kinds.data
    cdef const double* ap = <const double*> axes.data
    cdef const double* orp = <const double*> org_rot.data
    cdef const double* otp = <const double*> org_tr.data
    cdef const int* qip = <const int*> qidx.data
    cdef const double* qp = <const double*> q.data
    cdef double R[9]
    cdef double p[3]
    cdef double tmp[3]
    cdef int i, k
    rp[0] = 1.0; rp[1] = 0.0; rp[2] = 0.0
    rp[3] = 0.0; rp[4] = 1.0; rp[5] = 0.0
    rp[6] = 0.0; rp[7] = 0.0; rp[8] = 1.0
    tp[0] = 0.0; tp[1] = 0.0; tp[2] = 0.0
    for i in range(nj):
        _joint_local(kp, ap, orp, otp, qip, qp, i, R, p)
        _mat_mul(&rp[9 * i], R, &rp[9 * (i + 1)])
        _mat_vec(&rp[9 * i], p, tmp)
        for k in range(3):
            tp[3 * (i + 1) + k] = tmp[k] + tp[3 * i + k]
    return rot, tr


def rne(cnp.ndarray[cnp.int32_t, ndim=1] kinds,
        cnp.ndarray[cnp.float64_t, ndim=2] axes,
        cnp.ndarray[cnp.float64_t, ndim=3] org_rot,
        cnp.ndarray[cnp.float64_t, ndim=2] org_tr,
        cnp.ndarray[cnp.int32_t, ndim=1] qidx,
        cnp.ndarray[cnp.float64_t, ndim=1] masses,
        cnp.ndarray[cnp.float64_t, ndim=2] coms,
        cnp.ndarray[cnp.float64_t, ndim=3] inertias,
        cnp.ndarray[cnp.float64_t, ndim=1] q,
        cnp.ndarray[cnp.float64_t, ndim=1] qd,
        cnp.ndarray[cnp.float64_t, ndim=1] qdd,
        g_root):
    q = np.ascontiguousarray(q)
    qd = np.ascontiguousarray(qd)
    qdd = np.ascontiguousarray(qdd)
    cdef int nj = kinds.shape[0]
    cdef int ndof = 0
    cdef int i, k
    for i in range(nj):
        if kinds[i] != _FIX:
            ndof += 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tau = np.zeros(ndof)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.ascontiguousarray(
        np.asarray(g_root, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R_loc = np.empty((nj, 9))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p_loc = np.empty((nj, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Fc = np.empty((nj, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Nc = np.empty((nj, 3))
    cdef const int* kp = <const int*> kinds.data
    cdef const double* ap = <const double*> axes.data
    cdef const double* orp = <const double*> org_rot.data
    cdef const double* otp = <const double*> org_tr.data
    cdef const int* qip = <const int*> qidx.data
    cdef const double* qp = <const double*> q.data
    cdef const double* qdp = <const double*> qd.data
    cdef const double* qddp = <const double*> qdd.data
    cdef const double* mp = <const double*> masses.data
    cdef const double* cp = <const double*> coms.data
    cdef const double* ip = <const double*> inertias.data
    cdef double* Rl = <double*> R_loc.data
    cdef double* pl = <double*> p_loc.data
    cdef double* Fp = <double*> Fc.data
    cdef double* Np = <double*> Nc.data
    cdef double* taup = <double*> tau.data

    cdef double w[3]
    cdef double wd[3]
    cdef double av[3]
    cdef double w_par[3]
    cdef double wd_par[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double t3[3]
    cdef double ac[3]
    cdef double a_base[3]
    cdef double f[3]
    cdef double n[3]
    cdef double fch[3]
    cdef double nch[3]
    cdef double qi_d, qi_dd
    cdef int kind
    cdef const double* a
    cdef const double* c_
    cdef const double* Ic

    for k in range(3):
        w[k] = 0.0
        wd[k] = 0.0
        av[k] = -(<double*> g.data)[k]
    for i in range(nj):
        _joint_local(kp, ap, orp, otp, qip, qp, i, &Rl[9 * i], &pl[3 * i])
        kind = kp[i]
        for k in range(3):
            w_par[k] = w[k]
            wd_par[k] = wd[k]
        # a_base = R^T (av + wd_par x p + w_par x (w_par x p))
        _cross(wd_par, &pl[3 * i], t1)
        _cross(w_par, &pl[3 * i], t2)
        _cross(w_par, t2, t3)
        for k in range(3):
            t1[k] = av[k] + t1[k] + t3[k]
        _matT_vec(&Rl[9 * i], t1, a_base)
        a = &ap[3 * i]
        if kind == _REV:
            qi_d = qdp[qip[i]]
            qi_dd = qddp[qip[i]]
            _matT_vec(&Rl[9 * i], w_par, t1)
            for k in range(3):
                w[k] = t1[k] + a[k] * qi_d
            _matT_vec(&Rl[9 * i], wd_par, t2)
            for k in range(3):
                t3[k] = a[k] * qi_d
            _cross(t1, t3, av)  # (R^T w_par) x (a qdot)
            for k in range(3):
                wd[k] = t2[k] + a[k] * qi_dd + av[k]
            for k in range(3):
                av[k] = a_base[k]
        elif kind == _PRISM:
            qi_d = qdp[qip[i]]
            qi_dd = qddp[qip[i]]
            _matT_vec(&Rl[9 * i], w_par, w)
            _matT_vec(&Rl[9 * i], wd_par, wd)
            for k in range(3):
                t3[k] = a[k] * qi_d
            _cross(w, t3, t2)
            for k in range(3):
                av[k] = a_base[k] + a[k] * qi_dd + 2.0 * t2[k]
        else:
            _matT_vec(&Rl[9 * i], w_par, w)
            _matT_vec(&Rl[9 * i], wd_par, wd)
            for k in range(3):
                av[k] = a_base[k]
        c_ = &cp[3 * (i + 1)]
        _cross(wd, c_, t1)
        _cross(w, c_, t2)
        _cross(w, t2, t3)
        for k in range(3):
            ac[k] = av[k] + t1[k] + t3[k]
        for k in range(3):
            Fp[3 * i + k] = mp[i + 1] * ac[k]
        Ic = &ip[9 * (i + 1)]
        _mat_vec(Ic, wd, t1)
        _mat_vec(Ic, w, t2)
        _cross(w, t2, t3)
        for k in range(3):
            Np[3 * i + k] = t1[k] + t3[k]

    for k in range(3):
        f[k] = 0.0
        n[k] = 0.0
    for i in range(nj - 1, -1, -1):
        if i < nj - 1:
            _mat_vec(&Rl[9 * (i + 1)], f, fch)
            _mat_vec(&Rl[9 * (i + 1)], n, nch)
            _cross(&pl[3 * (i + 1)], fch, t1)
            for k in range(3):
                n[k] = nch[k] + t1[k]
                f[k] = fch[k]
        else:
            for k in range(3):
                f[k] = 0.0
                n[k] = 0.0
        c_ = &cp[3 * (i + 1)]
        _cross(c_, &Fp[3 * i], t1)
        for k in range(3):
            f[k] = f[k] + Fp[3 * i + k]
            n[k] = n[k] + Np[3 * i + k] + t1[k]
        kind = kp[i]
        if kind == _REV:
            taup[qip[i]] = _dot(&ap[3 * i], n)
        elif kind == _PRISM:
            taup[qip[i]] = _dot(&ap[3 * i], f)
    return tau


cdef inline void _skew(const double* v, double* S) noexcept nogil:
    S[0] = 0.0
    S[1] = -v[2]
    S[2] = v[1]
    S[3] = v[2]
    S[4] = 0.0
    S[5] = -v[0]
    S[6] = -v[1]
    S[7] = v[0]
    S[8] = 0.0


cdef inline void _mat_mulT(const double* A, const double* B, double* C) noexcept nogil:
    # C = A @ B^T
    cdef int i, j
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = (A[3 * i] * B[3 * j] + A[3 * i + 1] * B[3 * j + 1]
                            + A[3 * i + 2] * B[3 * j + 2])


def mass_matrix(cnp.ndarray[cnp.int32_t, ndim=1] kinds,
                cnp.ndarray[cnp.float64_t, ndim=2] axes,
                cnp.ndarray[cnp.float64_t, ndim=3] org_rot,
                cnp.ndarray[cnp.float64_t, ndim=2] org_tr,
                cnp.ndarray[cnp.int32_t, ndim=1] qidx,
                cnp.ndarray[cnp.float64_t, ndim=1] masses,
                cnp.ndarray[cnp.float64_t, ndim=2] coms,
                cnp.ndarray[cnp.float64_t, ndim=3] inertias,
                cnp.ndarray[cnp.float64_t, ndim=1] q):
    q = np.ascontiguousarray(q)
    cdef int nj = kinds.shape[0]
    cdef int ndof = 0
    cdef int i, j, k
    for i in range(nj):
        if kinds[i] != _FIX:
            ndof += 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] H = np.zeros((ndof, ndof))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] R_loc = np.empty((nj, 9))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p_loc = np.empty((nj, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cm = np.empty(nj)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ch = np.empty((nj, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cI = np.empty((nj, 9))
    cdef const int* kp = <const int*> kinds.data
    cdef const double* ap = <const double*> axes.data
    cdef const double* orp = <const double*> org_rot.data
    cdef const double* otp = <const double*> org_tr.data
    cdef const int* qip = <const int*> qidx.data
    cdef const double* qp = <const double*> q.data
    cdef const double* mp = <const double*> masses.data
    cdef const double* cp = <const double*> coms.data
    cdef const double* inp = <const double*> inertias.data
    cdef double* Rl = <double*> R_loc.data
    cdef double* pl = <double*> p_loc.data
    cdef double* cmp_ = <double*> cm.data
    cdef double* chp = <double*> ch.data
    cdef double* cIp = <double*> cI.data
    cdef double* Hp = <double*> H.data
    cdef double S1[9]
    cdef double S2[9]
    cdef double T1[9]
    cdef double T2[9]
    cdef double Ipar[9]
    cdef double h_par[3]
    cdef double t1[3]
    cdef double fn[3]
    cdef double fl[3]
    cdef double fn_p[3]
    cdef double fl_p[3]
    cdef double m
    cdef int ii, jj
    cdef const double* a

    for i in range(nj):
        _joint_local(kp, ap, orp, otp, qip, qp, i, &Rl[9 * i], &pl[3 * i])
        cmp_[i] = mp[i + 1]
        for k in range(3):
            chp[3 * i + k] = mp[i + 1] * cp[3 * (i + 1) + k]
        _skew(&cp[3 * (i + 1)], S1)
        # inertia about the link origin: I_com + m * S S^T
        _mat_mulT(S1, S1, T1)
        for k in range(9):
            cIp[9 * i + k] = inp[9 * (i + 1) + k] + mp[i + 1] * T1[k]

    for i in range(nj - 1, 0, -1):
        m = cmp_[i]
        _mat_vec(&Rl[9 * i], &chp[3 * i], t1)  # R @ ch, child moment in parent axes
        for k in range(3):
            h_par[k] = t1[k] + m * pl[3 * i + k]
        _skew(&pl[3 * i], S1)  # ph
        _skew(t1, S2)          # hs
        # I_par = R cI R^T + ph hs^T + hs ph^T + m ph ph^T
        _mat_mul(&Rl[9 * i], &cIp[9 * i], T1)
        _mat_mulT(T1, &Rl[9 * i], Ipar)
        _mat_mulT(S1, S2, T2)
        for k in range(9):
            Ipar[k] += T2[k]
        _mat_mulT(S2, S1, T2)
        for k in range(9):
            Ipar[k] += T2[k]
        _mat_mulT(S1, S1, T2)
        for k in range(9):
            Ipar[k] += m * T2[k]
        cmp_[i - 1] += m
        for k in range(3):
            chp[3 * (i - 1) + k] += h_par[k]
        for k in range(9):
            cIp[9 * (i - 1) + k] += Ipar[k]

    for i in range(nj):
        if kp[i] == _FIX:
            continue
        ii = qip[i]
        a = &ap[3 * i]
        if kp[i] == _REV:
            _mat_vec(&cIp[9 * i], a, fn)
            _cross(a, &chp[3 * i], fl)
            Hp[ii * ndof + ii] = _dot(a, fn)
        else:
            _cross(&chp[3 * i], a, fn)
            for k in range(3):
                fl[k] = cmp_[i] * a[k]
            Hp[ii * ndof + ii] = _dot(a, fl)
        for j in range(i - 1, -1, -1):
            _mat_vec(&Rl[9 * (j + 1)], fl, fl_p)
            _mat_vec(&Rl[9 * (j + 1)], fn, fn_p)
            _cross(&pl[3 * (j + 1)], fl_p, t1)
            for k in range(3):
                fn[k] = fn_p[k] + t1[k]
                fl[k] = fl_p[k]
            if kp[j] == _FIX:
                continue
            jj = qip[j]
            if kp[j] == _REV:
                Hp[ii * ndof + jj] = _dot(&ap[3 * j], fn)
            else:
                Hp[ii * ndof + jj] = _dot(&ap[3 * j], fl)
            Hp[jj * ndof + ii] = Hp[ii * ndof + jj]
    return H


cdef inline double _pbox(const double* p, const double* half) noexcept nogil:
    cdef double q0 = (p[0] if p[0] >= 0 else -p[0]) - half[0]
    cdef double q1 = (p[1] if p[1] >= 0 else -p[1]) - half[1]
    cdef double q2 = (p[2] if p[2] >= 0 else -p[2]) - half[2]
    cdef double o0 = q0 if q0 > 0 else 0.0
    cdef double o1 = q1 if q1 > 0 else 0.0
    cdef double o2 = q2 if q2 > 0 else 0.0
    cdef double outside = sqrt(o0 * o0 + o1 * o1 + o2 * o2)
    cdef double inside = q0
    if q1 > inside:
        inside = q1
    if q2 > inside:
        inside = q2
    if inside > 0.0:
        inside = 0.0
    return outside + inside


def seg_box_sd(a_in, b_in, half_in, int n_scan=65, int iters=36):
    """Minimum point-box signed distance along a segment, (distance, s)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] half = np.ascontiguousarray(half_in, dtype=np.float64)
    cdef const double* ap = <const double*> a.data
    cdef const double* bp = <const double*> b.data
    cdef const double* hp = <const double*> half.data
    cdef double d0 = bp[0] - ap[0]
    cdef double d1 = bp[1] - ap[1]
    cdef double d2 = bp[2] - ap[2]
    cdef double p[3]
    cdef double best = 1e300
    cdef double v0 = 0.0, v_end = 0.0, v = 0.0, s = 0.0
    cdef double lo, hi, m1, m2, vm1, vm2
    cdef int k, kbest = 0
    for k in range(n_scan):
        s = k / <double>(n_scan - 1)
        p[0] = ap[0] + s * d0
        p[1] = ap[1] + s * d1
        p[2] = ap[2] + s * d2
        v = _pbox(p, hp)
        if k == 0:
            v0 = v
        if k == n_scan - 1:
            v_end = v
        if v < best:
            best = v
            kbest = k
    lo = (kbest - 1) / <double>(n_scan - 1)
    if lo < 0.0:
        lo = 0.0
    hi = (kbest + 1) / <double>(n_scan - 1)
    if hi > 1.0:
        hi = 1.0
    for k in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        p[0] = ap[0] + m1 * d0
        p[1] = ap[1] + m1 * d1
        p[2] = ap[2] + m1 * d2
        vm1 = _pbox(p, hp)
        p[0] = ap[0] + m2 * d0
        p[1] = ap[1] + m2 * d1
        p[2] = ap[2] + m2 * d2
        vm2 = _pbox(p, hp)
        if vm1 <= vm2:
            hi = m2
        else:
            lo = m1
    s = 0.5 * (lo + hi)
    p[0] = ap[0] + s * d0
    p[1] = ap[1] + s * d1
    p[2] = ap[2] + s * d2
    v = _pbox(p, hp)
    if v0 <= v:
        s = 0.0
        v = v0
    if v_end < v:
        s = 1.0
        v = v_end
    return v, s
