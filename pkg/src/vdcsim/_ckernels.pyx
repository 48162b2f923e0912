# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled kernels; signatures and results match ``vdcsim._pykernels``."""

from libc.math cimport sin, cos, sqrt

NAME = "c"

cdef enum:
    MAXN = 16
    MAX_HALVINGS = 40

cdef double PD_EPS = 1e-9


cdef inline void rot_axis(long a, double ang, double* R) noexcept nogil:
    cdef double c = cos(ang), s = sin(ang)
    cdef int k
    for k in range(9):
        R[k] = 0.0
    if a == 0:
        R[0] = 1.0; R[4] = c; R[5] = -s; R[7] = s; R[8] = c
    elif a == 1:
        R[0] = c; R[2] = s; R[4] = 1.0; R[6] = -s; R[8] = c
    else:
        R[0] = c; R[1] = -s; R[3] = s; R[4] = c; R[8] = 1.0


cdef inline void mm3(const double* A, const double* B, double* C) noexcept nogil:
    cdef int i, j
    for i in range(3):
        for j in range(3):
            C[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j]


cdef inline void mv3(const double* R, const double* x, double* y) noexcept nogil:
    y[0] = R[0] * x[0] + R[1] * x[1] + R[2] * x[2]
    y[1] = R[3] * x[0] + R[4] * x[1] + R[5] * x[2]
    y[2] = R[6] * x[0] + R[7] * x[1] + R[8] * x[2]


cdef inline void mtv3(const double* R, const double* x, double* y) noexcept nogil:
    y[0] = R[0] * x[0] + R[3] * x[1] + R[6] * x[2]
    y[1] = R[1] * x[0] + R[4] * x[1] + R[7] * x[2]
    y[2] = R[2] * x[0] + R[5] * x[1] + R[8] * x[2]


cdef inline void cross(const double* a, const double* b, double* c) noexcept nogil:
    c[0] = a[1] * b[2] - a[2] * b[1]
    c[1] = a[2] * b[0] - a[0] * b[2]
    c[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double dot3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void imul(const double* p, const double* y, double* out) noexcept nogil:
    # I @ y for vecI = p[4:10] = xx yy zz xy yz xz
    out[0] = p[4] * y[0] + p[7] * y[1] + p[9] * y[2]
    out[1] = p[7] * y[0] + p[5] * y[1] + p[8] * y[2]
    out[2] = p[9] * y[0] + p[8] * y[1] + p[6] * y[2]


cdef inline void rotT6(const double* R, const double* x, double* y) noexcept nogil:
    mtv3(R, x, y)
    mtv3(R, x + 3, y + 3)


cdef inline void rot6(const double* R, const double* x, double* y) noexcept nogil:
    mv3(R, x, y)
    mv3(R, x + 3, y + 3)


cdef inline void link_vel(const double* R, const double* r, const double* V, double* out) noexcept nogil:
    # U^T V: velocity of T from that of B
    cdef double t[3]
    cdef double u[3]
    cross(V + 3, r, t)
    u[0] = V[0] + t[0]; u[1] = V[1] + t[1]; u[2] = V[2] + t[2]
    mtv3(R, u, out)
    mtv3(R, V + 3, out + 3)


cdef inline void link_force(const double* R, const double* r, const double* F, double* out) noexcept nogil:
    # U F: force at B from that at T
    cdef double f[3]
    cdef double m[3]
    cdef double t[3]
    mv3(R, F, f)
    mv3(R, F + 3, m)
    cross(r, f, t)
    out[0] = f[0]; out[1] = f[1]; out[2] = f[2]
    out[3] = t[0] + m[0]; out[4] = t[1] + m[1]; out[5] = t[2] + m[2]


cdef inline void body_wrench(const double* p, const double* w, const double* Y, const double* dY,
                             const double* g, int with_gravity, double* F) noexcept nogil:
    """M dY + C(w) Y (+ G) for parameters p."""
    cdef double m = p[0]
    cdef const double* h = p + 1
    cdef double b[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double t3[3]
    cdef double Iy[3]
    cdef int k
    cross(w, Y, t1)
    for k in range(3):
        b[k] = dY[k] + t1[k] - (g[k] if with_gravity else 0.0)
    # top: m b - h x alpha - w x (h x y_w)
    cross(h, dY + 3, t2)
    cross(h, Y + 3, t3)
    cross(w, t3, t1)
    for k in range(3):
        F[k] = m * b[k] - t2[k] - t1[k]
    # bottom: h x b + I alpha - (I w) x y_w
    cross(h, b, t1)
    imul(p, dY + 3, t2)
    imul(p, w, Iy)
    cross(Iy, Y + 3, t3)
    for k in range(3):
        F[3 + k] = t1[k] + t2[k] - t3[k]


cdef inline void regressor_t(const double* w, const double* Y, const double* dY, const double* g,
                             const double* e, double* s) noexcept nogil:
    """s = W^T e for the rigid-body regressor W(w, Y, dY, g)."""
    cdef double b[3]
    cdef double t[3]
    cdef double u[3]
    cdef double c2[3]
    cdef const double* ev = e
    cdef const double* ew = e + 3
    cdef const double* al = dY + 3
    cdef const double* wr = Y + 3
    cdef int k
    cross(w, Y, t)
    for k in range(3):
        b[k] = dY[k] + t[k] - g[k]
    s[0] = dot3(b, ev)
    cross(al, ev, t)
    cross(b, ew, u)
    cdef double wre = dot3(wr, ev)
    cdef double wwr = dot3(w, wr)
    for k in range(3):
        s[1 + k] = -t[k] + w[k] * wre - wwr * ev[k] + u[k]
    cross(wr, ew, c2)
    # K(al)^T ew - K(w)^T (wr x ew)
    s[4] = al[0] * ew[0] - w[0] * c2[0]
    s[5] = al[1] * ew[1] - w[1] * c2[1]
    s[6] = al[2] * ew[2] - w[2] * c2[2]
    s[7] = al[1] * ew[0] + al[0] * ew[1] - (w[1] * c2[0] + w[0] * c2[1])
    s[8] = al[2] * ew[1] + al[1] * ew[2] - (w[2] * c2[1] + w[1] * c2[2])
    s[9] = al[2] * ew[0] + al[0] * ew[2] - (w[2] * c2[0] + w[0] * c2[2])


cdef inline void unmap(const double* L, double* p) noexcept nogil:
    cdef double tr = L[0] + L[5] + L[10]
    p[0] = L[15]
    p[1] = L[3]; p[2] = L[7]; p[3] = L[11]
    p[4] = tr - L[0]; p[5] = tr - L[5]; p[6] = tr - L[10]
    p[7] = -L[1]; p[8] = -L[6]; p[9] = -L[2]


cdef inline void dual_s(const double* s, double* S) noexcept nogil:
    cdef double sig = s[4] + s[5] + s[6]
    S[0] = sig - s[4]; S[5] = sig - s[5]; S[10] = sig - s[6]
    S[1] = S[4] = -0.5 * s[7]
    S[6] = S[9] = -0.5 * s[8]
    S[2] = S[8] = -0.5 * s[9]
    S[3] = S[12] = 0.5 * s[1]
    S[7] = S[13] = 0.5 * s[2]
    S[11] = S[14] = 0.5 * s[3]
    S[15] = s[0]


cdef inline int chol_pd(const double* A, int n, double shift) noexcept nogil:
    """1 if A - shift*I admits a Cholesky factorisation."""
    cdef double Lc[16]
    cdef int i, j, k
    cdef double acc
    for i in range(n):
        for j in range(i + 1):
            acc = A[n * i + j] - (shift if i == j else 0.0)
            for k in range(j):
                acc -= Lc[n * i + k] * Lc[n * j + k]
            if i == j:
                if not acc > 0.0:
                    return 0
                Lc[n * i + i] = sqrt(acc)
            else:
                Lc[n * i + j] = acc / Lc[n * j + j]
    return 1


cdef int nal_step(double* L, const double* S, double gamma, double dt) noexcept nogil:
    """Explicit Euler step of dL = L S L / gamma with step halving; halvings or -1."""
    cdef double T[16]
    cdef double Rt[16]
    cdef double Ln[16]
    cdef int i, j, k, hv
    cdef double acc, h
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += L[4 * i + k] * S[4 * k + j]
            T[4 * i + j] = acc
    for i in range(4):
        for j in range(4):
            acc = 0.0
            for k in range(4):
                acc += T[4 * i + k] * L[4 * k + j]
            Rt[4 * i + j] = acc
    for i in range(4):
        for j in range(i, 4):
            acc = 0.5 * (Rt[4 * i + j] + Rt[4 * j + i]) / gamma
            Rt[4 * i + j] = acc
            Rt[4 * j + i] = acc
    h = dt
    for hv in range(MAX_HALVINGS + 1):
        for k in range(16):
            Ln[k] = L[k] + h * Rt[k]
        if chol_pd(Ln, 4, PD_EPS):
            for k in range(16):
                L[k] = Ln[k]
            return hv
        h *= 0.5
    return -1


# -- chain recursions ------------------------------------------------------------


cdef void c_fk(int n, const long* axis, const double* lR, const double* lr, const double* q,
               double* R_B, double* p_B, double* R_T, double* p_T) noexcept nogil:
    cdef double R[9]
    cdef double Rj[9]
    cdef double tmp[9]
    cdef double p[3]
    cdef double d[3]
    cdef int i, k
    for k in range(9):
        R[k] = 1.0 if k % 4 == 0 else 0.0
    p[0] = p[1] = p[2] = 0.0
    for i in range(n):
        rot_axis(axis[i], q[i], Rj)
        mm3(R, Rj, tmp)
        for k in range(9):
            R[k] = tmp[k]
            R_B[9 * i + k] = tmp[k]
        for k in range(3):
            p_B[3 * i + k] = p[k]
        mv3(R, lr + 3 * i, d)
        for k in range(3):
            p[k] += d[k]
            p_T[3 * i + k] = p[k]
        mm3(R, lR + 9 * i, tmp)
        for k in range(9):
            R[k] = tmp[k]
            R_T[9 * i + k] = tmp[k]


cdef void c_propagate(int n, const long* axis, const double* lR, const double* lr, const double* q,
                      const double* qdf, const double* qd, const double* qdd, const double* gw,
                      double* V_B, double* dV_B, double* g_B) noexcept nogil:
    """Velocities, their derivatives and gravity in every B_i (``qd``/``qdd`` may be NULL = 0)."""
    cdef double Vp[6]
    cdef double dVp[6]
    cdef double gp[3]
    cdef double x[6]
    cdef double dx[6]
    cdef double Rj[9]
    cdef double* V
    cdef double* dV
    cdef double qf
    cdef int i, k, a
    for k in range(6):
        Vp[k] = 0.0
        dVp[k] = 0.0
    gp[0] = gw[0]; gp[1] = gw[1]; gp[2] = gw[2]
    for i in range(n):
        a = <int>axis[i]
        rot_axis(a, q[i], Rj)
        rotT6(Rj, Vp, x)
        rotT6(Rj, dVp, dx)
        mtv3(Rj, gp, g_B + 3 * i)
        V = V_B + 6 * i
        dV = dV_B + 6 * i
        qf = qdf[i] if qdf != NULL else 0.0
        for k in range(6):
            V[k] = x[k]
            dV[k] = dx[k]
        # -qf * (axis x x) on both halves
        if a == 0:
            dV[1] += qf * x[2]; dV[2] -= qf * x[1]
            dV[4] += qf * x[5]; dV[5] -= qf * x[4]
        elif a == 1:
            dV[0] -= qf * x[2]; dV[2] += qf * x[0]
            dV[3] -= qf * x[5]; dV[5] += qf * x[3]
        else:
            dV[0] += qf * x[1]; dV[1] -= qf * x[0]
            dV[3] += qf * x[4]; dV[4] -= qf * x[3]
        if qd != NULL:
            V[3 + a] += qd[i]
        if qdd != NULL:
            dV[3 + a] += qdd[i]
        link_vel(lR + 9 * i, lr + 3 * i, V, Vp)
        link_vel(lR + 9 * i, lr + 3 * i, dV, dVp)
        mtv3(lR + 9 * i, g_B + 3 * i, gp)


cdef void c_backward(int n, const long* axis, const double* lR, const double* lr, const double* q,
                     const double* F_star, const double* tip, double* F_B) noexcept nogil:
    cdef double FT[6]
    cdef double U[6]
    cdef double Rj[9]
    cdef int i, k
    for k in range(6):
        FT[k] = tip[k]
    for i in range(n - 1, -1, -1):
        link_force(lR + 9 * i, lr + 3 * i, FT, U)
        for k in range(6):
            F_B[6 * i + k] = F_star[6 * i + k] + U[k]
        rot_axis(axis[i], q[i], Rj)
        rot6(Rj, F_B + 6 * i, FT)


cdef void c_id(int n, const long* axis, const double* lR, const double* lr, const double* phi,
               const double* I_m, const double* gw, const double* q, const double* qd, const double* qdd,
               const double* tip, int with_gravity, double* tau, double* F_star, double* F_B) noexcept nogil:
    cdef double V_B[6 * MAXN]
    cdef double dV_B[6 * MAXN]
    cdef double g_B[3 * MAXN]
    cdef int i
    c_propagate(n, axis, lR, lr, q, qd, qd, qdd, gw, V_B, dV_B, g_B)
    for i in range(n):
        body_wrench(phi + 10 * i, V_B + 6 * i + 3, V_B + 6 * i, dV_B + 6 * i, g_B + 3 * i, with_gravity,
                    F_star + 6 * i)
    c_backward(n, axis, lR, lr, q, F_star, tip, F_B)
    for i in range(n):
        tau[i] = F_B[6 * i + 3 + axis[i]] + (I_m[i] * qdd[i] if qdd != NULL else 0.0)


cdef int c_fd(int n, const long* axis, const double* lR, const double* lr, const double* phi,
              const double* I_m, const double* gw, const double* q, const double* qd, const double* tau,
              const double* wrench, double* qdd) noexcept nogil:
    cdef double H[MAXN * MAXN]
    cdef double col[MAXN]
    cdef double e[MAXN]
    cdef double bias[MAXN]
    cdef double Fs[6 * MAXN]
    cdef double FB[6 * MAXN]
    cdef double R_B[9 * MAXN]
    cdef double p_B[3 * MAXN]
    cdef double R_T[9 * MAXN]
    cdef double p_T[3 * MAXN]
    cdef double tip[6]
    cdef double zero6[6]
    cdef double y[MAXN]
    cdef double acc
    cdef int i, j, k
    for k in range(6):
        zero6[k] = 0.0
    for i in range(n):
        e[i] = 0.0
    for j in range(n):
        e[j] = 1.0
        c_id(n, axis, lR, lr, phi, I_m, gw, q, NULL, e, zero6, 0, col, Fs, FB)
        e[j] = 0.0
        for i in range(n):
            H[n * i + j] = col[i]
    c_fk(n, axis, lR, lr, q, R_B, p_B, R_T, p_T)
    rotT6(R_T + 9 * (n - 1), wrench, tip)
    for k in range(6):
        tip[k] = -tip[k]
    c_id(n, axis, lR, lr, phi, I_m, gw, q, qd, NULL, tip, 1, bias, Fs, FB)
    # symmetrised Cholesky in place (lower triangle)
    for i in range(n):
        for j in range(i + 1):
            acc = 0.5 * (H[n * i + j] + H[n * j + i])
            for k in range(j):
                acc -= H[n * i + k] * H[n * j + k]
            if i == j:
                if not acc > 0.0:
                    return -1
                H[n * i + i] = sqrt(acc)
            else:
                H[n * i + j] = acc / H[n * j + j]
    for i in range(n):
        acc = tau[i] - bias[i]
        for k in range(i):
            acc -= H[n * i + k] * y[k]
        y[i] = acc / H[n * i + i]
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, n):
            acc -= H[n * k + i] * qdd[k]
        qdd[i] = acc / H[n * i + i]
    return 0


def _check_n(Py_ssize_t n):
    if n > MAXN or n < 1:
        raise ValueError(f"compiled kernels support 1..{MAXN} joints, got {n}")


# -- python entry points -----------------------------------------------------------


def fk(const long[::1] axis, const double[:, :, ::1] link_R, const double[:, ::1] link_r, const double[::1] q,
       double[:, :, ::1] R_B, double[:, ::1] p_B, double[:, :, ::1] R_T, double[:, ::1] p_T):
    cdef int n = q.shape[0]
    _check_n(n)
    c_fk(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &q[0], &R_B[0, 0, 0], &p_B[0, 0], &R_T[0, 0, 0], &p_T[0, 0])


def inverse_dynamics(const long[::1] axis, const double[:, :, ::1] link_R, const double[:, ::1] link_r,
                     const double[:, ::1] phi, const double[::1] I_m, const double[::1] gravity,
                     const double[::1] q, const double[::1] qd, const double[::1] qdd, const double[::1] tip_T,
                     double[::1] tau, double[:, ::1] F_star, double[:, ::1] F_B):
    cdef int n = q.shape[0]
    _check_n(n)
    c_id(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &phi[0, 0], &I_m[0], &gravity[0], &q[0], &qd[0], &qdd[0],
         &tip_T[0], 1, &tau[0], &F_star[0, 0], &F_B[0, 0])


def forward_dynamics(const long[::1] axis, const double[:, :, ::1] link_R, const double[:, ::1] link_r,
                     const double[:, ::1] phi, const double[::1] I_m, const double[::1] gravity,
                     const double[::1] q, const double[::1] qd, const double[::1] tau,
                     const double[::1] wrench_world, double[::1] qdd):
    cdef int n = q.shape[0]
    _check_n(n)
    if c_fd(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &phi[0, 0], &I_m[0], &gravity[0], &q[0], &qd[0],
            &tau[0], &wrench_world[0], &qdd[0]) != 0:
        raise ArithmeticError("joint-space inertia is not positive definite")


def plant_step(const long[::1] axis, const double[:, :, ::1] link_R, const double[:, ::1] link_r,
               const double[:, ::1] phi, const double[::1] I_m, const double[::1] gravity,
               double[::1] q, double[::1] qd, const double[::1] tau, const double[::1] wrench_world,
               double h, int nsub, double[::1] qdd0):
    """Semi-implicit Euler over ``nsub`` sub-steps of length ``h``, inputs held."""
    cdef int n = q.shape[0]
    cdef double qdd[MAXN]
    cdef int k, i, bad = 0
    _check_n(n)
    with nogil:
        for k in range(nsub):
            if c_fd(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &phi[0, 0], &I_m[0], &gravity[0], &q[0],
                    &qd[0], &tau[0], &wrench_world[0], qdd) != 0:
                bad = 1
                break
            if k == 0:
                for i in range(n):
                    qdd0[i] = qdd[i]
            for i in range(n):
                qd[i] += h * qdd[i]
                q[i] += h * qd[i]
    if bad:
        raise ArithmeticError("joint-space inertia is not positive definite")


def vdc_core(const long[::1] axis, const double[:, :, ::1] link_R, const double[:, ::1] link_r,
             const double[::1] gravity, const double[::1] q, const double[::1] qd, const double[::1] qd_r,
             const double[::1] qdd_r, const double[::1] fd_world,
             const double[:, ::1] KD, const double[:, ::1] KI, const double[::1] kd, const double[::1] kI,
             double dt, double gamma, double windup, int adapt,
             double[:, ::1] int_eV, double[::1] int_ea, double[:, :, ::1] Lb, double[:, :, ::1] La,
             double[::1] tau, double[:, ::1] V, double[:, ::1] Vr, double[:, ::1] dVr, double[:, ::1] eV,
             double[:, ::1] Fr, double[:, ::1] Frs, double[::1] tau_rs, double[::1] ea):
    """Required-velocity and required-force recursions, torque law and adaptation step.

    Integrals and estimates are read at their current values, then advanced
    by one period.  Returns the summed step halvings, or -1 when an estimate
    could not be kept positive definite.
    """
    cdef int n = q.shape[0]
    _check_n(n)
    cdef double dV_act[6 * MAXN]
    cdef double g_B[3 * MAXN]
    cdef double s_body[10 * MAXN]
    cdef double R_B[9 * MAXN]
    cdef double p_B[3 * MAXN]
    cdef double R_T[9 * MAXN]
    cdef double p_T[3 * MAXN]
    cdef double p[10]
    cdef double s[10]
    cdef double S[16]
    cdef double tip[6]
    cdef double x
    cdef int i, k, a, hv, total = 0
    with nogil:
        c_propagate(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &q[0], &qd[0], &qd[0], NULL, &gravity[0],
                    &V[0, 0], dV_act, g_B)
        c_propagate(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &q[0], &qd[0], &qd_r[0], &qdd_r[0],
                    &gravity[0], &Vr[0, 0], &dVr[0, 0], g_B)
        for i in range(n):
            for k in range(6):
                eV[i, k] = Vr[i, k] - V[i, k]
            ea[i] = qd_r[i] - qd[i]
        for i in range(n):
            unmap(&Lb[i, 0, 0], p)
            body_wrench(p, &V[i, 3], &Vr[i, 0], &dVr[i, 0], g_B + 3 * i, 1, &Frs[i, 0])
            for k in range(6):
                Frs[i, k] += KD[i, k] * eV[i, k] + KI[i, k] * int_eV[i, k]
            regressor_t(&V[i, 3], &Vr[i, 0], &dVr[i, 0], g_B + 3 * i, &eV[i, 0], s_body + 10 * i)
        c_fk(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &q[0], R_B, p_B, R_T, p_T)
        rotT6(R_T + 9 * (n - 1), &fd_world[0], tip)
        c_backward(n, &axis[0], &link_R[0, 0, 0], &link_r[0, 0], &q[0], &Frs[0, 0], tip, &Fr[0, 0])
        for i in range(n):
            a = <int>axis[i]
            unmap(&La[i, 0, 0], p)
            tau_rs[i] = p[4 + a] * qdd_r[i] + kd[i] * ea[i] + kI[i] * int_ea[i]
            tau[i] = tau_rs[i] + Fr[i, 3 + a]
        for i in range(n):
            for k in range(6):
                x = int_eV[i, k] + dt * eV[i, k]
                int_eV[i, k] = windup if x > windup else (-windup if x < -windup else x)
            x = int_ea[i] + dt * ea[i]
            int_ea[i] = windup if x > windup else (-windup if x < -windup else x)
        if adapt:
            for i in range(n):
                dual_s(s_body + 10 * i, S)
                hv = nal_step(&Lb[i, 0, 0], S, gamma, dt)
                if hv < 0:
                    total = -1
                    break
                total += hv
                for k in range(10):
                    s[k] = 0.0
                s[4 + <int>axis[i]] = qdd_r[i] * ea[i]
                dual_s(s, S)
                hv = nal_step(&La[i, 0, 0], S, gamma, dt)
                if hv < 0:
                    total = -1
                    break
                total += hv
    return total
