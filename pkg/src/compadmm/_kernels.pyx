# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled epoch kernel for AffineQuadraticProblem instances.

Same contract as ``_kernels_py.epoch_inner_loop``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()


cdef inline void matvec(const double[:, ::1] M, const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(M.shape[0]):
        s = 0.0
        for j in range(M.shape[1]):
            s += M[i, j] * x[j]
        out[i] = s


cdef inline void rmatvec(const double[:, ::1] M, const double[::1] x, double[::1] out) noexcept nogil:
    # out = M' x
    cdef Py_ssize_t i, j
    cdef double xi
    for j in range(M.shape[1]):
        out[j] = 0.0
    for i in range(M.shape[0]):
        xi = x[i]
        for j in range(M.shape[1]):
            out[j] += M[i, j] * xi


cdef inline void outer_grad(const double[:, :, ::1] V, const double[:, ::1] t, const double[:, ::1] h,
                            Py_ssize_t i, const double[::1] y, double[::1] res, double[::1] out) noexcept nogil:
    # out = h[i] + V[i]' (V[i] y - t[i])
    cdef Py_ssize_t a, b
    cdef double s
    for a in range(V.shape[1]):
        s = 0.0
        for b in range(V.shape[2]):
            s += V[i, a, b] * y[b]
        res[a] = s - t[i, a]
    for b in range(V.shape[2]):
        out[b] = h[i, b]
    for a in range(V.shape[1]):
        s = res[a]
        for b in range(V.shape[2]):
            out[b] += V[i, a, b] * s


cdef inline void eig_solve(const double[:, ::1] Q, const double[::1] L, double c, double rho,
                           const double[::1] rhs, double[::1] tmp, double[::1] out) noexcept nogil:
    # out = Q diag(1 / (c + rho L)) Q' rhs
    cdef Py_ssize_t a, b
    cdef Py_ssize_t n = Q.shape[0]
    cdef double s
    for b in range(n):
        s = 0.0
        for a in range(n):
            s += Q[a, b] * rhs[a]
        tmp[b] = s / (c + rho * L[b])
    for a in range(n):
        s = 0.0
        for b in range(n):
            s += Q[a, b] * tmp[b]
        out[a] = s


cdef inline bint bounded(const double[::1] v, double limit) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        if not isfinite(v[i]) or fabs(v[i]) > limit:
            return False
    return True


def epoch_inner_loop(
    const double[:, :, ::1] C, const double[:, ::1] C_mean, const double[::1] d_mean,
    const double[:, :, ::1] V, const double[:, ::1] t, const double[:, ::1] h,
    const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] AtB,
    double[::1] x, double[::1] omega, double[::1] lam,
    const double[::1] x_tilde, const double[::1] g_tilde, const double[::1] grad_tilde,
    const cnp.intp_t[:, ::1] batches, const cnp.intp_t[::1] iidx, const cnp.intp_t[::1] jidx,
    const double[::1] eta_eff,
    double rho,
    const double[:, ::1] xV, const double[::1] xL,
    int omega_mode, const double[:, ::1] wV, const double[::1] wL, double omega_c, double beta, double tau,
    bint unbiased,
    double[::1] x_sum, double[::1] omega_sum, double[::1] lam_sum, double[::1] xdot_sum,
    double limit,
):
    cdef Py_ssize_t K = iidx.shape[0]
    cdef Py_ssize_t N = batches.shape[1]
    cdef Py_ssize_t q = x.shape[0], l = omega.shape[0], p = lam.shape[0], r = g_tilde.shape[0]
    cdef Py_ssize_t kk = V.shape[1]
    cdef Py_ssize_t k, a, b, bi, i, j, jb
    cdef double eta, s, z, thr
    cdef Py_ssize_t done = K

    cdef double[::1] tp = np.empty(p)
    cdef double[::1] tl = np.empty(l)
    cdef double[::1] tl2 = np.empty(l)
    cdef double[::1] tq = np.empty(q)
    cdef double[::1] tq2 = np.empty(q)
    cdef double[::1] diff = np.empty(q)
    cdef double[::1] y = np.empty(r)
    cdef double[::1] ak = np.empty(r)
    cdef double[::1] at = np.empty(r)
    cdef double[::1] res = np.empty(max(kk, 1))
    cdef double[::1] grad = np.empty(q)
    cdef double[::1] rhs = np.empty(q)

    with nogil:
        for k in range(K):
            # omega-update: v = -B'(lam + rho A x)
            matvec(A, x, tp)
            for a in range(p):
                tp[a] = lam[a] + rho * tp[a]
            rmatvec(B, tp, tl)
            for a in range(l):
                tl[a] = -tl[a]
            if omega_mode == 0:
                eig_solve(wV, wL, omega_c, rho, tl, tl2, omega)
            else:
                thr = tau / (rho * beta)
                for a in range(l):
                    z = tl[a] / (rho * beta)
                    if z > thr:
                        omega[a] = z - thr
                    elif z < -thr:
                        omega[a] = z + thr
                    else:
                        omega[a] = 0.0

            # inner estimate at x_k
            if unbiased:
                matvec(C_mean, x, y)
                for a in range(r):
                    y[a] += d_mean[a]
            else:
                for a in range(q):
                    diff[a] = x_tilde[a] - x[a]
                for a in range(r):
                    y[a] = 0.0
                for bi in range(N):
                    jb = batches[k, bi]
                    for a in range(r):
                        s = 0.0
                        for b in range(q):
                            s += C[jb, a, b] * diff[b]
                        y[a] += s
                for a in range(r):
                    y[a] = g_tilde[a] - y[a] / N

            i = iidx[k]
            j = jidx[k]
            outer_grad(V, t, h, i, y, res, ak)
            outer_grad(V, t, h, i, g_tilde, res, at)
            for a in range(r):
                ak[a] = ak[a] - at[a]
            for b in range(q):
                grad[b] = grad_tilde[b]
            for a in range(r):
                s = ak[a]
                for b in range(q):
                    grad[b] += C[j, a, b] * s

            # x-update
            eta = eta_eff[k]
            rmatvec(A, lam, tq)
            matvec(AtB, omega, tq2)
            for a in range(q):
                xdot_sum[a] += x[a]
                rhs[a] = x[a] / eta - grad[a] - tq[a] - rho * tq2[a]
            eig_solve(xV, xL, 1.0 / eta, rho, rhs, tq, x)

            # dual ascent
            matvec(A, x, tp)
            for a in range(p):
                s = 0.0
                for b in range(l):
                    s += B[a, b] * omega[b]
                lam[a] += rho * (tp[a] + s)

            for a in range(q):
                x_sum[a] += x[a]
            for a in range(l):
                omega_sum[a] += omega[a]
            for a in range(p):
                lam_sum[a] += lam[a]
            if not (bounded(x, limit) and bounded(omega, limit) and bounded(lam, limit)):
                done = k
                break
    return done
