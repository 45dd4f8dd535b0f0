# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step RK4 kernels (wrappers around ``rk4_lanes.h``).

Must stay operation-for-operation identical to ``_pykernel.py`` so both
backends produce bitwise-equal results.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef extern from "rk4_lanes.h" nogil:
    enum: LANES
    ctypedef struct topp_par:
        double R0, Eg0, sigma, alpha, k, d0, c
        double r1r, r2r, r1a, r2a
        double zeta_p, kp2, zeta_a, ka2
        double S_I_target, zeta_si, k_n_si
        double src, k_s, conv
    int topp_advance_one(const topp_par* q, double* x, double u, long n, double h,
                         double* g2int, long* nclamp, long* fail_at)
    void topp_advance_lanes(const topp_par* q, double* x, const double* u, long n,
                            double h, int* status, double* acc)


cdef topp_par _unpack(const double[::1] p, double conv) except *:
    if p.shape[0] != 21:
        raise ValueError("expected 21 model parameters")
    cdef topp_par q
    q.R0 = p[0]; q.Eg0 = p[1]; q.sigma = p[2]; q.alpha = p[3]; q.k = p[4]
    q.d0 = p[5]; q.c = p[6]
    q.r1r = p[7]; q.r2r = p[8]; q.r1a = p[9]; q.r2a = p[10]
    q.zeta_p = p[11]; q.kp2 = p[12] * p[12]; q.zeta_a = p[13]; q.ka2 = p[14] * p[14]
    q.S_I_target = p[15]; q.zeta_si = p[16]; q.k_n_si = p[17]
    q.src = p[18] / p[19]; q.k_s = p[20]; q.conv = conv
    return q


def advance(double[::1] x, double u, long n_steps, double h, const double[::1] params,
            double conv):
    """Take ``n_steps`` RK4 steps of size ``h`` in place on ``x``.

    Returns ``(status, g2_integral, n_clamped, fail_step)`` where
    ``g2_integral`` is the trapezoidal integral of ``G**2`` on the step grid
    and status is 0 (ok), 1 (non-finite state) or 2 (negative excursion).
    """
    if x.shape[0] != 5:
        raise ValueError("expected a 5-vector state")
    cdef topp_par q = _unpack(params, conv)
    cdef double acc = 0.0
    cdef long nclamp = 0
    cdef long fail_at = -1
    cdef int status
    with nogil:
        status = topp_advance_one(&q, &x[0], u, n_steps, h, &acc, &nclamp, &fail_at)
    return status, acc, nclamp, fail_at


def advance_batch(const double[::1] x0, const double[::1] us, long n_steps, double h,
                  const double[::1] params, double conv):
    """Integrate one copy of ``x0`` per input in ``us``.

    Inputs are processed ``LANES`` at a time by the vectorised kernel.
    Returns ``(status, g2_integral, final_states)`` arrays indexed like ``us``.
    """
    cdef topp_par q = _unpack(params, conv)
    cdef Py_ssize_t m = us.shape[0]
    cdef Py_ssize_t nblk = (m + LANES - 1) // LANES
    cdef Py_ssize_t blk, l, i
    cdef int j
    status_arr = np.zeros(m, dtype=np.int32)
    acc_arr = np.zeros(m, dtype=np.float64)
    xs_arr = np.empty((m, 5), dtype=np.float64)
    cdef int[::1] status = status_arr
    cdef double[::1] acc = acc_arr
    cdef double[:, ::1] xs = xs_arr
    cdef double xl[5 * LANES]
    cdef double ul[LANES]
    cdef double al[LANES]
    cdef int sl[LANES]
    with nogil:
        for blk in range(nblk):
            for l in range(LANES):
                i = blk * LANES + l
                # padding lanes repeat the last input and are discarded
                ul[l] = us[i] if i < m else us[m - 1]
                al[l] = 0.0
                sl[l] = 0
                for j in range(5):
                    xl[j * LANES + l] = x0[j]
            topp_advance_lanes(&q, xl, ul, n_steps, h, sl, al)
            for l in range(LANES):
                i = blk * LANES + l
                if i < m:
                    status[i] = sl[l]
                    acc[i] = al[l]
                    for j in range(5):
                        xs[i, j] = xl[j * LANES + l]
    return status_arr, acc_arr, xs_arr
