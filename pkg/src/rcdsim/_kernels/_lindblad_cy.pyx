# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step RK4 Lindblad propagator.

Same contract as ``_lindblad_py.rk4_propagate``; the whole time loop runs
without the GIL, with matrix products delegated to BLAS zgemm.  Matrices are
stored row-major, so a product C = A @ B is computed as the column-major
product C^T = B^T A^T by swapping operands, and C = A @ B^H uses the
conjugate-transpose op code on the swapped operand.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

BACKEND = "cython"

ctypedef double complex zdouble


cdef void _mat_mul(int d, zdouble* a, zdouble* b, zdouble* c, zdouble beta) noexcept nogil:
    """c = a @ b (+ c if beta=1), all row-major d x d."""
    cdef zdouble one = 1.0
    cdef char nn = b'N'
    zgemm(&nn, &nn, &d, &d, &d, &one, b, &d, a, &d, &beta, c, &d)


cdef void _mat_mul_bh(int d, zdouble* a, zdouble* b, zdouble* c, zdouble beta) noexcept nogil:
    """c = a @ b^H (+ c if beta=1), all row-major d x d."""
    cdef zdouble one = 1.0
    cdef char cc = b'C'
    cdef char nn = b'N'
    zgemm(&cc, &nn, &d, &d, &d, &one, b, &d, a, &d, &beta, c, &d)


cdef void _build_combo(int d, int k0, int k1, zdouble* coeffs, zdouble* parts,
                       zdouble* out) noexcept nogil:
    """out = sum_{k in [k0, k1)} coeffs[k] * parts[k], parts stored (K, d, d)."""
    cdef Py_ssize_t i, n = d * d
    cdef int k
    cdef zdouble ck
    for i in range(n):
        out[i] = 0
    for k in range(k0, k1):
        ck = coeffs[k]
        if ck == 0:
            continue
        for i in range(n):
            out[i] = out[i] + ck * parts[k * n + i]


cdef void _rhs(int d, int km, int nj, zdouble* mparts, zdouble* mc_row,
               zdouble* lparts, zdouble* lc_row, long* loff,
               zdouble* sigma, zdouble* wm, zdouble* wl, zdouble* wp,
               zdouble* out) noexcept nogil:
    cdef Py_ssize_t i, j, n = d * d
    cdef int jj
    cdef zdouble v
    _build_combo(d, 0, km, mc_row, mparts, wm)
    _mat_mul(d, wm, sigma, wp, 0.0)          # wp = M sigma
    for i in range(d):
        for j in range(d):
            out[i * d + j] = wp[i * d + j] + (wp[j * d + i]).conjugate()
    for jj in range(nj):
        _build_combo(d, <int>loff[jj], <int>loff[jj + 1], lc_row, lparts, wl)
        _mat_mul(d, wl, sigma, wp, 0.0)      # wp = L sigma
        _mat_mul_bh(d, wp, wl, out, 1.0)     # out += wp L^H


def rk4_propagate(cnp.ndarray[zdouble, ndim=2] rho0, double dt, long n_steps,
                  cnp.ndarray[zdouble, ndim=3] m_parts,
                  cnp.ndarray[zdouble, ndim=2] m_coeffs,
                  cnp.ndarray[zdouble, ndim=3] l_parts,
                  cnp.ndarray[zdouble, ndim=2] l_coeffs,
                  cnp.ndarray[long, ndim=1] l_offsets,
                  cnp.ndarray[zdouble, ndim=3] obs,
                  cnp.ndarray[long, ndim=1] sample_steps):
    cdef int d = rho0.shape[0]
    cdef int km = m_parts.shape[0]
    cdef int nj = l_offsets.shape[0] - 1
    cdef int ko = obs.shape[0]
    cdef long n_samp = sample_steps.shape[0]

    rho_arr = np.array(rho0, dtype=np.complex128, order="C")
    mp = np.ascontiguousarray(m_parts)
    mc = np.ascontiguousarray(m_coeffs)
    lp = np.ascontiguousarray(l_parts)
    lc = np.ascontiguousarray(l_coeffs)
    loff_arr = np.ascontiguousarray(l_offsets)
    obs_arr = np.ascontiguousarray(obs)
    samp = np.ascontiguousarray(sample_steps)

    obs_out = np.empty((n_samp, ko), dtype=np.complex128)
    trace_out = np.empty(n_samp, dtype=np.float64)
    work = np.empty((9, d, d), dtype=np.complex128)

    cdef zdouble[:, :] rho_mv = rho_arr
    cdef zdouble[:, :, :] mp_mv = mp
    cdef zdouble[:, :] mc_mv = mc
    cdef zdouble[:, :, :] lp_mv = lp
    cdef zdouble[:, :] lc_mv = lc
    cdef long[:] loff_mv = loff_arr
    cdef zdouble[:, :, :] obs_mv = obs_arr
    cdef long[:] samp_mv = samp
    cdef zdouble[:, :] oo_mv = obs_out
    cdef double[:] tr_mv = trace_out
    cdef zdouble[:, :, :] w_mv = work

    cdef zdouble* rho_p = &rho_mv[0, 0]
    cdef zdouble* mp_p = &mp_mv[0, 0, 0]
    cdef zdouble* lp_p = &lp_mv[0, 0, 0] if lp.size else NULL
    cdef zdouble* obs_p = &obs_mv[0, 0, 0] if obs_arr.size else NULL
    cdef zdouble* k1 = &w_mv[0, 0, 0]
    cdef zdouble* k2 = &w_mv[1, 0, 0]
    cdef zdouble* k3 = &w_mv[2, 0, 0]
    cdef zdouble* k4 = &w_mv[3, 0, 0]
    cdef zdouble* tmp = &w_mv[4, 0, 0]
    cdef zdouble* wm = &w_mv[5, 0, 0]
    cdef zdouble* wl = &w_mv[6, 0, 0]
    cdef zdouble* wp = &w_mv[7, 0, 0]

    cdef Py_ssize_t i, j, n = d * d
    cdef long step, s_ptr = 0
    cdef long row
    cdef double tr, drift, max_drift = 0.0
    cdef zdouble acc, avg
    cdef int k

    with nogil:
        # record initial samples (step index 0)
        while s_ptr < n_samp and samp_mv[s_ptr] == 0:
            for k in range(ko):
                acc = 0
                for i in range(d):
                    for j in range(d):
                        acc = acc + obs_p[k * n + i * d + j] * rho_p[j * d + i]
                oo_mv[s_ptr, k] = acc
            tr = 0
            for i in range(d):
                tr += rho_p[i * d + i].real
            tr_mv[s_ptr] = tr
            s_ptr += 1

        for step in range(n_steps):
            row = 2 * step
            _rhs(d, km, nj, mp_p, &mc_mv[row, 0], lp_p, &lc_mv[row, 0],
                 &loff_mv[0], rho_p, wm, wl, wp, k1)
            for i in range(n):
                tmp[i] = rho_p[i] + (dt / 2) * k1[i]
            _rhs(d, km, nj, mp_p, &mc_mv[row + 1, 0], lp_p, &lc_mv[row + 1, 0],
                 &loff_mv[0], tmp, wm, wl, wp, k2)
            for i in range(n):
                tmp[i] = rho_p[i] + (dt / 2) * k2[i]
            _rhs(d, km, nj, mp_p, &mc_mv[row + 1, 0], lp_p, &lc_mv[row + 1, 0],
                 &loff_mv[0], tmp, wm, wl, wp, k3)
            for i in range(n):
                tmp[i] = rho_p[i] + dt * k3[i]
            _rhs(d, km, nj, mp_p, &mc_mv[row + 2, 0], lp_p, &lc_mv[row + 2, 0],
                 &loff_mv[0], tmp, wm, wl, wp, k4)
            for i in range(n):
                rho_p[i] = rho_p[i] + (dt / 6) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
            # re-Hermitize (projects out accumulated floating-point skew)
            for i in range(d):
                rho_p[i * d + i] = rho_p[i * d + i].real
                for j in range(i + 1, d):
                    avg = (rho_p[i * d + j] + (rho_p[j * d + i]).conjugate()) / 2
                    rho_p[i * d + j] = avg
                    rho_p[j * d + i] = avg.conjugate()
            tr = 0
            for i in range(d):
                tr += rho_p[i * d + i].real
            drift = tr - 1.0
            if drift < 0:
                drift = -drift
            if drift > max_drift:
                max_drift = drift
            while s_ptr < n_samp and samp_mv[s_ptr] == step + 1:
                for k in range(ko):
                    acc = 0
                    for i in range(d):
                        for j in range(d):
                            acc = acc + obs_p[k * n + i * d + j] * rho_p[j * d + i]
                    oo_mv[s_ptr, k] = acc
                tr_mv[s_ptr] = tr
                s_ptr += 1

    return obs_out, rho_arr, trace_out, max_drift
