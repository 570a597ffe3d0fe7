# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels.

Both functions take the restricted Laplacian as a CSR matrix with int32
indices and solve/apply against ``I -/+ hc * L`` without forming it.
"""
from libc.math cimport fabs, sqrt
from libc.float cimport DBL_MAX

import numpy as np

NAME = "cython"


def explicit_steps(L, double hc, double[::1] u, Py_ssize_t nsteps,
                   const long long[::1] probes, double[:, ::1] probe_out,
                   double[::1] sq_out, double[::1] sup_out):
    """Advance ``u`` in place by ``nsteps`` forward-Euler steps.

    Row ``k`` of the outputs holds the probe values, sum of squares and
    max-abs of the state after step ``k + 1``. Returns ``(done, finite)``;
    stepping stops at the first step that produces a non-finite value.
    """
    cdef const int[::1] indptr = L.indptr
    cdef const int[::1] indices = L.indices
    cdef const double[::1] data = L.data
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t nprobe = probes.shape[0]
    cdef double[::1] work = np.empty(n)
    cdef Py_ssize_t k, i, jj, p
    cdef double s, v, sq, sup
    cdef bint finite = True

    with nogil:
        for k in range(nsteps):
            for i in range(n):
                s = 0.0
                for jj in range(indptr[i], indptr[i + 1]):
                    s = s + data[jj] * u[indices[jj]]
                work[i] = u[i] - hc * s
            sq = 0.0
            sup = 0.0
            for i in range(n):
                v = work[i]
                u[i] = v
                if not (fabs(v) <= DBL_MAX):
                    finite = False
                sq = sq + v * v
                if fabs(v) > sup:
                    sup = fabs(v)
            for p in range(nprobe):
                probe_out[k, p] = u[probes[p]]
            sq_out[k] = sq
            sup_out[k] = sup
            if not finite:
                break
    return (k + 1 if nsteps > 0 else 0), bool(finite)


cdef inline void _apply_shifted(const int[::1] indptr, const int[::1] indices,
                                const double[::1] data, double hc,
                                double[::1] x, double[::1] out) noexcept nogil:
    # out = (I + hc L) x
    cdef Py_ssize_t i, jj
    cdef double s
    for i in range(x.shape[0]):
        s = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            s = s + data[jj] * x[indices[jj]]
        out[i] = x[i] + hc * s


cdef inline double _dot(double[::1] a, double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s = s + a[i] * b[i]
    return s


def cg_solve(L, double hc, const double[::1] b, double[::1] x, double tol,
             Py_ssize_t maxiter):
    """Conjugate gradient for ``(I + hc L) x = b``, warm-started from ``x``.

    Stops when ``||r|| <= tol * ||b||``. Returns ``(iterations, rel_residual)``.
    """
    cdef const int[::1] indptr = L.indptr
    cdef const int[::1] indices = L.indices
    cdef const double[::1] data = L.data
    cdef Py_ssize_t n = x.shape[0]
    cdef double[::1] r = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] q = np.empty(n)
    cdef Py_ssize_t i, it = 0
    cdef double bnorm = 0.0, rr, rr_new, alpha, beta

    with nogil:
        for i in range(n):
            bnorm = bnorm + b[i] * b[i]
        bnorm = sqrt(bnorm)
        if bnorm == 0.0:
            for i in range(n):
                x[i] = 0.0
        else:
            _apply_shifted(indptr, indices, data, hc, x, q)
            for i in range(n):
                r[i] = b[i] - q[i]
                p[i] = r[i]
            rr = _dot(r, r)
            while sqrt(rr) > tol * bnorm and it < maxiter:
                _apply_shifted(indptr, indices, data, hc, p, q)
                alpha = rr / _dot(p, q)
                for i in range(n):
                    x[i] = x[i] + alpha * p[i]
                    r[i] = r[i] - alpha * q[i]
                rr_new = _dot(r, r)
                beta = rr_new / rr
                rr = rr_new
                for i in range(n):
                    p[i] = r[i] + beta * p[i]
                it += 1
    if bnorm == 0.0:
        return 0, 0.0
    return it, sqrt(rr) / bnorm
