# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled one-step update.

Semantics match mvmilstein._kernels.fallback.milstein_step; see there for
the array conventions.  The fused loops avoid the temporaries the numpy
path allocates per slot, which is what dominates at small ensemble sizes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sin, sqrt, tanh

cnp.import_array()


cdef inline double _tame1(double x, double h, int code) noexcept nogil:
    if code == 1:
        return tanh(h * x) / h
    if code == 2:
        return sin(h * x) / h
    return x


cdef inline double _norm_scale(const double* v, Py_ssize_t d, double h) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t c
    for c in range(d):
        acc += v[c] * v[c]
    return 1.0 / (1.0 + h * sqrt(acc))


def milstein_step(const double[:, ::1] states, const double[:, ::1] F,
                  const double[:, :, ::1] G, LY_obj, LR_obj,
                  const double[:, ::1] dW, const double[:, :, ::1] own_I,
                  cross_obj, double h, kinds, bint use_correction,
                  bint use_measure):
    cdef Py_ssize_t N = states.shape[0]
    cdef Py_ssize_t d = states.shape[1]
    cdef Py_ssize_t m = dW.shape[1]
    cdef int k1 = kinds[0], k2 = kinds[1], k3 = kinds[2], k4 = kinds[3]

    cdef const double[:, :, :, ::1] LY = LY_obj if use_correction else None
    cdef const double[:, :, :, :, ::1] LR = None
    cdef const double[:, :, :, ::1] crossI4 = None
    if use_correction and use_measure:
        LR = LR_obj
        crossI4 = cross_obj.reshape(N, m, N, m)

    out_arr = np.empty((N, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] scratch = np.zeros(d, dtype=np.float64)
    cdef Py_ssize_t i, j, a, b, c, k
    cdef double s, w
    cdef double inv_n = 1.0 / N

    with nogil:
        for i in range(N):
            # drift slot
            if k1 == 3:
                s = _norm_scale(&F[i, 0], d, h)
                for c in range(d):
                    out[i, c] = states[i, c] + F[i, c] * s * h
            else:
                for c in range(d):
                    out[i, c] = states[i, c] + _tame1(F[i, c], h, k1) * h

            # diffusion slot
            for j in range(m):
                w = dW[i, j]
                if k2 == 3:
                    s = _norm_scale(&G[i, j, 0], d, h)
                    for c in range(d):
                        out[i, c] += G[i, j, c] * s * w
                else:
                    for c in range(d):
                        out[i, c] += _tame1(G[i, j, c], h, k2) * w

            if not use_correction:
                continue

            # state correction slot
            for a in range(m):
                for b in range(m):
                    w = own_I[i, a, b]
                    if k3 == 3:
                        s = _norm_scale(&LY[i, a, b, 0], d, h)
                        for c in range(d):
                            out[i, c] += LY[i, a, b, c] * s * w
                    else:
                        for c in range(d):
                            out[i, c] += _tame1(LY[i, a, b, c], h, k3) * w

            # measure correction slot
            if use_measure:
                for c in range(d):
                    scratch[c] = 0.0
                for k in range(N):
                    for a in range(m):
                        for b in range(m):
                            w = crossI4[k, a, i, b]
                            if k4 == 3:
                                s = _norm_scale(&LR[i, k, a, b, 0], d, h)
                                for c in range(d):
                                    scratch[c] += LR[i, k, a, b, c] * s * w
                            else:
                                for c in range(d):
                                    scratch[c] += _tame1(LR[i, k, a, b, c],
                                                         h, k4) * w
                for c in range(d):
                    out[i, c] += scratch[c] * inv_n
    return out_arr
