# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Dormand-Prince 5(4) stepping for the two profile systems.

Mirrors :func:`ksselfsim.integrator.integrate` operation for operation so the
two backends agree to rounding. Model ids: 0 cumulated (phi, log(exp(y/4) phi'), S),
1 radial shooting (w, w', M).
"""

from libc.math cimport exp, fabs, pow, INFINITY
from libc.stdlib cimport malloc, realloc, free

import numpy as np

DEF DIM = 3

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9
cdef double BETA = 0.04
cdef double ALPHA = 0.2 - 0.75 * 0.04
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 10.0
cdef double ERR_FLOOR = 1e-4
cdef double TWO_PI = 6.283185307179586


cdef inline void _rhs(int model, double q, double t, double* y, double* out) noexcept nogil:
    cdef double e
    if model == 0:
        # q = tau / 4; y = (phi, log(exp(t/4) phi'), S)
        e = exp(y[1] - 0.25 * t)
        out[0] = e
        out[1] = -y[2] / (2.0 * t)
        out[2] = e - q * y[2]
    else:
        # q = tau / 2
        e = exp(y[0] - 0.25 * t * t)
        out[0] = y[1]
        out[1] = -(1.0 / t + q * t) * y[1] - e
        out[2] = TWO_PI * t * e


cdef inline double _err_norm(double* y, double* yn, double* err, double atol, double rtol) noexcept nogil:
    cdef double worst = 0.0, scale, r, ay, an
    cdef int i
    for i in range(DIM):
        ay = fabs(y[i])
        an = fabs(yn[i])
        scale = atol + rtol * (an if an > ay else ay)
        r = fabs(err[i]) / scale
        if r > worst or r != r:
            worst = r
    return worst


def integrate_model(int model, double param, double t0, state0, double t_end,
                    double atol, double rtol, double h0, double hmax, double hmin,
                    long max_steps):
    """Return ``(nodes, states, termination, rejected)`` for one model solve."""
    cdef double q = 0.25 * param if model == 0 else 0.5 * param
    cdef double y[DIM]
    cdef double yn[DIM]
    cdef double ys[DIM]
    cdef double k1[DIM]
    cdef double k2[DIM]
    cdef double k3[DIM]
    cdef double k4[DIM]
    cdef double k5[DIM]
    cdef double k6[DIM]
    cdef double k7[DIM]
    cdef double ev[DIM]
    cdef int i
    cdef double t = t0, h = h0, t_new, err, fac, remaining
    cdef double err_old = ERR_FLOOR
    cdef bint last, last_rejected = False
    cdef long accepted = 0, rejected = 0
    cdef int status = 0  # 0 end, 1 underflow, 2 budget
    cdef Py_ssize_t cap = 1024, count = 0
    cdef double* buf_t = <double*> malloc(cap * sizeof(double))
    cdef double* buf_y = <double*> malloc(cap * DIM * sizeof(double))
    cdef double* tmp

    if buf_t == NULL or buf_y == NULL:
        free(buf_t)
        free(buf_y)
        raise MemoryError()

    for i in range(DIM):
        y[i] = float(state0[i])
    buf_t[0] = t
    for i in range(DIM):
        buf_y[i] = y[i]
    count = 1

    with nogil:
        _rhs(model, q, t, y, k1)
        while t < t_end:
            if accepted >= max_steps:
                status = 2
                break
            remaining = t_end - t
            last = h >= remaining
            if last:
                h = remaining
            elif h < hmin:
                status = 1
                break

            for i in range(DIM):
                ys[i] = y[i] + h * (A21 * k1[i])
            _rhs(model, q, t + C2 * h, ys, k2)
            for i in range(DIM):
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
            _rhs(model, q, t + C3 * h, ys, k3)
            for i in range(DIM):
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _rhs(model, q, t + C4 * h, ys, k4)
            for i in range(DIM):
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _rhs(model, q, t + C5 * h, ys, k5)
            for i in range(DIM):
                ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            t_new = t_end if last else t + h
            _rhs(model, q, t_new, ys, k6)
            for i in range(DIM):
                yn[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
            _rhs(model, q, t_new, yn, k7)
            for i in range(DIM):
                ev[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            err = _err_norm(y, yn, ev, atol, rtol)

            if err <= 1.0:
                t = t_new
                for i in range(DIM):
                    y[i] = yn[i]
                    k1[i] = k7[i]
                accepted += 1
                if count == cap:
                    cap *= 2
                    tmp = <double*> realloc(buf_t, cap * sizeof(double))
                    if tmp == NULL:
                        status = 3
                        break
                    buf_t = tmp
                    tmp = <double*> realloc(buf_y, cap * DIM * sizeof(double))
                    if tmp == NULL:
                        status = 3
                        break
                    buf_y = tmp
                buf_t[count] = t
                for i in range(DIM):
                    buf_y[count * DIM + i] = y[i]
                count += 1
                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = SAFETY * pow(err, -ALPHA) * pow(err_old, BETA)
                    if fac > FAC_MAX:
                        fac = FAC_MAX
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                if last_rejected and fac > 1.0:
                    fac = 1.0
                err_old = err if err > ERR_FLOOR else ERR_FLOOR
                last_rejected = False
                h = h * fac
                if h > hmax:
                    h = hmax
            else:
                rejected += 1
                last_rejected = True
                if err != err:
                    fac = FAC_MIN
                else:
                    fac = SAFETY * pow(err, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                h = h * fac

    if status == 3:
        free(buf_t)
        free(buf_y)
        raise MemoryError()

    nodes = np.empty(count, dtype=np.float64)
    states = np.empty((count, DIM), dtype=np.float64)
    cdef double[::1] nv = nodes
    cdef double[:, ::1] sv = states
    cdef Py_ssize_t j
    for j in range(count):
        nv[j] = buf_t[j]
        for i in range(DIM):
            sv[j, i] = buf_y[j * DIM + i]
    free(buf_t)
    free(buf_y)
    termination = ("reached_end", "step_underflow", "step_budget_exhausted")[status]
    return nodes, states, termination, rejected
