# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled integration kernel.

Scalar per-path loop mirroring esdm._kernels.numpy_backend expression
for expression; compiled with -ffp-contract=off so the arithmetic-only
policies (none, projection) are bit-identical to the numpy backend.
The log-domain policy uses libm exp/log and may differ from numpy's
vectorized transcendentals by a few ulps.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, log

from esdm.errors import BlowUpError

cnp.import_array()

SCHEME_EM = 0
SCHEME_MILSTEIN = 1

POLICY_NONE = 0
POLICY_PROJECTION = 1
POLICY_LOG = 2

cdef double BLOWUP_LIMIT = 1e12
cdef double RATIO_CLAMP = 1e6


def integrate_paths(x0, params_vec, sigma, double dt, increments,
                    int scheme, int policy, double eps, bint record,
                    long path_offset=0):
    """Same contract as esdm._kernels.numpy_backend.integrate_paths."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] inc = np.ascontiguousarray(
        increments, dtype=np.float64)
    cdef Py_ssize_t n_paths = inc.shape[0]
    cdef Py_ssize_t n_steps = inc.shape[1]

    x0 = np.asarray(x0, dtype=np.float64)
    params_vec = np.asarray(params_vec, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)

    cdef double a1 = params_vec[0], w_cap = params_vec[1], a2 = params_vec[2]
    cdef double d3 = params_vec[3], z1 = params_vec[4], z2 = params_vec[5]
    cdef double z3 = params_vec[6], n_cap = params_vec[7], s1 = params_vec[8]
    cdef double s2 = params_vec[9], s3 = params_vec[10], d1 = params_vec[11]
    cdef double d2 = params_vec[12]
    cdef double g1 = sigma[0], g2 = sigma[1], g3 = sigma[2], g4 = sigma[3]
    cdef double x01 = x0[0], x02 = x0[1], x03 = x0[2], x04 = x0[3]

    cdef cnp.ndarray[cnp.int64_t, ndim=1] clamp_totals = np.zeros(
        n_paths, dtype=np.int64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] clamp_steps = None
    cdef cnp.ndarray[cnp.float64_t, ndim=3] traj = None
    cdef cnp.ndarray[cnp.float64_t, ndim=2] term = None
    if record:
        traj = np.empty((n_paths, n_steps + 1, 4))
        clamp_steps = np.zeros((n_paths, n_steps), dtype=np.int32)
    else:
        term = np.empty((n_paths, 4))

    cdef Py_ssize_t k, n
    cdef double x1, x2, x3, x4, y1, y2, y3, y4
    cdef double f1, f2, f3, f4, r1, r2, r3, r4
    cdef double p1, p2, p3, p4, b1, b2, b3, b4
    cdef long total, step_count
    cdef bint log_mode = policy == POLICY_LOG
    cdef bint milstein = scheme == SCHEME_MILSTEIN

    for k in range(n_paths):
        x1 = x01
        x2 = x02
        x3 = x03
        x4 = x04
        y1 = y2 = y3 = y4 = 0.0
        if log_mode:
            y1 = log(x1)
            y2 = log(x2)
            y3 = log(x3)
            y4 = log(x4)
        total = 0
        if record:
            traj[k, 0, 0] = x1
            traj[k, 0, 1] = x2
            traj[k, 0, 2] = x3
            traj[k, 0, 3] = x4

        for n in range(n_steps):
            b1 = inc[k, n, 0]
            b2 = inc[k, n, 1]
            b3 = inc[k, n, 2]
            b4 = inc[k, n, 3]

            f1 = a1 * x1 * (1.0 - x1 / w_cap) - a2 * x2 * (x2 + x3) - d3 * x4
            f2 = -z1 * x2 - z2 * x3 + z3 * x1 * (n_cap - (x1 - x3))
            f3 = s1 * x3 * (s2 * x1 - s3)
            f4 = d1 * x1 - d2 * x4

            if log_mode:
                r1 = f1 / x1
                r2 = f2 / x2
                r3 = f3 / x3
                r4 = f4 / x4
                if r1 > RATIO_CLAMP: r1 = RATIO_CLAMP
                elif r1 < -RATIO_CLAMP: r1 = -RATIO_CLAMP
                if r2 > RATIO_CLAMP: r2 = RATIO_CLAMP
                elif r2 < -RATIO_CLAMP: r2 = -RATIO_CLAMP
                if r3 > RATIO_CLAMP: r3 = RATIO_CLAMP
                elif r3 < -RATIO_CLAMP: r3 = -RATIO_CLAMP
                if r4 > RATIO_CLAMP: r4 = RATIO_CLAMP
                elif r4 < -RATIO_CLAMP: r4 = -RATIO_CLAMP
                y1 = y1 + (r1 - 0.5 * g1 * g1) * dt + g1 * b1
                y2 = y2 + (r2 - 0.5 * g2 * g2) * dt + g2 * b2
                y3 = y3 + (r3 - 0.5 * g3 * g3) * dt + g3 * b3
                y4 = y4 + (r4 - 0.5 * g4 * g4) * dt + g4 * b4
                p1 = exp(y1)
                p2 = exp(y2)
                p3 = exp(y3)
                p4 = exp(y4)
            else:
                p1 = x1 + f1 * dt + g1 * x1 * b1
                p2 = x2 + f2 * dt + g2 * x2 * b2
                p3 = x3 + f3 * dt + g3 * x3 * b3
                p4 = x4 + f4 * dt + g4 * x4 * b4
                if milstein:
                    p1 = p1 + 0.5 * g1 * g1 * x1 * (b1 * b1 - dt)
                    p2 = p2 + 0.5 * g2 * g2 * x2 * (b2 * b2 - dt)
                    p3 = p3 + 0.5 * g3 * g3 * x3 * (b3 * b3 - dt)
                    p4 = p4 + 0.5 * g4 * g4 * x4 * (b4 * b4 - dt)

            if (not isfinite(p1) or not isfinite(p2)
                    or not isfinite(p3) or not isfinite(p4)
                    or fabs(p1) > BLOWUP_LIMIT or fabs(p2) > BLOWUP_LIMIT
                    or fabs(p3) > BLOWUP_LIMIT or fabs(p4) > BLOWUP_LIMIT):
                raise BlowUpError(step=n, path=path_offset + k)

            if policy == POLICY_PROJECTION:
                step_count = 0
                if p1 < eps:
                    p1 = eps
                    step_count += 1
                if p2 < eps:
                    p2 = eps
                    step_count += 1
                if p3 < eps:
                    p3 = eps
                    step_count += 1
                if p4 < eps:
                    p4 = eps
                    step_count += 1
                total += step_count
                if record:
                    clamp_steps[k, n] = <cnp.int32_t>step_count

            x1 = p1
            x2 = p2
            x3 = p3
            x4 = p4
            if record:
                traj[k, n + 1, 0] = x1
                traj[k, n + 1, 1] = x2
                traj[k, n + 1, 2] = x3
                traj[k, n + 1, 3] = x4

        clamp_totals[k] = total
        if not record:
            term[k, 0] = x1
            term[k, 1] = x2
            term[k, 2] = x3
            term[k, 3] = x4

    if record:
        return traj, clamp_totals, clamp_steps
    return term, clamp_totals, None
