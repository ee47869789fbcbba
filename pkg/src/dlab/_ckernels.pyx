# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled mixture kernels. Mirrors ``dlab._pykernels`` exactly in contract."""

import numpy as np

from libc.math cimport exp, log, INFINITY

cdef double LOG_2PI = 1.8378770664093453


def mixture_eval(const double[:, ::1] x, const double[:, ::1] means,
                 const double[:, ::1] variances, const double[::1] weights):
    """Return ``(log_density, responsibilities, score)`` for rows of ``x``."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], K = means.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, mx, lse, r

    logp_arr = np.empty(n)
    resp_arr = np.empty((n, K))
    score_arr = np.zeros((n, d))
    cdef double[::1] logp = logp_arr
    cdef double[:, ::1] resp = resp_arr
    cdef double[:, ::1] score = score_arr

    inv_arr = np.empty((K, d))
    cdef double[:, ::1] inv = inv_arr
    norm_arr = np.empty(K)
    cdef double[::1] norm = norm_arr
    for k in range(K):
        acc = log(weights[k])
        for j in range(d):
            inv[k, j] = 1.0 / variances[k, j]
            acc -= 0.5 * (LOG_2PI + log(variances[k, j]))
        norm[k] = acc

    with nogil:
        for i in range(n):
            mx = -INFINITY
            for k in range(K):
                acc = 0.0
                for j in range(d):
                    diff = x[i, j] - means[k, j]
                    acc += diff * diff * inv[k, j]
                acc = norm[k] - 0.5 * acc
                resp[i, k] = acc
                if acc > mx:
                    mx = acc
            lse = 0.0
            for k in range(K):
                lse += exp(resp[i, k] - mx)
            lse = mx + log(lse)
            logp[i] = lse
            for k in range(K):
                r = exp(resp[i, k] - lse)
                resp[i, k] = r
                for j in range(d):
                    score[i, j] += r * (means[k, j] - x[i, j]) * inv[k, j]
    return logp_arr, resp_arr, score_arr


def softmax_affine_grad(const double[:, ::1] x, const double[:, ::1] W,
                        const double[::1] b, Py_ssize_t label):
    """Gradient of ``log softmax(W x + b)[label]`` for rows of ``x``."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], K = W.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double mx, tot, acc

    out_arr = np.empty((n, d))
    cdef double[:, ::1] out = out_arr
    logit_arr = np.empty(K)
    cdef double[::1] logit = logit_arr

    with nogil:
        for i in range(n):
            mx = -INFINITY
            for k in range(K):
                acc = b[k]
                for j in range(d):
                    acc += W[k, j] * x[i, j]
                logit[k] = acc
                if acc > mx:
                    mx = acc
            tot = 0.0
            for k in range(K):
                logit[k] = exp(logit[k] - mx)
                tot += logit[k]
            for j in range(d):
                acc = W[label, j]
                for k in range(K):
                    acc -= (logit[k] / tot) * W[k, j]
                out[i, j] = acc
    return out_arr
