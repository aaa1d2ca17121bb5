# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: LSTM recurrence and linear-chain CRF dynamic programs.

Signatures and return values mirror ``_pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    return 0.5 * (tanh(0.5 * z) + 1.0)


cdef inline double _lse2(double a, double b) nogil:
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


def lstm_forward(double[:, ::1] x, double[:, ::1] W, double[:, ::1] U,
                 double[::1] b):
    cdef Py_ssize_t T = x.shape[0], D = x.shape[1], H = U.shape[1]
    cdef Py_ssize_t t, r, k
    cdef double acc, i, f, g, o, cp
    h_arr = np.zeros((T, H))
    c_arr = np.zeros((T, H))
    g_arr = np.empty((T, 4 * H))
    z_arr = np.empty(4 * H)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[::1] z = z_arr
    with nogil:
        for t in range(T):
            for r in range(4 * H):
                acc = b[r]
                for k in range(D):
                    acc = acc + W[r, k] * x[t, k]
                if t > 0:
                    for k in range(H):
                        acc = acc + U[r, k] * h[t - 1, k]
                z[r] = acc
            for k in range(H):
                i = _sigmoid(z[k])
                f = _sigmoid(z[H + k])
                g = tanh(z[2 * H + k])
                o = _sigmoid(z[3 * H + k])
                cp = c[t - 1, k] if t > 0 else 0.0
                c[t, k] = f * cp + i * g
                h[t, k] = o * tanh(c[t, k])
                gates[t, k] = i
                gates[t, H + k] = f
                gates[t, 2 * H + k] = g
                gates[t, 3 * H + k] = o
    return h_arr, c_arr, g_arr


def lstm_backward(double[:, ::1] dh, double[:, ::1] x, double[:, ::1] W,
                  double[:, ::1] U, double[:, ::1] h, double[:, ::1] c,
                  double[:, ::1] gates):
    cdef Py_ssize_t T = dh.shape[0], H = dh.shape[1], D = x.shape[1]
    cdef Py_ssize_t t, r, k
    cdef double i, f, g, o, tc, cp, dht, dc, acc
    dx_arr = np.zeros((T, D))
    dW_arr = np.zeros((4 * H, D))
    dU_arr = np.zeros((4 * H, H))
    db_arr = np.zeros(4 * H)
    dz_arr = np.empty(4 * H)
    dhn_arr = np.zeros(H)
    dcn_arr = np.zeros(H)
    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[:, ::1] dU = dU_arr
    cdef double[::1] db = db_arr
    cdef double[::1] dz = dz_arr
    cdef double[::1] dh_next = dhn_arr
    cdef double[::1] dc_next = dcn_arr
    with nogil:
        for t in range(T - 1, -1, -1):
            for k in range(H):
                i = gates[t, k]
                f = gates[t, H + k]
                g = gates[t, 2 * H + k]
                o = gates[t, 3 * H + k]
                tc = tanh(c[t, k])
                cp = c[t - 1, k] if t > 0 else 0.0
                dht = dh[t, k] + dh_next[k]
                dc = dht * o * (1.0 - tc * tc) + dc_next[k]
                dz[k] = dc * g * i * (1.0 - i)
                dz[H + k] = dc * cp * f * (1.0 - f)
                dz[2 * H + k] = dc * i * (1.0 - g * g)
                dz[3 * H + k] = dht * tc * o * (1.0 - o)
                dc_next[k] = dc * f
            for r in range(4 * H):
                db[r] += dz[r]
                for k in range(D):
                    dW[r, k] += dz[r] * x[t, k]
                if t > 0:
                    for k in range(H):
                        dU[r, k] += dz[r] * h[t - 1, k]
            for k in range(D):
                acc = 0.0
                for r in range(4 * H):
                    acc = acc + dz[r] * W[r, k]
                dx[t, k] = acc
            for k in range(H):
                acc = 0.0
                for r in range(4 * H):
                    acc = acc + dz[r] * U[r, k]
                dh_next[k] = acc
    return dx_arr, dW_arr, dU_arr, db_arr


cdef double _lse_row(double[:] v, Py_ssize_t n) nogil:
    cdef double m = v[0], s = 0.0
    cdef Py_ssize_t k
    for k in range(1, n):
        if v[k] > m:
            m = v[k]
    for k in range(n):
        s = s + exp(v[k] - m)
    return m + log(s)


def crf_forward_backward(double[:, ::1] em, double[:, ::1] trans,
                         double[::1] start, double[::1] stop):
    cdef Py_ssize_t T = em.shape[0], K = em.shape[1], t, j, k
    cdef double log_z, m, s, v
    alpha_arr = np.empty((T, K))
    beta_arr = np.empty((T, K))
    unary_arr = np.empty((T, K))
    pair_arr = np.zeros((K, K))
    buf_arr = np.empty(K)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] unary = unary_arr
    cdef double[:, ::1] pair = pair_arr
    cdef double[::1] buf = buf_arr
    with nogil:
        for k in range(K):
            alpha[0, k] = start[k] + em[0, k]
        for t in range(1, T):
            for k in range(K):
                for j in range(K):
                    buf[j] = alpha[t - 1, j] + trans[j, k]
                alpha[t, k] = _lse_row(buf, K) + em[t, k]
        for k in range(K):
            buf[k] = alpha[T - 1, k] + stop[k]
        log_z = _lse_row(buf, K)
        for k in range(K):
            beta[T - 1, k] = stop[k]
        for t in range(T - 2, -1, -1):
            for j in range(K):
                for k in range(K):
                    buf[k] = trans[j, k] + em[t + 1, k] + beta[t + 1, k]
                beta[t, j] = _lse_row(buf, K)
        for t in range(T):
            for k in range(K):
                unary[t, k] = exp(alpha[t, k] + beta[t, k] - log_z)
        for t in range(1, T):
            for j in range(K):
                for k in range(K):
                    pair[j, k] += exp(alpha[t - 1, j] + trans[j, k] + em[t, k]
                                      + beta[t, k] - log_z)
    return log_z, unary_arr, pair_arr


def crf_log_partition(double[:, ::1] em, double[:, ::1] trans,
                      double[::1] start, double[::1] stop):
    cdef Py_ssize_t T = em.shape[0], K = em.shape[1], t, j, k
    cur_arr = np.empty(K)
    nxt_arr = np.empty(K)
    buf_arr = np.empty(K)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] buf = buf_arr
    cdef double out
    with nogil:
        for k in range(K):
            cur[k] = start[k] + em[0, k]
        for t in range(1, T):
            for k in range(K):
                for j in range(K):
                    buf[j] = cur[j] + trans[j, k]
                nxt[k] = _lse_row(buf, K) + em[t, k]
            for k in range(K):
                cur[k] = nxt[k]
        for k in range(K):
            buf[k] = cur[k] + stop[k]
        out = _lse_row(buf, K)
    return out


def viterbi(double[:, ::1] em, double[:, ::1] trans, double[::1] start,
            double[::1] stop):
    cdef Py_ssize_t T = em.shape[0], K = em.shape[1], t, j, k, arg
    cdef double best, v
    back_arr = np.zeros((T, K), dtype=np.int64)
    path_arr = np.empty(T, dtype=np.int64)
    cur_arr = np.empty(K)
    nxt_arr = np.empty(K)
    cdef long long[:, ::1] back = back_arr
    cdef long long[::1] path = path_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    with nogil:
        for k in range(K):
            cur[k] = start[k] + em[0, k]
        for t in range(1, T):
            for k in range(K):
                arg = 0
                best = cur[0] + trans[0, k]
                for j in range(1, K):
                    v = cur[j] + trans[j, k]
                    if v > best:
                        best = v
                        arg = j
                back[t, k] = arg
                nxt[k] = best + em[t, k]
            for k in range(K):
                cur[k] = nxt[k]
        arg = 0
        best = cur[0] + stop[0]
        for k in range(1, K):
            v = cur[k] + stop[k]
            if v > best:
                best = v
                arg = k
        path[T - 1] = arg
        for t in range(T - 1, 0, -1):
            path[t - 1] = back[t, path[t]]
    return path_arr, best
