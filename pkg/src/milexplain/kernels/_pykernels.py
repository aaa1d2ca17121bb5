"""NumPy reference kernels.

These are the fallback implementations of the hot loops: the LSTM recurrence
(forward and backpropagation through time) and the linear-chain CRF dynamic
programs. The compiled module ``_ckernels`` exposes the same functions with
the same signatures.
"""
import numpy as np


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm_forward(x, W, U, b):
    """Run an LSTM over ``x`` (T x D) from a zero state.

    Gate layout inside the 4H rows of ``W``/``U``/``b`` is input, forget,
    candidate, output. Returns ``(h, c, gates)`` where ``gates`` holds the
    post-activation gate values (T x 4H).
    """
    T = x.shape[0]
    H = U.shape[1]
    pre = x @ W.T + b
    h = np.zeros((T, H))
    c = np.zeros((T, H))
    gates = np.empty((T, 4 * H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        z = pre[t] + U @ h_prev
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid(z[3 * H:])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        c[t] = c_prev
        h[t] = h_prev
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = g
        gates[t, 3 * H:] = o
    return h, c, gates


def lstm_backward(dh, x, W, U, h, c, gates):
    """Backpropagate ``dh`` (T x H) through the recurrence.

    Returns ``(dx, dW, dU, db)``.
    """
    T, H = dh.shape
    dz = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tc = np.tanh(c[t])
        c_prev = c[t - 1] if t > 0 else np.zeros(H)
        dht = dh[t] + dh_next
        dc = dht * o * (1.0 - tc * tc) + dc_next
        dz[t, :H] = dc * g * i * (1.0 - i)
        dz[t, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[t, 3 * H:] = dht * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = U.T @ dz[t]
    h_prev = np.vstack([np.zeros((1, H)), h[:-1]])
    dW = dz.T @ x
    dU = dz.T @ h_prev
    db = dz.sum(axis=0)
    dx = dz @ W
    return dx, dW, dU, db


def _logsumexp(v, axis=None):
    m = np.max(v, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


def crf_forward_backward(em, trans, start, stop):
    """Log-partition plus the marginals needed for its gradient.

    Returns ``(log_z, unary, pairwise)``: ``unary[t, k]`` is P(y_t = k) and
    ``pairwise[j, k]`` is the expected number of j -> k transitions.
    """
    T, K = em.shape
    alpha = np.empty((T, K))
    beta = np.empty((T, K))
    alpha[0] = start + em[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + em[t]
    log_z = _logsumexp(alpha[T - 1] + stop)
    beta[T - 1] = stop
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.zeros((K, K))
    for t in range(1, T):
        pairwise += np.exp(alpha[t - 1][:, None] + trans
                           + (em[t] + beta[t])[None, :] - log_z)
    return log_z, unary, pairwise


def crf_log_partition(em, trans, start, stop):
    T = em.shape[0]
    alpha = start + em[0]
    for t in range(1, T):
        alpha = _logsumexp(alpha[:, None] + trans, axis=0) + em[t]
    return _logsumexp(alpha + stop)


def viterbi(em, trans, start, stop):
    """Best tag path and its score; ties resolve to the lower tag index."""
    T, K = em.shape
    back = np.zeros((T, K), dtype=np.int64)
    delta = start + em[0]
    for t in range(1, T):
        cand = delta[:, None] + trans
        # np.argmax returns the first maximum, which is the lower tag
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + em[t]
    final = delta + stop
    best = int(np.argmax(final))
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = best
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(final[best])
