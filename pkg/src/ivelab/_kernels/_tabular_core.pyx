# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SGD + Adam loops for tabular model and value learning.

Mirrors ``_tabular_py`` step for step; parameters and Adam moments are
updated in place.
"""

from libc.math cimport exp, sqrt
from libc.string cimport memset

import numpy as np


cdef inline void _adam(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                       double lr, double b1, double b2, double eps,
                       double bc1, double bc2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gi
    for i in range(p.shape[0]):
        gi = g[i]
        if gi == 0.0 and m[i] == 0.0 and v[i] == 0.0:
            # untouched entry: the update is exactly zero
            continue
        m[i] = b1 * m[i] + (1.0 - b1) * gi
        v[i] = b2 * v[i] + (1.0 - b2) * (gi * gi)
        p[i] = p[i] - lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + eps)


def mle_steps(double[:, ::1] logits, double[::1] reward,
              double[:, ::1] m_logits, double[:, ::1] v_logits,
              double[::1] m_reward, double[::1] v_reward,
              const long[::1] sa, const double[::1] r, const long[::1] s_next,
              const long[:, ::1] batches, long step,
              double lr, double b1, double b2, double eps):
    """Run one Adam step per row of ``batches``; returns the new step count."""
    cdef Py_ssize_t n_rows = logits.shape[0], n_next = logits.shape[1]
    cdef Py_ssize_t n_steps = batches.shape[0], batch = batches.shape[1]
    cdef Py_ssize_t t, b, j, row, idx, nxt
    cdef double mx, total, d, inv_b = 1.0 / batch
    cdef double bc1, bc2
    g_logits_arr = np.zeros((n_rows, n_next))
    g_reward_arr = np.zeros(n_rows)
    # softmax rows cached per step; stamp records the step that filled each row
    probs_arr = np.empty((n_rows, n_next))
    stamp_arr = np.full(n_rows, -1, dtype=np.int64)
    cdef double[:, ::1] g_logits = g_logits_arr
    cdef double[::1] g_reward = g_reward_arr
    cdef double[:, ::1] probs = probs_arr
    cdef long[::1] stamp = stamp_arr
    cdef double[::1] flat_p = np.asarray(logits).reshape(-1)
    cdef double[::1] flat_g = g_logits_arr.reshape(-1)
    cdef double[::1] flat_m = np.asarray(m_logits).reshape(-1)
    cdef double[::1] flat_v = np.asarray(v_logits).reshape(-1)
    with nogil:
        for t in range(n_steps):
            memset(&g_logits[0, 0], 0, n_rows * n_next * sizeof(double))
            memset(&g_reward[0], 0, n_rows * sizeof(double))
            for b in range(batch):
                idx = batches[t, b]
                row = sa[idx]
                if stamp[row] != step + 1:
                    stamp[row] = step + 1
                    mx = logits[row, 0]
                    for j in range(1, n_next):
                        if logits[row, j] > mx:
                            mx = logits[row, j]
                    total = 0.0
                    for j in range(n_next):
                        probs[row, j] = exp(logits[row, j] - mx)
                        total = total + probs[row, j]
                    for j in range(n_next):
                        probs[row, j] = probs[row, j] / total
                nxt = s_next[idx]
                for j in range(n_next):
                    d = probs[row, j]
                    if j == nxt:
                        d = d - 1.0
                    g_logits[row, j] += d * inv_b
                g_reward[row] += 2.0 * (reward[row] - r[idx]) * inv_b
            step = step + 1
            bc1 = 1.0 - b1 ** step
            bc2 = 1.0 - b2 ** step
            _adam(flat_p, flat_g, flat_m, flat_v, lr, b1, b2, eps, bc1, bc2)
            _adam(reward, g_reward, m_reward, v_reward, lr, b1, b2, eps, bc1, bc2)
    return step


def sarsa_steps(double[::1] q, double[::1] m_q, double[::1] v_q,
                const double[:, ::1] policy, double gamma,
                const long[::1] sa, const double[::1] r, const long[::1] s_next,
                const long[:, ::1] batches, long step,
                double lr, double b1, double b2, double eps):
    """Semi-gradient expected-SARSA steps on a flat ``q[s * A + a]`` table."""
    cdef Py_ssize_t n_actions = policy.shape[1]
    cdef Py_ssize_t n_steps = batches.shape[0], batch = batches.shape[1]
    cdef Py_ssize_t t, b, a2, idx, row, nxt
    cdef double target, inv_b = 1.0 / batch
    cdef double bc1, bc2
    g_arr = np.zeros(q.shape[0])
    targets_arr = np.empty(batch)
    cdef double[::1] g = g_arr
    cdef double[::1] targets = targets_arr
    with nogil:
        for t in range(n_steps):
            memset(&g[0], 0, q.shape[0] * sizeof(double))
            # targets read q before any update in this step
            for b in range(batch):
                idx = batches[t, b]
                nxt = s_next[idx]
                target = 0.0
                for a2 in range(n_actions):
                    target = target + policy[nxt, a2] * q[nxt * n_actions + a2]
                targets[b] = r[idx] + gamma * target
            for b in range(batch):
                row = sa[batches[t, b]]
                g[row] += 2.0 * (q[row] - targets[b]) * inv_b
            step = step + 1
            bc1 = 1.0 - b1 ** step
            bc2 = 1.0 - b2 ** step
            _adam(q, g, m_q, v_q, lr, b1, b2, eps, bc1, bc2)
    return step
