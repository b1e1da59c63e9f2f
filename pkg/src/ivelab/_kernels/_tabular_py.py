"""Pure numpy fallback for the tabular training loops in ``_tabular_core``."""

import numpy as np


def _adam(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def mle_steps(logits, reward, m_logits, v_logits, m_reward, v_reward,
              sa, r, s_next, batches, step, lr, b1, b2, eps):
    n_rows, n_next = logits.shape
    inv_b = 1.0 / batches.shape[1]
    for idx in batches:
        rows = sa[idx]
        nxt = s_next[idx]
        shifted = logits[rows] - logits[rows].max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        # cumsum keeps the left-to-right summation order of the compiled kernel
        total = np.cumsum(probs, axis=1)[:, -1:]
        d = probs / total
        d[np.arange(len(idx)), nxt] -= 1.0
        g_logits = np.zeros((n_rows, n_next))
        np.add.at(g_logits, rows, d * inv_b)
        g_reward = np.zeros(n_rows)
        np.add.at(g_reward, rows, 2.0 * (reward[rows] - r[idx]) * inv_b)
        step += 1
        bc1 = 1.0 - b1 ** step
        bc2 = 1.0 - b2 ** step
        _adam(logits, g_logits, m_logits, v_logits, lr, b1, b2, eps, bc1, bc2)
        _adam(reward, g_reward, m_reward, v_reward, lr, b1, b2, eps, bc1, bc2)
    return step


def sarsa_steps(q, m_q, v_q, policy, gamma, sa, r, s_next, batches, step,
                lr, b1, b2, eps):
    n_actions = policy.shape[1]
    q_table = q.reshape(-1, n_actions)
    inv_b = 1.0 / batches.shape[1]
    for idx in batches:
        nxt = s_next[idx]
        targets = r[idx] + gamma * np.sum(policy[nxt] * q_table[nxt], axis=1)
        rows = sa[idx]
        g = np.zeros(q.shape[0])
        np.add.at(g, rows, 2.0 * (q[rows] - targets) * inv_b)
        step += 1
        bc1 = 1.0 - b1 ** step
        bc2 = 1.0 - b2 ** step
        _adam(q, g, m_q, v_q, lr, b1, b2, eps, bc1, bc2)
    return step
