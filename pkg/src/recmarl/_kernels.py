"""Compiled inner loops shared by samplers and learners."""

import numpy as np
from numba import njit


@njit(cache=True)
def _first_above(cdf, u):
    i = 0
    last = cdf.shape[0] - 1
    while i < last and u >= cdf[i]:
        i += 1
    return i


@njit(cache=True)
def sample_rows(cdfs, u):
    out = np.empty(cdfs.shape[0], dtype=np.int64)
    for n in range(cdfs.shape[0]):
        out[n] = _first_above(cdfs[n], u[n])
    return out


@njit(cache=True)
def sample_chain(policy_cdf, kernel_cdf, s0, u_act, u_next):
    """Roll out independent local chains; returns states (H+1, N), actions (H, N)."""
    H, N = u_act.shape
    states = np.empty((H + 1, N), dtype=np.int64)
    actions = np.empty((H, N), dtype=np.int64)
    states[0] = s0
    for h in range(H):
        for n in range(N):
            s = states[h, n]
            a = _first_above(policy_cdf[n, s], u_act[h, n])
            actions[h, n] = a
            states[h + 1, n] = _first_above(kernel_cdf[n, s, a], u_next[h, n])
    return states, actions


@njit(cache=True)
def td_sweep(values, idx, rewards, alphas, gamma):
    """In-place TD(0) along one trajectory: idx has H+1 entries, rewards H."""
    for h in range(rewards.shape[0]):
        i = idx[h]
        values[i] = (1.0 - alphas[h]) * values[i] + alphas[h] * (rewards[h] + gamma * values[idx[h + 1]])
    return values
