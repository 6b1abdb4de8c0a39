"""NumPy implementation of the decoupled IMC recurrence, vectorized across modes."""
import numpy as np


def modal_loop(d, n, r, sigma, gamma, p, l, delay):
    N, m = d.shape
    y = np.zeros((N, m))
    u = np.zeros((N, m))
    G = np.zeros((N, m))
    v = np.zeros(m)
    e_prev = np.zeros(m)
    K = (1.0 - l) / ((1.0 - p) * sigma)
    bp = 1.0 - p
    zero = np.zeros(m)
    for k in range(N):
        if k > 0:
            G[k] = p * G[k - 1] + bp * u[k - 1]
        gd = sigma * G[k - delay] if k >= delay else zero
        y[k] = gd + d[k]
        e = gamma * (y[k] + n[k] - r[k]) - gd
        v = l * v + K * (e - p * e_prev)
        e_prev = e
        u[k] = -v
    return y, u
