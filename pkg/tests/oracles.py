"""Independent reference computations used by the unit and acceptance tests."""

import numpy as np


def linear_kf_step(mean, cov, u, y, Q, R, T):
    """Exact Kalman predict + update for the augmented model with frozen parameters.

    With (alpha, beta, tau) held fixed the Euler step is affine in (p, v), so
    the textbook linear filter is exact.
    """
    a, b, tau = mean[2:]
    F = np.eye(5)
    F[0, 1] = -T
    F[1, 0] = a * T
    F[1, 1] = 1.0 - T * (a * tau + b)
    g = np.zeros(5)
    g[0] = T * u
    g[1] = T * b * u
    m = F @ mean + g
    P = F @ cov @ F.T + Q
    H = np.zeros((2, 5))
    H[0, 0] = H[1, 1] = 1.0
    S = H @ P @ H.T + R
    K = P @ H.T @ np.linalg.inv(S)
    return m + K @ (y - H @ m), P - K @ S @ K.T


def random_frozen_belief(rng):
    """Belief over [p, v, alpha, beta, tau] with a zero parameter block, plus matching Q and R."""
    mean = np.array([rng.uniform(10, 60), rng.uniform(5, 35), rng.uniform(0.05, 0.5),
                     rng.uniform(0.05, 0.5), rng.uniform(0.5, 2.5)])
    A = rng.normal(size=(2, 2))
    cov = np.zeros((5, 5))
    cov[:2, :2] = A @ A.T + 0.1 * np.eye(2)
    Q = np.zeros((5, 5))
    Q[:2, :2] = np.diag(rng.uniform(1e-6, 1e-2, 2))
    B = rng.normal(size=(2, 2))
    R = B @ B.T + 0.05 * np.eye(2)
    u = rng.uniform(5, 35)
    y = mean[:2] + rng.normal(size=2)
    return mean, cov, Q, R, u, y


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    A = rng.normal(size=(n, rank))
    return A @ A.T
