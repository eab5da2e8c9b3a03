"""Unscented Kalman filter for joint state and parameter estimation.

The filtered state is the augmented vector ``[p, v, alpha, beta, tau]``;
parameters evolve as constants plus a small pseudo-noise taken from the
lower-right block of ``Q``. The same machinery (weights, sigma points,
unscented transform) is exposed for use on any dimension.

Weights follow the scaled unscented transform::

    lambda = a^2 (n + b) - n,   delta = sqrt(n + lambda)
    w_m[0] = lambda / (n + lambda)
    w_c[0] = w_m[0] + 1 - a^2 + eps
    w_m[i] = w_c[i] = 1 / (2 (n + lambda)),  i = 1..2n

With the default ``a = 1, b = 3 - n, eps = 0`` and ``n = 5`` the central
weight is negative, so every assembled covariance is conditioned (see
:func:`condition_covariance`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError, NumericalBreakdownError
from .model import ALPHA, BETA, MEAS_DIM, STATE_DIM, TAU, CthpParams, euler_forward
from .trajectory import Trajectory, mae, write_trace_csv

log = logging.getLogger(__name__)

JITTER_FACTOR = 10.0
JITTER_ESCALATIONS = 3


@dataclass(frozen=True)
class UtConfig:
    """Unscented-transform scaling: spread ``a``, secondary scaling ``b`` (None means ``3 - n``), prior constant ``eps``."""

    a: float = 1.0
    b: float | None = None
    eps: float = 0.0

    def __post_init__(self):
        if not 1e-4 <= self.a <= 1.0:
            raise InvalidConfigError(f"spread a must lie in [1e-4, 1], got {self.a}")

    def b_for(self, n: int) -> float:
        return 3.0 - n if self.b is None else self.b

    def lam(self, n: int) -> float:
        return self.a ** 2 * (n + self.b_for(n)) - n

    def delta(self, n: int) -> float:
        c = n + self.lam(n)
        if not c > 0:
            raise InvalidConfigError(f"n + lambda = {c} must be positive")
        return float(np.sqrt(c))


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray  # (2n+1, n)
    w_m: np.ndarray
    w_c: np.ndarray


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        n = mean.shape[0] if mean.ndim == 1 else -1
        if mean.ndim != 1 or cov.shape != (n, n):
            raise InvalidArgumentError(f"belief shapes mismatch: mean {mean.shape}, cov {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidArgumentError("belief contains NaN or Inf")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def _check_psd(name, M, strict=False):
    if not np.allclose(M, M.T, atol=1e-12, rtol=0):
        raise InvalidArgumentError(f"{name} must be symmetric")
    lmin = np.linalg.eigvalsh(M)[0] if M.size else 0.0
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if strict and not lmin > 0:
        raise InvalidArgumentError(f"{name} must be positive definite (min eigenvalue {lmin:g})")
    if lmin < -1e-12 * scale:
        raise InvalidArgumentError(f"{name} must be positive semidefinite (min eigenvalue {lmin:g})")


@dataclass(frozen=True)
class NoiseConfig:
    """Process covariance ``Q`` (n x n, parameter pseudo-noise in its lower-right block) and measurement covariance ``R``."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        R = np.atleast_2d(np.array(self.R, dtype=float))
        _check_psd("Q", Q)
        _check_psd("R", R, strict=True)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def reference(cls) -> "NoiseConfig":
        return cls(np.diag(PAPER_Q_DIAG), np.diag(PAPER_R_DIAG))


PAPER_Q_DIAG = (2.0e-5, 5.0e-6, 1.0e-6, 1.0e-6, 1.0e-6)
PAPER_R_DIAG = (0.8, 0.2)
PAPER_INITIAL_MEAN = (35.0, 25.0, 0.08, 0.12, 1.5)
PAPER_TRUE_INITIAL = (40.0, 30.0, 0.1, 0.2, 1.2)


def reference_initial_belief() -> GaussianBelief:
    return GaussianBelief(np.array(PAPER_INITIAL_MEAN), np.eye(STATE_DIM))


def ut_weights(n: int, cfg: UtConfig = UtConfig()) -> tuple[np.ndarray, np.ndarray]:
    lam = cfg.lam(n)
    c = n + lam
    if not c > 0:
        raise InvalidConfigError(f"n + lambda = {c} must be positive (n={n}, lambda={lam})")
    w_m = np.full(2 * n + 1, 1.0 / (2.0 * c))
    w_c = w_m.copy()
    w_m[0] = lam / c
    w_c[0] = lam / c + 1.0 - cfg.a ** 2 + cfg.eps
    return w_m, w_c


# -- covariance conditioning ---------------------------------------------------

def condition_covariance(P: np.ndarray) -> np.ndarray:
    """Symmetrize and, if needed, lift ``P`` to positive semidefinite.

    When the smallest eigenvalue is negative, ``10 |lambda_min| I`` is added;
    the jitter is escalated by 10x up to three more times before giving up
    with :class:`NumericalBreakdownError`.
    """
    if not np.all(np.isfinite(P)):
        raise NumericalBreakdownError("covariance contains NaN or Inf", matrix=P)
    P = 0.5 * P + 0.5 * P.T
    eig = np.linalg.eigvalsh(P)
    # eigenvalues within rounding of zero count as zero
    floor = P.shape[0] * np.finfo(float).eps * max(abs(eig[0]), abs(eig[-1]))
    lmin = eig[0]
    if lmin >= -floor:
        return P
    jitter = JITTER_FACTOR * max(abs(lmin), floor)
    eye = np.eye(P.shape[0])
    for _ in range(JITTER_ESCALATIONS + 1):
        Pj = P + jitter * eye
        if np.linalg.eigvalsh(Pj)[0] >= 0:
            return Pj
        jitter *= JITTER_FACTOR
    raise NumericalBreakdownError("covariance not positive semidefinite after jitter", matrix=P)


def _semidefinite_cholesky(A: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = A for PSD A, allowing zero pivots."""
    n = A.shape[0]
    L = np.zeros_like(A)
    tol = n * np.finfo(float).eps * max(float(np.max(np.diag(A))), 0.0)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        col = A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]
        if d > tol:
            L[j, j] = np.sqrt(d)
            L[j + 1:, j] = col / L[j, j]
        elif d >= -tol and np.all(np.abs(col) <= np.sqrt(max(tol, 0.0)) * 10 + tol):
            continue
        else:
            raise np.linalg.LinAlgError("matrix is not positive semidefinite")
    return L


def matrix_sqrt(P: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix, with zero-pivot and jitter fallbacks."""
    if not np.all(np.isfinite(P)):
        raise NumericalBreakdownError("cannot factorize a matrix containing NaN or Inf", matrix=P)
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    try:
        return _semidefinite_cholesky(P)
    except np.linalg.LinAlgError:
        pass
    lmin = np.linalg.eigvalsh(0.5 * P + 0.5 * P.T)[0]
    jitter = JITTER_FACTOR * max(abs(lmin), np.finfo(float).eps * max(np.trace(P), 1.0))
    eye = np.eye(P.shape[0])
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            return np.linalg.cholesky(P + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= JITTER_FACTOR
    raise NumericalBreakdownError("Cholesky factorization failed after jitter escalation", matrix=P)


def _sigma_points(mean, L, delta):
    offsets = delta * L.T  # row i is delta times column i of L
    return np.vstack([mean, mean + offsets, mean - offsets])


def generate_sigma_points(mean, spread_source, cfg: UtConfig = UtConfig()) -> SigmaSet:
    """Sigma points ``mean, mean +/- delta * L[:, i]`` where ``spread_source = L L^T``."""
    mean = np.asarray(mean, dtype=float)
    S = np.asarray(spread_source, dtype=float)
    n = mean.shape[0]
    if S.shape != (n, n):
        raise InvalidArgumentError(f"spread source shape {S.shape} does not match mean length {n}")
    w_m, w_c = ut_weights(n, cfg)
    pts = _sigma_points(mean, matrix_sqrt(S), cfg.delta(n))
    return SigmaSet(pts, w_m, w_c)


def unscented_moments(points, w_m, w_c):
    """Weighted mean and covariance of a (transformed) sigma set."""
    mean = w_m @ points
    d = points - mean
    return mean, (d.T * w_c) @ d


# -- filter steps ----------------------------------------------------------------
# The array-level helpers below are the hot path of run_dukf; the public
# predict/update wrap them with validation and dataclasses.

def _propagate(points, u, T, d=0.0):
    out = points.copy()
    out[:, 0], out[:, 1] = euler_forward(points[:, 0], points[:, 1], points[:, ALPHA],
                                         points[:, BETA], points[:, TAU], u, d, T)
    return out


def _predict(mean, cov, u, Q, T, w_m, w_c, delta):
    X = _propagate(_sigma_points(mean, matrix_sqrt(cov), delta), u, T)
    m, P = unscented_moments(X, w_m, w_c)
    return m, condition_covariance(P + Q), X


def _update(mean, cov, y, Q, R, w_m, w_c, delta, redraw):
    source = cov if redraw else Q
    X = _sigma_points(mean, matrix_sqrt(source), delta)
    Y = X[:, :MEAS_DIM]
    y_hat = w_m @ Y
    dY = Y - y_hat
    dX = X - mean
    Py = (dY.T * w_c) @ dY + R
    Pxy = (dX.T * w_c) @ dY
    try:
        K = np.linalg.solve(Py, Pxy.T).T
    except np.linalg.LinAlgError:
        raise NumericalBreakdownError("innovation covariance is singular", matrix=Py) from None
    innov = y - y_hat
    new_mean = mean + K @ innov
    new_cov = condition_covariance(cov - K @ Pxy.T)
    return new_mean, new_cov, innov


def predict(belief: GaussianBelief, u, noise: NoiseConfig, cfg: UtConfig = UtConfig(),
            T: float = 0.1) -> tuple[GaussianBelief, SigmaSet]:
    """Time update through the Euler-discretized augmented model.

    ``u`` is the leader speed over the step (float or ``ControlInput``).
    Returns the predicted belief and the propagated sigma set.
    """
    n = belief.mean.shape[0]
    if n != STATE_DIM or noise.Q.shape != (n, n):
        raise InvalidArgumentError("predict expects a 5-dimensional augmented belief and 5x5 Q")
    if not T > 0:
        raise InvalidArgumentError(f"T must be > 0, got {T}")
    d = getattr(u, "d", 0.0)
    u = getattr(u, "u", u)
    w_m, w_c = ut_weights(n, cfg)
    X = _propagate(_sigma_points(belief.mean, matrix_sqrt(belief.cov), cfg.delta(n)), u, T, d)
    m, P = unscented_moments(X, w_m, w_c)
    return GaussianBelief(m, condition_covariance(P + noise.Q)), SigmaSet(X, w_m, w_c)


def update(predicted: GaussianBelief, y, noise: NoiseConfig, cfg: UtConfig = UtConfig(),
           redraw: bool = True) -> GaussianBelief:
    """Measurement update with ``y = (p, v)``.

    With ``redraw`` the sigma points are redrawn from the predicted
    covariance; otherwise they are spread by the square root of ``Q``
    around the predicted mean.
    """
    y = np.asarray(y, dtype=float)
    n = predicted.mean.shape[0]
    if y.shape != (MEAS_DIM,) or noise.R.shape != (MEAS_DIM, MEAS_DIM) or noise.Q.shape != (n, n):
        raise InvalidArgumentError("dimension mismatch between belief, measurement and noise")
    w_m, w_c = ut_weights(n, cfg)
    m, P, _ = _update(predicted.mean, predicted.cov, y, noise.Q, noise.R, w_m, w_c,
                      cfg.delta(n), redraw)
    return GaussianBelief(m, P)


@dataclass
class EstimateTrace:
    """Per-step filter output over a trajectory."""

    t: np.ndarray
    y_meas: np.ndarray  # (N, 2) measured (p, v)
    mean: np.ndarray  # (N, 5) filtered augmented state
    cov_diag: np.ndarray  # (N, 5)
    innovation: np.ndarray  # (N, 2)
    params: CthpParams
    mae_gap: float
    mae_velocity: float
    extras: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def to_csv(self, path) -> None:
        write_trace_csv(path, self.t, self.y_meas, self.mean, self.cov_diag)


def run_dukf(traj: Trajectory, init: GaussianBelief | None = None,
             noise: NoiseConfig | None = None, cfg: UtConfig = UtConfig(),
             redraw: bool = True) -> EstimateTrace:
    """Run the joint filter over ``traj``.

    Step 0 is a measurement update of ``init``; every later step predicts
    with the previous leader speed and then updates with the current
    ``(p, v)``. The final parameters are the parameter block of the last
    filtered mean.
    """
    init = reference_initial_belief() if init is None else init
    noise = NoiseConfig.reference() if noise is None else noise
    n = init.mean.shape[0]
    if n != STATE_DIM:
        raise InvalidArgumentError("run_dukf needs a 5-dimensional augmented initial belief")
    N = len(traj)
    w_m, w_c = ut_weights(n, cfg)
    delta = cfg.delta(n)
    Q, R, T = noise.Q, noise.R, traj.T
    y = traj.measurements()
    u = traj.u
    means = np.empty((N, n))
    var = np.empty((N, n))
    innov = np.empty((N, MEAS_DIM))
    m, P = init.mean.copy(), init.cov.copy()
    for k in range(N):
        try:
            if k > 0:
                m, P, _ = _predict(m, P, u[k - 1], Q, T, w_m, w_c, delta)
            m, P, innov[k] = _update(m, P, y[k], Q, R, w_m, w_c, delta, redraw)
        except NumericalBreakdownError as exc:
            exc.step = k
            raise
        if not np.all(np.isfinite(m)):
            raise NumericalBreakdownError("filter state became non-finite", matrix=P, step=k)
        means[k] = m
        var[k] = np.diag(P)
    params = CthpParams.from_array(means[-1, ALPHA:])
    return EstimateTrace(
        t=np.array(traj.t), y_meas=y, mean=means, cov_diag=var, innovation=innov,
        params=params,
        mae_gap=mae(means[:, 0], y[:, 0]),
        mae_velocity=mae(means[:, 1], y[:, 1]),
    )
