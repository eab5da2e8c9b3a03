"""Batch (ridge) and recursive least squares for the CTHP regression.

The discrete follower-speed update is linear in three coefficients,

    v[k+1] = x1 v[k] + x2 u[k] + x3 p[k]

so stacking ``kappa`` consecutive samples gives ``z = H x``. Batch
estimation minimizes ``1/2 |z - H x|^2_{R^-1} + 1/2 sigma |x|^2``; the
recursive form processes one row at a time using the matrix inversion
lemma, optionally with exponential weighting (``P`` divided by ``mu`` after
every step).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InsufficientDataError, InvalidArgumentError, RankDeficientError
from .model import CthpParams, LsCoeffs, params_from_ls_coeffs
from .trajectory import Trajectory, mae, write_trace_csv

BATCH = "batch"
RECURSIVE = "recursive"
RECURSIVE_EXP = "recursive-exp"
MODES = (BATCH, RECURSIVE, RECURSIVE_EXP)


@dataclass(frozen=True)
class Regression:
    H: np.ndarray  # (kappa, 3), rows [v_k, u_k, p_k]
    z: np.ndarray  # (kappa,), entries v_{k+1}

    def __post_init__(self):
        if self.H.ndim != 2 or self.H.shape[1] != 3 or self.H.shape[0] != self.z.shape[0]:
            raise InvalidArgumentError(f"inconsistent regression shapes H{self.H.shape}, z{self.z.shape}")


def build_regression(traj: Trajectory) -> Regression:
    if len(traj) < 4:
        raise InsufficientDataError(f"need at least 4 samples for 3 coefficients, got {len(traj)}")
    H = np.column_stack([traj.v[:-1], traj.u[:-1], traj.p[:-1]])
    return Regression(H, np.array(traj.v[1:]))


def _whiten(reg: Regression, R):
    """Return (W H, W z) with W^T W = R^-1; R may be None (identity), a vector (diagonal) or a matrix."""
    if R is None:
        return reg.H, reg.z
    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        if R.shape != reg.z.shape or np.any(R <= 0):
            raise InvalidArgumentError("diagonal weights must be positive, one per row")
        w = 1.0 / np.sqrt(R)
        return reg.H * w[:, None], reg.z * w
    if R.shape != (len(reg.z), len(reg.z)):
        raise InvalidArgumentError(f"weight matrix must be {len(reg.z)}x{len(reg.z)}")
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError("weight matrix R must be symmetric positive definite") from None
    # with R = L L^T, W = L^-1 satisfies W^T W = R^-1
    return solve_triangular(L, reg.H, lower=True), solve_triangular(L, reg.z, lower=True)


def ls_cost(x, reg: Regression, R=None, sigma: float = 0.0) -> float:
    """Tikhonov criterion ``1/2 |z - H x|^2_{R^-1} + 1/2 sigma |x|^2``."""
    Hw, zw = _whiten(reg, R)
    r = zw - Hw @ np.asarray(x, dtype=float)
    return 0.5 * float(r @ r) + 0.5 * sigma * float(np.dot(x, x))


def batch_solve(reg: Regression, R=None, sigma: float = 1e-3) -> LsCoeffs:
    """Ridge solution ``(H^T R^-1 H + sigma I)^-1 H^T R^-1 z``.

    Solved as the stacked least-squares problem ``[W H; sqrt(sigma) I] x ~ [W z; 0]``
    (SVD-based ``lstsq``), which avoids forming the normal matrix.
    ``sigma = 0`` is allowed only when ``H`` has full column rank.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    Hw, zw = _whiten(reg, R)
    n = Hw.shape[1]
    if sigma == 0.0:
        if len(zw) < n or np.linalg.matrix_rank(Hw) < n:
            raise RankDeficientError("H is rank deficient and sigma = 0; use a positive ridge parameter")
        A, b = Hw, zw
    else:
        A = np.vstack([Hw, np.sqrt(sigma) * np.eye(n)])
        b = np.concatenate([zw, np.zeros(n)])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return LsCoeffs.from_array(x)


def smw_inverse(A, B, C) -> np.ndarray:
    """Right-hand side of the Sherman-Woodbury-Morrison identity.

    Returns ``A^-1 - A^-1 C (B^-1 + C^T A^-1 C)^-1 C^T A^-1``, which equals
    ``(A + C B C^T)^-1`` whenever the inverses exist.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.asarray(C, dtype=float).reshape(A.shape[0], B.shape[0])
    Ai = np.linalg.inv(A)
    AiC = Ai @ C
    inner = np.linalg.inv(np.linalg.inv(B) + C.T @ AiC)
    return Ai - AiC @ inner @ AiC.T


@dataclass(frozen=True)
class RlsState:
    x: np.ndarray
    P: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidArgumentError(f"mu must be positive, got {self.mu}")


def rls_step(state: RlsState, h, z: float, R_k: float = 1.0) -> RlsState:
    """One scalar-measurement recursive least-squares update.

    ``P <- (P - P h h^T P / (h^T P h + R_k)) / mu`` then
    ``x <- x + P h (z - h x) / R_k`` with the updated ``P``.
    """
    h = np.asarray(h, dtype=float).ravel()
    if not (np.all(np.isfinite(h)) and np.isfinite(z) and np.isfinite(R_k)):
        raise InvalidArgumentError("rls_step inputs must be finite")
    if not R_k > 0:
        raise InvalidArgumentError(f"R_k must be positive, got {R_k}")
    Ph = state.P @ h
    s = h @ Ph + R_k  # scalar, no matrix inversion
    P = (state.P - np.outer(Ph, Ph) / s) / state.mu
    P = 0.5 * (P + P.T)
    x = state.x + P @ h * ((z - h @ state.x) / R_k)
    return RlsState(x, P, state.mu)


def rls_from_prior(x0, p0: float, mu: float = 1.0) -> RlsState:
    return RlsState(np.array(x0, dtype=float), p0 * np.eye(len(x0)), mu)


def rls_from_warmup(reg: Regression, rows: int, sigma: float, mu: float = 1.0) -> RlsState:
    """Initialize from a ridge batch fit on the first ``rows`` rows.

    ``P = (H^T H + sigma I)^-1`` and ``x`` the matching batch estimate, so
    continuing the recursion over the remaining rows (with ``mu = 1``)
    reproduces the batch solution on all rows.
    """
    if not 1 <= rows <= len(reg.z):
        raise InvalidArgumentError(f"warm-up rows must be in [1, {len(reg.z)}], got {rows}")
    H, z = reg.H[:rows], reg.z[:rows]
    A = H.T @ H + sigma * np.eye(H.shape[1])
    P = np.linalg.inv(A)
    P = 0.5 * (P + P.T)
    x = batch_solve(Regression(H, z), sigma=sigma).as_array()
    return RlsState(x, P, mu)


def run_rls(reg: Regression, state: RlsState, start: int = 0) -> tuple[RlsState, np.ndarray]:
    """Process rows ``start..`` sequentially; returns the final state and the coefficient history."""
    hist = np.empty((len(reg.z) - start, len(state.x)))
    for i, k in enumerate(range(start, len(reg.z))):
        state = rls_step(state, reg.H[k], reg.z[k])
        hist[i] = state.x
    return state, hist


@dataclass(frozen=True)
class LsConfig:
    """Settings for :func:`run_ls`.

    ``init`` selects the recursive initialization: ``"prior"`` uses
    ``x0`` and ``P0 = p0 I`` directly, ``"warmup"`` fits the first
    ``warmup_rows`` rows in batch with ridge ``sigma``.
    """

    sigma: float = 1e-3
    x0: tuple = (0.98, 0.01, 0.01)
    p0: float = 1e-3
    mu: float = 1.01
    init: str = "prior"
    warmup_rows: int = 10

    def __post_init__(self):
        if self.init not in ("prior", "warmup"):
            raise InvalidArgumentError(f"unknown recursive init {self.init!r}")


@dataclass
class LsResult:
    mode: str
    coeffs: LsCoeffs
    params: CthpParams
    p_hat: np.ndarray
    v_hat: np.ndarray
    mae_gap: float
    mae_velocity: float
    coeff_history: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def to_csv(self, traj: Trajectory, path) -> None:
        n = len(traj)
        xi = np.column_stack([self.p_hat, self.v_hat, np.tile(self.params.as_array(), (n, 1))])
        write_trace_csv(path, traj.t, traj.measurements(), xi, None)


def replay(coeffs: LsCoeffs, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Open-loop simulation of the identified model driven by the measured leader speed.

    Starts from the first measured ``(p, v)``; the gap integrates the speed
    difference, the speed follows the identified linear recursion.
    """
    x1, x2, x3 = coeffs.x1, coeffs.x2, coeffs.x3
    u, T = traj.u, traj.T
    n = len(traj)
    p = np.empty(n)
    v = np.empty(n)
    p[0], v[0] = traj.p[0], traj.v[0]
    for k in range(n - 1):
        p[k + 1] = p[k] + T * (u[k] - v[k])
        v[k + 1] = x1 * v[k] + x2 * u[k] + x3 * p[k]
    return p, v


def run_ls(traj: Trajectory, mode: str = BATCH, cfg: LsConfig = LsConfig(), R=None) -> LsResult:
    """Estimate the coefficients, convert to (alpha, beta, tau) and score the replay."""
    if mode not in MODES:
        raise InvalidArgumentError(f"unknown least-squares mode {mode!r}; choose from {MODES}")
    reg = build_regression(traj)
    history = None
    if mode == BATCH:
        coeffs = batch_solve(reg, R=R, sigma=cfg.sigma)
    else:
        mu = 1.0 if mode == RECURSIVE else cfg.mu
        if cfg.init == "warmup":
            state = rls_from_warmup(reg, cfg.warmup_rows, cfg.sigma, mu)
            start = cfg.warmup_rows
        else:
            state = rls_from_prior(cfg.x0, cfg.p0, mu)
            start = 0
        state, history = run_rls(reg, state, start)
        coeffs = LsCoeffs.from_array(state.x)
    params = params_from_ls_coeffs(coeffs, traj.T)
    p_hat, v_hat = replay(coeffs, traj)
    return LsResult(mode, coeffs, params, p_hat, v_hat,
                    mae_gap=mae(p_hat, traj.p), mae_velocity=mae(v_hat, traj.v),
                    coeff_history=history)

