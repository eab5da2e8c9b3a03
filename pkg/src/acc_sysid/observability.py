"""Observability rank condition for the Euler-discretized augmented CTHP model.

The 5x5 matrix stacks the gradients of ``p``, its first two Lie derivatives
along the discrete vector field, ``v`` and its first Lie derivative. Rank 5
means the state (including the three parameters) is locally observable.
For this model the rank is 3 away from degenerate points, both at and off
equilibrium, leaving a two-dimensional unobservable parameter subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import subspace_angles

from .errors import InvalidArgumentError
from .model import ALPHA, BETA, TAU, as_augmented

EQUILIBRIUM = "equilibrium"
NON_EQUILIBRIUM = "non-equilibrium"
NEAR_EQUILIBRIUM = "near-equilibrium"

# below this |p - tau v| the closed-form kernel is not evaluated
KERNEL_GAP_TOL = 1e-6


def observability_matrix(xi, u: float, T: float) -> np.ndarray:
    xi = as_augmented(xi)
    if not (np.isfinite(u) and np.isfinite(T)):
        raise InvalidArgumentError("u and T must be finite")
    if not T > 0:
        raise InvalidArgumentError(f"T must be > 0, got {T}")
    p, v, a, b, tau = (float(x) for x in xi)
    gap_err = p - tau * v
    dv = u - v
    T2 = T * T
    return np.array([
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, -T, 0.0, 0.0, 0.0],
        [1.0 - a * T2, -2.0 * T + (tau * a + b) * T2, -gap_err * T2, -dv * T2, a * v * T2],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [a * T, -a * tau * T, gap_err * T, dv * T, -a * v * T],
    ])


def _default_tol(M):
    return max(M.shape) * np.finfo(float).eps


def numeric_rank(M, tol: float | None = None) -> int:
    """Number of singular values above ``tol * sigma_max``.

    ``tol`` is relative; it defaults to ``max(m, n) * eps``.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError("matrix must be finite")
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = _default_tol(M) if tol is None else tol
    return int(np.sum(s > tol * s[0]))


def null_space(M, tol: float | None = None) -> list[np.ndarray]:
    """Orthonormal basis of the right null space, as a list of unit vectors."""
    M = np.asarray(M, dtype=float)
    r = numeric_rank(M, tol)
    _, _, vt = np.linalg.svd(M)
    return [vt[i].copy() for i in range(r, M.shape[1])]


def closed_form_kernel(xi, u: float) -> np.ndarray:
    """Analytic kernel basis (columns) at ``xi``.

    At equilibrium (u == v, p == tau v) this is span{e_alpha, e_beta}; off
    equilibrium each column trades ``alpha`` against ``beta`` or ``tau``.
    Requires ``|p - tau v| > KERNEL_GAP_TOL`` off equilibrium.
    """
    p, v, a, _, tau = (float(x) for x in as_augmented(xi))
    gap_err = p - tau * v
    if gap_err == 0.0 and u == v:
        k = np.zeros((5, 2))
        k[ALPHA, 0] = 1.0
        k[BETA, 1] = 1.0
        return k
    if abs(gap_err) <= KERNEL_GAP_TOL:
        raise InvalidArgumentError("closed-form kernel undefined for |p - tau v| <= %g" % KERNEL_GAP_TOL)
    k = np.zeros((5, 2))
    k[ALPHA, 0] = -(u - v) / gap_err
    k[BETA, 0] = 1.0
    k[ALPHA, 1] = a * v / gap_err
    k[TAU, 1] = 1.0
    return k


def max_principal_angle(A, B) -> float:
    """Largest principal angle [rad] between the column spaces of A and B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        return np.pi / 2
    return float(np.max(subspace_angles(A, B)))


@dataclass
class OrcReport:
    matrix: np.ndarray
    rank: int
    nullity: int
    null_basis: list = field(default_factory=list)
    regime: str = NON_EQUILIBRIUM
    observable: bool = False

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "rank": self.rank,
            "nullity": self.nullity,
            "null_basis": [v.tolist() for v in self.null_basis],
            "regime": self.regime,
            "observable": self.observable,
        }


def classify_observability(xi, u: float, T: float, eq_tol: float = 1e-6,
                           tol: float | None = None,
                           rank_fn: Callable[..., int] = numeric_rank) -> OrcReport:
    """Assemble rank, kernel and regime diagnostics at one operating point.

    ``rank_fn`` is injectable so callers can substitute a different rank
    decision (e.g. a symbolic one) without touching the rest.
    """
    xi = as_augmented(xi)
    M = observability_matrix(xi, u, T)
    rank = int(rank_fn(M, tol))
    n = M.shape[1]
    basis = null_space(M, tol) if rank < n else []
    if len(basis) != n - rank:
        # rank_fn disagrees with the SVD threshold; keep rank-nullity consistent
        _, _, vt = np.linalg.svd(M)
        basis = [vt[i].copy() for i in range(rank, n)]
    p, v, _, _, tau = xi
    gap_err = abs(p - tau * v)
    if abs(u - v) <= eq_tol and gap_err <= eq_tol:
        regime = EQUILIBRIUM
    elif gap_err <= KERNEL_GAP_TOL:
        regime = NEAR_EQUILIBRIUM
    else:
        regime = NON_EQUILIBRIUM
    return OrcReport(matrix=M, rank=rank, nullity=n - rank, null_basis=basis,
                     regime=regime, observable=rank == n)
