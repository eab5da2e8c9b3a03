"""Constant time-headway policy (CTHP) car-following model.

Continuous dynamics of an ACC follower behind a leader::

    dp/dt = u - v
    dv/dt = alpha * (p - tau * v) + beta * (u - v) + d

with space gap ``p`` [m], follower speed ``v`` [m/s], leader speed ``u``
[m/s] and an acceleration disturbance ``d`` [m/s^2]. The discrete model used
by every estimator is the forward-Euler step of these equations, augmented
with three constant parameter rows so the state ``xi = [p, v, alpha, beta, tau]``
can be filtered jointly.

The least-squares estimators work with the linear-in-coefficients form
``v[k+1] = x1 v[k] + x2 u[k] + x3 p[k]``; the conversions live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateRecoveryError, InvalidArgumentError

# indices into the augmented state
P, V, ALPHA, BETA, TAU = range(5)
STATE_DIM = 5
MEAS_DIM = 2


def _check_finite(name, *values):
    for x in values:
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError(f"{name} must be finite, got {x!r}")


@dataclass(frozen=True)
class CthpParams:
    """Controller parameters: gains ``alpha`` [1/s^2], ``beta`` [1/s] and time headway ``tau`` [s].

    Values are stored as given. Estimators can legitimately return
    non-physical triples (a negative ``beta`` from unconstrained least
    squares, for instance), so physicality is a query rather than a
    constructor constraint.
    """

    alpha: float
    beta: float
    tau: float

    def __post_init__(self):
        _check_finite("CthpParams", self.alpha, self.beta, self.tau)

    def validate_physical(self) -> list[str]:
        """Return the list of violated physical constraints (empty if physical)."""
        problems = []
        if self.alpha < 0:
            problems.append(f"alpha={self.alpha:g} < 0")
        if self.beta < 0:
            problems.append(f"beta={self.beta:g} < 0")
        if self.tau <= 0:
            problems.append(f"tau={self.tau:g} <= 0")
        return problems

    @property
    def is_physical(self) -> bool:
        return not self.validate_physical()

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.tau], dtype=float)

    @classmethod
    def from_array(cls, values) -> "CthpParams":
        a, b, t = (float(x) for x in values)
        return cls(a, b, t)


@dataclass(frozen=True)
class PlatoonState:
    p: float
    v: float

    def __post_init__(self):
        _check_finite("PlatoonState", self.p, self.v)


@dataclass(frozen=True)
class ControlInput:
    """Leader speed ``u`` [m/s] and optional acceleration disturbance ``d`` [m/s^2]."""

    u: float
    d: float = 0.0

    def __post_init__(self):
        _check_finite("ControlInput", self.u, self.d)


@dataclass(frozen=True)
class LsCoeffs:
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        _check_finite("LsCoeffs", self.x1, self.x2, self.x3)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=float)

    @classmethod
    def from_array(cls, values) -> "LsCoeffs":
        x1, x2, x3 = (float(x) for x in values)
        return cls(x1, x2, x3)


# -- discretization -----------------------------------------------------------

Scheme = Callable[..., tuple]


def euler_forward(p, v, alpha, beta, tau, u, d, T):
    """One forward-Euler step. Works elementwise on scalars or arrays."""
    dv = u - v
    return p + T * dv, v + T * (alpha * (p - tau * v) + beta * dv + d)


# Alternative integrators (backward Euler, Runge-Kutta, ...) register here.
# Only forward Euler is provided; the observability matrix assumes it.
SCHEMES: dict[str, Scheme] = {"euler": euler_forward}


def _scheme(name: str) -> Scheme:
    try:
        return SCHEMES[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown discretization scheme {name!r}") from None


def _check_step(T):
    _check_finite("T", T)
    if T < 0:
        raise InvalidArgumentError(f"sampling time T must be >= 0, got {T}")


def _as_input(inp) -> ControlInput:
    return inp if isinstance(inp, ControlInput) else ControlInput(float(inp))


def step_dynamics(s: PlatoonState, params: CthpParams, inp, T: float,
                  scheme: str = "euler") -> PlatoonState:
    """Advance the physical state ``(p, v)`` by one sampling period ``T`` [s]."""
    _check_step(T)
    inp = _as_input(inp)
    p, v = _scheme(scheme)(s.p, s.v, params.alpha, params.beta, params.tau,
                           inp.u, inp.d, T)
    return PlatoonState(p, v)


def as_augmented(xi) -> np.ndarray:
    """Validate and return an augmented state (or a stack of them) as float array."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1:] != (STATE_DIM,):
        raise InvalidArgumentError(f"augmented state must have last dimension 5, got shape {xi.shape}")
    _check_finite("augmented state", xi)
    return xi


def augmented_state(s: PlatoonState, params: CthpParams) -> np.ndarray:
    return np.array([s.p, s.v, params.alpha, params.beta, params.tau], dtype=float)


def step_augmented(xi, inp, T: float, scheme: str = "euler") -> np.ndarray:
    """Step the augmented state ``[p, v, alpha, beta, tau]``.

    ``xi`` may be a single 5-vector or an ``(m, 5)`` stack (sigma points);
    the parameter columns are copied through untouched.
    """
    xi = as_augmented(xi)
    _check_step(T)
    inp = _as_input(inp)
    out = xi.copy()
    out[..., P], out[..., V] = _scheme(scheme)(
        xi[..., P], xi[..., V], xi[..., ALPHA], xi[..., BETA], xi[..., TAU],
        inp.u, inp.d, T)
    return out


def measure(xi) -> np.ndarray:
    """Measurement map: the space gap and follower speed ``(p, v)``."""
    xi = np.asarray(xi, dtype=float)
    return xi[..., :MEAS_DIM].copy()


def ls_coeffs_from_params(params: CthpParams, T: float) -> LsCoeffs:
    if not T > 0:
        raise InvalidArgumentError(f"T must be > 0, got {T}")
    a, b, tau = params.alpha, params.beta, params.tau
    return LsCoeffs(1.0 - (a * tau + b) * T, b * T, a * T)


def params_from_ls_coeffs(x: LsCoeffs, T: float) -> CthpParams:
    """Invert :func:`ls_coeffs_from_params`.

    Raises :class:`DegenerateRecoveryError` when ``x3 == 0``: with a zero
    gap gain the time headway does not enter the model at all.
    """
    if not T > 0:
        raise InvalidArgumentError(f"T must be > 0, got {T}")
    if x.x3 == 0.0:
        raise DegenerateRecoveryError("x3 == 0: alpha is zero and tau is undetermined")
    tau = (1.0 - x.x1 - x.x2) / x.x3
    if not math.isfinite(tau):
        raise DegenerateRecoveryError(f"tau recovery overflowed (x3={x.x3!r})")
    return CthpParams(x.x3 / T, x.x2 / T, tau)
