"""Strict string-stability checks for the CTHP follower.

The speed-to-speed transfer function of the closed loop is

    H(s) = (beta s + alpha) / (s^2 + (alpha tau + beta) s + alpha)

Two closed-form sufficient conditions are evaluated:

* L2:   alpha^2 tau^2 + 2 alpha beta tau - 2 alpha >= 0   (|H(jw)| <= 1 for all w)
* Linf: (alpha tau + beta)^2 - 4 alpha >= 0              (real poles, monotone step response)

The margins satisfy ``linf - l2 = beta^2 - 2 alpha``, so whenever
``beta^2 >= 2 alpha`` a nonnegative L2 margin implies a nonnegative Linf
margin. The Linf margin is only a sufficient condition.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidArgumentError, SingularFrequencyError
from .model import CthpParams

#: 4096 log-spaced frequencies in [1e-3, 1e3] rad/s
DEFAULT_OMEGA_GRID = np.logspace(-3.0, 3.0, 4096)


def freq_response_magnitude(params: CthpParams, omega):
    """|H(j omega)| for scalar or array ``omega`` [rad/s] (must be >= 0)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidArgumentError("omega must be finite and nonnegative")
    a, b, tau = params.alpha, params.beta, params.tau
    w2 = w * w
    num = a * a + b * b * w2
    den = (a - w2) ** 2 + w2 * (a * tau + b) ** 2
    if np.any(den == 0.0):
        bad = w[den == 0.0] if w.ndim else w
        raise SingularFrequencyError(f"transfer function denominator vanishes at omega={bad}")
    mag = np.sqrt(num / den)
    return float(mag) if mag.ndim == 0 else mag


def l2_condition(params: CthpParams) -> float:
    a, b, tau = params.alpha, params.beta, params.tau
    return a * a * tau * tau + 2.0 * a * b * tau - 2.0 * a


def linf_condition(params: CthpParams) -> float:
    """Margin of the sufficient (monotone step response) condition for Linf stability."""
    a, b, tau = params.alpha, params.beta, params.tau
    return (a * tau + b) ** 2 - 4.0 * a


@dataclass(frozen=True)
class StabilityReport:
    l2_margin: float
    linf_margin: float
    l2_stable: bool
    linf_stable: bool
    beta_sq_minus_2alpha: float
    peak_gain: float
    peak_omega: float

    def to_dict(self) -> dict:
        return asdict(self)


def stability_report(params: CthpParams, omega_grid=None) -> StabilityReport:
    """Evaluate both margins and the peak gain of |H| over ``omega_grid``.

    The verdicts come from the closed-form margins only (margin 0 counts as
    stable); ``peak_gain`` is a diagnostic sampled on the grid.
    """
    grid = DEFAULT_OMEGA_GRID if omega_grid is None else np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgumentError("omega grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) < 0):
        raise InvalidArgumentError("omega grid must be sorted")
    mags = np.atleast_1d(freq_response_magnitude(params, grid))
    i = int(np.argmax(mags))
    l2 = l2_condition(params)
    linf = linf_condition(params)
    return StabilityReport(
        l2_margin=l2,
        linf_margin=linf,
        l2_stable=bool(l2 >= 0.0),
        linf_stable=bool(linf >= 0.0),
        beta_sq_minus_2alpha=params.beta ** 2 - 2.0 * params.alpha,
        peak_gain=float(mags[i]),
        peak_omega=float(grid[i]),
    )
