"""Synthetic leader profiles and closed-loop CTHP follower trajectories.

These are the ground truth for the recovery tests. The default persistently
exciting leader rides on a constant base speed with three sinusoids at
incommensurate frequencies (0.02, 0.07 and 0.19 Hz), which keeps the
regressor ``[v, u, p]`` full rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidArgumentError, ProfileError
from .model import CthpParams, PlatoonState, euler_forward
from .trajectory import SYNTHETIC_CLEAN, SYNTHETIC_NOISY, Trajectory

CONSTANT = "constant"
STEP = "step"
SINUSOIDS = "sum-of-sinusoids"
PIECEWISE = "piecewise"
KINDS = (CONSTANT, STEP, SINUSOIDS, PIECEWISE)

MAX_GAP = 1e4  # m
MAX_SPEED = 1e3  # m/s


@dataclass(frozen=True)
class LeaderProfile:
    """Leader speed u(t) [m/s].

    * ``constant``: ``base``
    * ``step``: ``base`` plus ``amplitude`` for every ``(time, amplitude)`` in ``steps`` once ``t >= time``
    * ``sum-of-sinusoids``: ``base + sum(A sin(2 pi f t + phase))`` over ``(A, f [Hz], phase [rad])`` triples
    * ``piecewise``: linear interpolation through ``(time, speed)`` ``breakpoints``, held flat outside
    """

    kind: str = CONSTANT
    base: float = 25.0
    steps: tuple = ()
    sinusoids: tuple = ()
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProfileError(f"unknown profile kind {self.kind!r}; choose from {KINDS}")
        if any(f <= 0 for _, f, *_ in self.sinusoids):
            raise ProfileError("sinusoid frequencies must be positive")
        if self.kind == PIECEWISE:
            times = [bp[0] for bp in self.breakpoints]
            if len(times) < 1 or any(b <= a for a, b in zip(times, times[1:])):
                raise ProfileError("piecewise profile needs increasing breakpoint times")

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == CONSTANT:
            return np.full_like(t, float(self.base))
        if self.kind == STEP:
            u = np.full_like(t, float(self.base))
            for when, amp in self.steps:
                u = u + np.where(t >= when, amp, 0.0)
            return u
        if self.kind == SINUSOIDS:
            u = np.full_like(t, float(self.base))
            for amp, freq, *phase in self.sinusoids:
                u = u + amp * np.sin(2.0 * np.pi * freq * t + (phase[0] if phase else 0.0))
            return u
        times, speeds = zip(*self.breakpoints)
        return np.interp(t, times, speeds)


def pe_profile(base: float = 25.0) -> LeaderProfile:
    """Default persistently exciting leader: amplitudes 2, 1.5, 1 m/s at 0.02, 0.07, 0.19 Hz."""
    return LeaderProfile(SINUSOIDS, base, sinusoids=((2.0, 0.02, 0.0), (1.5, 0.07, 0.0), (1.0, 0.19, 0.0)))


def n_samples(duration: float, T: float) -> int:
    # tolerate float noise such as 600 / 0.1 = 6000.000000000001
    return int(math.ceil(duration / T - 1e-9))


def leader_series(profile: LeaderProfile, duration: float, T: float) -> np.ndarray:
    """Sample the profile at ``t_k = k T`` for ``ceil(duration / T)`` samples."""
    if not (T > 0 and duration >= T):
        raise InvalidArgumentError(f"need T > 0 and duration >= T (T={T}, duration={duration})")
    u = profile.evaluate(T * np.arange(n_samples(duration, T)))
    if np.any(u < 0):
        raise ProfileError(f"profile produces negative leader speed (min {u.min():.3g} m/s)")
    return u


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop simulation settings.

    ``process_std`` is added to ``(p, v)`` inside the recursion after every
    step; ``measurement_std`` is added to the recorded outputs only.
    """

    params: CthpParams
    T: float = 0.1
    duration: float = 600.0
    initial: PlatoonState = field(default_factory=lambda: PlatoonState(40.0, 30.0))
    process_std: tuple = (0.0, 0.0)
    measurement_std: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError(f"T must be > 0, got {self.T}")
        if not self.duration >= self.T:
            raise InvalidArgumentError("duration must be at least one sample period")
        if any(s < 0 for s in (*self.process_std, *self.measurement_std)):
            raise InvalidArgumentError("noise standard deviations must be >= 0")


def _iterate(params, p0, v0, u, T, kicks=None):
    n = len(u)
    p = np.empty(n)
    v = np.empty(n)
    p[0], v[0] = p0, v0
    a, b, tau = params.alpha, params.beta, params.tau
    for k in range(n - 1):
        pk, vk = euler_forward(p[k], v[k], a, b, tau, u[k], 0.0, T)
        if kicks is not None:
            pk += kicks[k, 0]
            vk += kicks[k, 1]
        if not (abs(pk) <= MAX_GAP and abs(vk) <= MAX_SPEED):
            raise DivergenceError(f"simulation diverged at step {k + 1} (p={pk:.3g}, v={vk:.3g})")
        p[k + 1], v[k + 1] = pk, vk
    return p, v


def simulate_platoon(cfg: SimConfig, leader) -> tuple[Trajectory, Trajectory]:
    """Return ``(clean, noisy)`` trajectories driven by the leader speed series.

    ``clean`` is the exact Euler iteration. ``noisy`` uses the same
    recursion with seeded process noise, then seeded measurement noise on
    the recorded ``(p, v)``. With both noise levels zero the two are
    identical.
    """
    u = np.asarray(leader, dtype=float)
    if u.ndim != 1 or len(u) < 2:
        raise InvalidArgumentError("leader series needs at least 2 samples")
    s0 = cfg.initial
    p, v = _iterate(cfg.params, s0.p, s0.v, u, cfg.T)
    clean = Trajectory.from_series(u, v, p, cfg.T, provenance=SYNTHETIC_CLEAN)

    rng = np.random.default_rng(cfg.seed)
    proc = np.asarray(cfg.process_std, dtype=float)
    meas = np.asarray(cfg.measurement_std, dtype=float)
    kicks = rng.normal(0.0, 1.0, size=(len(u) - 1, 2)) * proc
    noise = rng.normal(0.0, 1.0, size=(len(u), 2)) * meas
    if np.any(proc > 0):
        pn, vn = _iterate(cfg.params, s0.p, s0.v, u, cfg.T, kicks)
    else:
        pn, vn = p.copy(), v.copy()
    if np.any(meas > 0):
        pn = pn + noise[:, 0]
        vn = vn + noise[:, 1]
    noisy = Trajectory.from_series(u, vn, pn, cfg.T, provenance=SYNTHETIC_NOISY)
    return clean, noisy
