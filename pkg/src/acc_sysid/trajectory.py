"""Car-following trajectories: container, CSV ingestion, resampling and MAE.

Input CSVs are comma separated with a header row, dot decimals, UTF-8.
Column names are supplied through :class:`CsvSchema` because public
car-following datasets do not agree on naming.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (DataGapError, InsufficientDataError, InvalidArgumentError,
                     MalformedTimeError, SchemaError)

log = logging.getLogger(__name__)

EMPIRICAL = "empirical"
SYNTHETIC_CLEAN = "synthetic-clean"
SYNTHETIC_NOISY = "synthetic-noisy"
PROVENANCES = (EMPIRICAL, SYNTHETIC_CLEAN, SYNTHETIC_NOISY)

TIME_STEP_TOL = 1e-9
DEFAULT_T = 0.1

TRAJECTORY_COLUMNS = ("t", "u", "v", "p")
TRACE_COLUMNS = ("t", "p_meas", "v_meas", "p_hat", "v_hat", "alpha_hat", "beta_hat",
                 "tau_hat", "var_p", "var_v", "var_alpha", "var_beta", "var_tau")


def _frozen(x):
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled leader speed ``u``, follower speed ``v`` and gap ``p``."""

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    T: float
    provenance: str = EMPIRICAL

    def __post_init__(self):
        for name in TRAJECTORY_COLUMNS:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.t)
        if any(getattr(self, c).shape != (n,) for c in TRAJECTORY_COLUMNS):
            raise InvalidArgumentError("trajectory series must be 1-D and of equal length")
        if n < 2:
            raise InsufficientDataError(f"trajectory needs at least 2 samples, got {n}")
        for name in TRAJECTORY_COLUMNS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgumentError(f"series {name!r} contains NaN or Inf")
        if not self.T > 0:
            raise InvalidArgumentError(f"sample period must be positive, got {self.T}")
        dt = np.diff(self.t)
        if np.any(dt <= 0):
            raise MalformedTimeError("time stamps must be strictly increasing")
        if np.max(np.abs(dt - self.T)) > TIME_STEP_TOL:
            raise MalformedTimeError(f"time grid is not uniform with step {self.T}")
        if self.provenance not in PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.t)

    @classmethod
    def from_series(cls, u, v, p, T: float, t0: float = 0.0,
                    provenance: str = EMPIRICAL) -> "Trajectory":
        n = len(u)
        return cls(t0 + T * np.arange(n), u, v, p, T, provenance)

    def measurements(self) -> np.ndarray:
        """(N, 2) array of measured ``(p, v)``."""
        return np.column_stack([self.p, self.v])


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for a car-following CSV.

    Either ``gap`` is set, or all of ``leader_pos``, ``follower_pos`` and
    ``lead_length`` [m], in which case the gap is computed as
    ``leader_pos - follower_pos - lead_length``.
    """

    time: str = "t"
    u: str = "u"
    v: str = "v"
    gap: str | None = "p"
    leader_pos: str | None = None
    follower_pos: str | None = None
    lead_length: float | None = None
    engaged: str | None = None

    def __post_init__(self):
        positions = (self.leader_pos, self.follower_pos, self.lead_length)
        has_positions = all(x is not None for x in positions)
        if any(x is not None for x in positions) and not has_positions:
            raise SchemaError("position-based gap needs leader_pos, follower_pos and lead_length")
        if (self.gap is not None) == has_positions:
            raise SchemaError("configure exactly one of a gap column or a position pair with lead length")

    def required_columns(self) -> list[str]:
        cols = [self.time, self.u, self.v]
        cols += [self.gap] if self.gap is not None else [self.leader_pos, self.follower_pos]
        if self.engaged is not None:
            cols.append(self.engaged)
        return cols


def _read_table(path, schema: CsvSchema):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    missing = [c for c in schema.required_columns() if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}; available: {list(df.columns)}")
    df = df[schema.required_columns()]
    n0 = len(df)
    df = df.dropna()
    dropped = n0 - len(df)
    if dropped:
        log.warning("%s: dropped %d row(s) with missing fields", path, dropped)
    try:
        t = df[schema.time].to_numpy(dtype=float)
        u = df[schema.u].to_numpy(dtype=float)
        v = df[schema.v].to_numpy(dtype=float)
        if schema.gap is not None:
            p = df[schema.gap].to_numpy(dtype=float)
        else:
            p = (df[schema.leader_pos].to_numpy(dtype=float)
                 - df[schema.follower_pos].to_numpy(dtype=float) - schema.lead_length)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric data ({exc})") from None
    engaged = None
    if schema.engaged is not None:
        engaged = df[schema.engaged].to_numpy().astype(float) != 0
    return t, u, v, p, engaged, dropped


def _assemble(t, u, v, p, T_target, provenance):
    if len(t) < 2:
        raise InsufficientDataError(f"need at least 2 valid rows, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        i = int(np.argmax(np.diff(t) <= 0))
        raise MalformedTimeError(f"time is not strictly increasing at row {i + 1} (t={t[i + 1]})")
    if np.any(u < 0):
        log.warning("leader speed has %d negative sample(s)", int(np.sum(u < 0)))
    dt = np.diff(t)
    T = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(dt - T)) <= TIME_STEP_TOL and (T_target is None or abs(T - T_target) <= TIME_STEP_TOL):
        return Trajectory(t, u, v, p, T, provenance)
    return resample(t, u, v, p, DEFAULT_T if T_target is None else T_target, provenance)


def load_segments(path, schema: CsvSchema = CsvSchema(), T_target: float | None = None,
                  min_samples: int = 2) -> list[Trajectory]:
    """Load a CSV and split it at disengaged spans (if ``schema.engaged`` is set).

    Segments shorter than ``min_samples`` are discarded. Each segment is
    resampled independently when its time base is not uniform.
    """
    t, u, v, p, engaged, _ = _read_table(path, schema)
    if engaged is None:
        return [_assemble(t, u, v, p, T_target, EMPIRICAL)]
    segments = []
    idx = np.flatnonzero(engaged)
    if idx.size == 0:
        raise InsufficientDataError(f"{path}: ACC never engaged")
    breaks = np.flatnonzero(np.diff(idx) > 1) + 1
    for run in np.split(idx, breaks):
        if run.size >= min_samples:
            segments.append(_assemble(t[run], u[run], v[run], p[run], T_target, EMPIRICAL))
    if not segments:
        raise InsufficientDataError(f"{path}: no engaged segment with >= {min_samples} samples")
    return segments


def load_csv(path, schema: CsvSchema = CsvSchema(), T_target: float | None = None) -> Trajectory:
    """Load one trajectory. Non-uniform time bases are resampled to ``T_target`` (default 0.1 s)."""
    segments = load_segments(path, schema, T_target)
    if len(segments) > 1:
        raise InsufficientDataError(
            f"{path}: ACC disengaged; data splits into {len(segments)} segments, use load_segments()")
    return segments[0]


def write_csv(traj: Trajectory, path) -> None:
    df = pd.DataFrame({c: getattr(traj, c) for c in TRAJECTORY_COLUMNS})
    df.to_csv(path, index=False, float_format="%.17g")


def resample_series(t, columns: dict, T_target: float):
    """Linearly interpolate irregular samples onto ``t[0] + k * T_target``.

    The grid never extends past the observed span. Source gaps longer than
    ``10 * T_target`` raise :class:`DataGapError` listing the intervals.
    """
    t = np.asarray(t, dtype=float)
    if not T_target > 0:
        raise InvalidArgumentError(f"T_target must be > 0, got {T_target}")
    if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
        raise MalformedTimeError("time must be strictly increasing with at least 2 samples")
    span = t[-1] - t[0]
    if span < 2 * T_target - TIME_STEP_TOL:
        raise InsufficientDataError(f"time span {span} s shorter than 2 * T_target")
    dt = np.diff(t)
    holes = np.flatnonzero(dt > 10 * T_target)
    if holes.size:
        intervals = [(float(t[i]), float(t[i + 1])) for i in holes]
        raise DataGapError(f"data gap(s) longer than {10 * T_target:g} s: {intervals}", intervals)
    n = int(np.floor(span / T_target + TIME_STEP_TOL)) + 1
    grid = t[0] + T_target * np.arange(n)
    grid[-1] = min(grid[-1], t[-1])
    return grid, {k: np.interp(grid, t, np.asarray(x, dtype=float)) for k, x in columns.items()}


def resample(t, u, v, p, T_target: float = DEFAULT_T, provenance: str = EMPIRICAL) -> Trajectory:
    grid, cols = resample_series(t, {"u": u, "v": v, "p": p}, T_target)
    # keep the exact grid step so the Trajectory uniformity check holds
    grid = grid[0] + T_target * np.arange(len(grid))
    return Trajectory(grid, cols["u"], cols["v"], cols["p"], T_target, provenance)


def mae(a, b) -> float:
    """Mean absolute error between two equal-length series."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InvalidArgumentError("mae of empty series")
    return float(np.mean(np.abs(a - b)))


def write_trace_csv(path, t, y_meas, xi_hat, var_diag) -> None:
    """Write the estimate trace schema (see ``TRACE_COLUMNS``).

    ``var_diag`` may be ``None`` (e.g. least squares replay), giving empty
    variance columns.
    """
    n = len(t)
    var = np.full((n, 5), np.nan) if var_diag is None else np.asarray(var_diag, dtype=float)
    data = np.column_stack([t, y_meas, xi_hat, var])
    pd.DataFrame(data, columns=list(TRACE_COLUMNS)).to_csv(path, index=False, float_format="%.17g")
