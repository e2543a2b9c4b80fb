"""Deterministic time-stepping kernels and trajectory recording.

All steppers are pure functions on plain numpy arrays: forward-time
centered-space (FTCS) for the heat equation, first-order upwind for the
unit-speed transport equation, and classical RK4 for ODE blocks driven by
a piecewise-constant input.  Stability bounds are checked before stepping
and violations raise :class:`ConfigurationError`.

Trajectories are recorded as named series of norms plus optional full
spatial snapshots, and serialize to CSV with 12 significant digits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DimensionError, FitError

__all__ = [
    "SpatialFunction",
    "SimConfig",
    "Trajectory",
    "heat_step_limit",
    "step_heat_ftcs",
    "step_transport_upwind",
    "step_ode",
    "fit_decay_rate",
    "l2_norm",
    "write_trajectory_csv",
    "write_snapshot_csv",
]

#: numeric format for CSV output: 12 significant digits
CSV_FMT = "%.12g"


@dataclass(frozen=True)
class SpatialFunction:
    """A function sampled on the uniform grid x_k = k * dx over [0, L].

    ``samples`` has shape (n,) for scalar-valued functions or (n, m) for
    m-vector-valued ones; n >= 2 and all values finite.
    """

    domain_length: float
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.domain_length <= 0:
            raise ValueError(f"domain_length must be > 0, got {self.domain_length}")
        if self.samples.shape[0] < 2:
            raise DimensionError("need at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    @property
    def dx(self) -> float:
        return self.domain_length / (self.samples.shape[0] - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.domain_length, self.samples.shape[0])

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class SimConfig:
    """Time/space resolution and recording cadence of one run."""

    dt: float
    T: float
    dx: float = 0.0  # unused by pure-ODE scenarios
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ConfigurationError("dt and T must be > 0")
        if self.T < self.dt:
            raise ConfigurationError("horizon T must be >= dt")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")


@dataclass
class Trajectory:
    """Recorded time series (norms by default) and optional snapshots."""

    times: np.ndarray
    series: dict[str, np.ndarray]
    snapshot_x: np.ndarray | None = None
    snapshots: list[tuple[float, dict[str, np.ndarray]]] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, vals in self.series.items():
            self.series[name] = np.asarray(vals, dtype=float)
            if self.series[name].shape != self.times.shape:
                raise DimensionError(
                    f"series {name!r} length {len(vals)} != {len(self.times)} times")

    def value_at_end(self, name: str) -> float:
        return float(self.series[name][-1])


class TrajectoryRecorder:
    """Incremental builder used by the simulators."""

    def __init__(self, names, snapshot_x=None, snapshot_times=()):
        self._names = list(names)
        self._times: list[float] = []
        self._data: dict[str, list[float]] = {n: [] for n in self._names}
        self._snapshot_x = None if snapshot_x is None else np.asarray(snapshot_x)
        self._snap_due = sorted(snapshot_times)
        self._snapshots: list[tuple[float, dict[str, np.ndarray]]] = []

    def record(self, t: float, **values: float) -> None:
        self._times.append(t)
        for n in self._names:
            self._data[n].append(float(values[n]))

    def snapshot_due(self, t: float, dt: float) -> bool:
        return bool(self._snap_due) and t >= self._snap_due[0] - 0.5 * dt

    def snapshot(self, t: float, fields: dict[str, np.ndarray]) -> None:
        self._snap_due.pop(0)
        self._snapshots.append((t, {k: np.array(v) for k, v in fields.items()}))

    def build(self) -> Trajectory:
        return Trajectory(
            times=np.array(self._times),
            series={n: np.array(v) for n, v in self._data.items()},
            snapshot_x=self._snapshot_x,
            snapshots=self._snapshots,
        )


def heat_step_limit(dx: float, mu: float) -> float:
    """Largest stable FTCS step for w_t = w_xx + mu w."""
    return dx * dx / (2.0 + max(mu, 0.0) * dx * dx)


def step_heat_ftcs(w: np.ndarray, mu: float, forcing: np.ndarray,
                   neumann_right: float, dt: float, dx: float,
                   dirichlet_left: float = 0.0) -> np.ndarray:
    """One explicit Euler step of w_t = w_xx + mu w + forcing.

    Dirichlet value at the left node, Neumann derivative at the right node
    enforced through a second-order ghost point.
    """
    if dt > heat_step_limit(dx, mu) * (1 + 1e-12):
        raise ConfigurationError(
            f"FTCS stability requires dt <= dx^2/(2 + mu dx^2) = "
            f"{heat_step_limit(dx, mu):.3e}, got dt = {dt:.3e}")
    lap = np.empty_like(w)
    lap[1:-1] = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (dx * dx)
    ghost = w[-2] + 2.0 * dx * neumann_right
    lap[-1] = (ghost - 2.0 * w[-1] + w[-2]) / (dx * dx)
    out = w + dt * (lap + mu * w + forcing)
    out[0] = dirichlet_left
    return out


def step_transport_upwind(w: np.ndarray, inflow: float, dt: float,
                          dx: float) -> np.ndarray:
    """One upwind step of w_t + w_x = 0 with inflow boundary w(0, t)."""
    if dt > dx * (1 + 1e-12):
        raise ConfigurationError(
            f"upwind CFL requires dt <= dx = {dx:.3e}, got dt = {dt:.3e}")
    lam = dt / dx
    out = np.empty_like(w)
    out[1:] = w[1:] - lam * (w[1:] - w[:-1])
    out[0] = inflow
    return out


def step_ode(x: np.ndarray, m: np.ndarray, inp: np.ndarray,
             dt: float) -> np.ndarray:
    """Classical RK4 step of xdot = m x + inp with inp held constant."""
    k1 = m @ x + inp
    k2 = m @ (x + 0.5 * dt * k1) + inp
    k3 = m @ (x + 0.5 * dt * k2) + inp
    k4 = m @ (x + dt * k3) + inp
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def l2_norm(w: np.ndarray, dx: float) -> float:
    """Trapezoidal L2 norm of grid samples."""
    return float(np.sqrt(np.trapezoid(w * w, dx=dx)))


def fit_decay_rate(traj: Trajectory, series: str,
                   window: tuple[float, float]) -> float:
    """Least-squares slope of -log(series) over t in [t0, t1].

    Positive for decaying series, 0 for constant ones.  Raises
    :class:`FitError` when the window contains non-positive values or
    fewer than two samples.
    """
    t0, t1 = window
    mask = (traj.times >= t0) & (traj.times <= t1)
    t = traj.times[mask]
    y = traj.series[series][mask]
    if t.size < 2:
        raise FitError(f"window [{t0}, {t1}] contains {t.size} samples; "
                       "widen the window or record more often")
    if np.any(y <= 0):
        raise FitError(f"series {series!r} has non-positive values in the "
                       "window; decay fit undefined")
    coeff = np.polyfit(t, np.log(y), 1)
    return float(-coeff[0])


def write_trajectory_csv(traj: Trajectory, path: str) -> None:
    """CSV with column 1 ``t`` and one column per named series."""
    names = list(traj.series)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(["t"] + names) + "\n")
        for i, t in enumerate(traj.times):
            row = [CSV_FMT % t] + [CSV_FMT % traj.series[n][i] for n in names]
            fh.write(",".join(row) + "\n")


def write_snapshot_csv(traj: Trajectory, directory: str) -> list[str]:
    """One CSV per snapshot time, columns ``x`` plus one per field."""
    if traj.snapshot_x is None and traj.snapshots:
        raise ValueError("trajectory has snapshots but no snapshot grid")
    os.makedirs(directory, exist_ok=True)
    written = []
    for t, fields in traj.snapshots:
        path = os.path.join(directory, f"snapshot_t{t:.6g}.csv")
        names = list(fields)
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(["x"] + names) + "\n")
            for i, x in enumerate(traj.snapshot_x):
                row = [CSV_FMT % x] + [CSV_FMT % fields[n][i] for n in names]
                fh.write(",".join(row) + "\n")
        written.append(path)
    return written
