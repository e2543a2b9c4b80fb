"""Output-delay compensation for finite-dimensional plants.

A plant measured through a delay, y(t) = C2 x2(t - tau), is rewritten as
a cascade in which the delay line is a unit-speed transport equation on
[0, tau] with inflow C2 x2(t) and outflow y.  The decoupling Sylvester
equation then has the closed-form kernel

    s(x) = -exp(-A2^T x) C2^T,            x in [0, tau],

so the measured combination of the plant state seen by the plant-side
placement is C1 S = -C2 exp(-A2 tau).  Two equivalent gain forms are
supported:

* ``direct``:     place F2 on (A2, C1 S) directly;
* ``conjugated``: place F on (A2, C2), then F2 = -exp(A2 tau) F, which
  moves the same spectrum because exp(A2 tau) conjugates A2 + F C2.

Either way F1(x) = (S F2)(x) is the spatial injection gain of the delay
line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .exceptions import DesignError, DimensionError, NumericalError
from .linalg import as_matrix, eigenvalues, expm
from .design import StateSpace, is_observable, place_observer_poles

__all__ = [
    "DelayPlant",
    "DelayObserverGains",
    "sylvester_kernel",
    "design_delay_observer",
    "simulate_delay_observer",
]


@dataclass(frozen=True)
class DelayPlant:
    """Plant (A2, B2, C2) whose scalar output is delayed by ``tau`` seconds."""

    A2: np.ndarray
    B2: np.ndarray
    C2: np.ndarray
    tau: float

    def __post_init__(self):
        a2 = as_matrix(self.A2, "A2")
        b2 = as_matrix(self.B2, "B2")
        c2 = as_matrix(self.C2, "C2")
        n = a2.shape[0]
        if a2.shape[1] != n:
            raise DimensionError(f"A2 must be square, got {a2.shape}")
        if b2.shape[0] != n:
            raise DimensionError(f"B2 must have {n} rows, got {b2.shape}")
        if c2.shape != (1, n):
            raise DimensionError(f"C2 must be 1x{n}, got {c2.shape}")
        if self.tau <= 0:
            raise ValueError(f"delay tau must be > 0, got {self.tau}")
        object.__setattr__(self, "A2", a2)
        object.__setattr__(self, "B2", b2)
        object.__setattr__(self, "C2", c2)

    @property
    def n(self) -> int:
        return self.A2.shape[0]


@dataclass(frozen=True)
class DelayObserverGains:
    """Gains of the delay-compensating observer.

    ``F`` places (A2, C2); ``F2`` is the plant injection; ``F1`` holds the
    samples of the spatial injection gain on the transport grid.
    """

    F: np.ndarray
    F2: np.ndarray
    F1: engine.SpatialFunction
    form: str


def sylvester_kernel(p: DelayPlant, grid: int = 100) -> engine.SpatialFunction:
    """Sample the closed-form kernel s(x) = -exp(-A2^T x) C2^T on [0, tau].

    ``grid`` is the number of cells; the result holds grid + 1 vector
    samples with s(0) = -C2^T exactly.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    dx = p.tau / grid
    c2t = p.C2.T.ravel()
    samples = np.empty((grid + 1, p.n))
    for k in range(grid + 1):
        samples[k] = -(expm(-p.A2.T, k * dx) @ c2t)
    return engine.SpatialFunction(p.tau, samples)


def measured_combination(p: DelayPlant) -> np.ndarray:
    """The row C1 S = -C2 exp(-A2 tau) seen by the plant-side placement."""
    return -(p.C2 @ expm(p.A2, -p.tau))


def design_delay_observer(p: DelayPlant, plant_poles,
                          form: str = "conjugated",
                          grid: int = 100) -> DelayObserverGains:
    """Design the delay-compensating observer gains.

    ``plant_poles`` become the spectrum of A2 + F2 C1 S (equivalently of
    A2 + F C2 in the conjugated form).  ``grid`` sets the sampling of the
    spatial gain F1 over [0, tau].
    """
    if form not in ("conjugated", "direct"):
        raise ValueError(f"form must be 'conjugated' or 'direct', got {form!r}")
    if not is_observable(StateSpace(p.A2, p.B2, p.C2)):
        raise DesignError("(A2, C2) is not observable; cannot place poles")
    dx = p.tau / grid
    xs = np.arange(grid + 1) * dx
    c1s = measured_combination(p)
    if form == "conjugated":
        f = place_observer_poles(p.A2, p.C2, plant_poles)
        f2 = -expm(p.A2, p.tau) @ f
        # F1(x) = (S F2)(x) = C2 exp(A2 (tau - x)) F
        f1 = np.array([(p.C2 @ expm(p.A2, p.tau - x) @ f)[0, 0] for x in xs])
    else:
        f2 = place_observer_poles(p.A2, c1s, plant_poles)
        f = -expm(p.A2, -p.tau) @ f2
        # F1(x) = (S F2)(x) = -C2 exp(-A2 x) F2
        f1 = np.array([-(p.C2 @ expm(p.A2, -x) @ f2)[0, 0] for x in xs])
    closed = p.A2 + f2 @ c1s
    margin = eigenvalues(closed).stability_margin
    if margin >= 0:
        raise NumericalError(
            f"A2 + F2 C1 S failed the stability check (margin {margin:.3g}); "
            "the plant pole set must lie in the open left half-plane")
    return DelayObserverGains(F=f, F2=f2,
                              F1=engine.SpatialFunction(p.tau, f1), form=form)


def simulate_delay_observer(p: DelayPlant, gains: DelayObserverGains, u,
                            x2_0, w_0: engine.SpatialFunction,
                            xhat_0, what_0: engine.SpatialFunction,
                            cfg: engine.SimConfig,
                            snapshot_times=()) -> engine.Trajectory:
    """Co-simulate the delayed plant and its observer.

    The delay line advances by first-order upwind (CFL dt <= dx), the ODE
    blocks by RK4 at the same step.  ``u`` is a callable t -> input.
    Recorded series: ``err_plant_2norm``, ``err_delay_L2norm``,
    ``err_total``.
    """
    if len(w_0) != len(what_0) or w_0.domain_length != what_0.domain_length:
        raise DimensionError("w_0 and what_0 must share one grid")
    grid = len(w_0) - 1
    dx = p.tau / grid
    if cfg.dt > dx * (1 + 1e-12):
        raise engine.ConfigurationError(
            f"upwind CFL requires dt <= dx = {dx:.3e}, got dt = {cfg.dt:.3e}")
    f1 = gains.F1.samples
    if f1.shape[0] != grid + 1:
        raise DimensionError(
            f"spatial gain sampled on {f1.shape[0]} points but the delay "
            f"grid has {grid + 1}; redesign with grid={grid}")
    f2 = gains.F2.ravel()
    x2 = np.asarray(x2_0, dtype=float).ravel().copy()
    xh = np.asarray(xhat_0, dtype=float).ravel().copy()
    w = w_0.samples.astype(float).copy()
    wh = what_0.samples.astype(float).copy()
    nsteps = int(round(cfg.T / cfg.dt))
    xs = np.arange(grid + 1) * dx
    rec = engine.TrajectoryRecorder(
        ["err_plant_2norm", "err_delay_L2norm", "err_total"],
        snapshot_x=xs, snapshot_times=snapshot_times)
    for k in range(nsteps + 1):
        t = k * cfg.dt
        if k % cfg.record_every == 0 or k == nsteps:
            e2 = float(np.linalg.norm(x2 - xh))
            ew = engine.l2_norm(w - wh, dx)
            rec.record(t, err_plant_2norm=e2, err_delay_L2norm=ew,
                       err_total=e2 + ew)
        if rec.snapshot_due(t, cfg.dt):
            rec.snapshot(t, {"w": w, "what": wh, "err": w - wh})
        if k == nsteps:
            break
        uin = np.atleast_1d(np.asarray(u(t), dtype=float))
        innov = w[-1] - wh[-1]  # y - yhat at the outflow
        w_new = engine.step_transport_upwind(w, 0.0, cfg.dt, dx)
        wh_new = engine.step_transport_upwind(wh, 0.0, cfg.dt, dx)
        wh_new[1:] -= cfg.dt * f1[1:] * innov  # injection -F1(x)(y - yhat)
        x2 = engine.step_ode(x2, p.A2, p.B2 @ uin, cfg.dt)
        xh = engine.step_ode(xh, p.A2, p.B2 @ uin + f2 * innov, cfg.dt)
        w_new[0] = (p.C2 @ x2)[0]
        wh_new[0] = (p.C2 @ xh)[0]
        w, wh = w_new, wh_new
    return rec.build()
