"""Observer design for an unstable heat plant seen through ODE sensor
dynamics.

The plant w_t = w_xx + mu w on (0, 1) with w(0) = 0 and actuated Neumann
boundary w_x(1) = u drives an m-dimensional sensor v' = A1 v + B1 w(1, t)
whose output y = C1 v is the only measurement.  The decoupling Sylvester
equation reduces to a vector two-point boundary value problem in x whose
closed form, evaluated strictly through G^2 = A1 + F0 C1 - mu, is

    s(x) = x * sinhc(xG) * cosh(G)^{-1} * B1 .

Stabilizing the plant-side error operator needs feedback on the finitely
many unstable eigenmodes only: with eigenpairs lambda_n = (n - 1/2)^2 pi^2,
phi_n = sqrt(2) sin(sqrt(lambda_n) x), place L on the N x N truncation
(diag(-lambda_n + mu), [gamma_n]) where gamma_n are the modal coefficients
of C1 s, then inject F2(x) = sum l_n phi_n(x) and F1 = F0 + int s F2 dx.
All remaining modes keep their (stable) eigenvalues -lambda_j + mu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from . import engine
from .exceptions import DesignError, DimensionError
from .linalg import (Spectrum, as_matrix, cosh_sinhc_pair, eigenvalues,
                     is_hurwitz, min_eigenvalue_gap)
from .design import place_observer_poles

__all__ = [
    "HeatPlant",
    "ModalTruncation",
    "HeatObserverGains",
    "mode_frequency",
    "mode_shape",
    "count_unstable_modes",
    "sylvester_kernel",
    "modal_coefficients",
    "design_heat_observer",
    "truncated_closed_loop_spectrum",
    "simulate_heat_observer",
]

#: how many plant eigenvalues are screened against sigma(A1 + F0 C1)
#: when checking that cosh(G) is invertible
N_SCREEN = 50

#: relative threshold below which a modal coefficient counts as zero
GAMMA_RTOL = 1e-10


@dataclass(frozen=True)
class HeatPlant:
    """Instability parameter mu > 0 and the sensor triple (A1, B1, C1)."""

    mu: float
    A1: np.ndarray
    B1: np.ndarray
    C1: np.ndarray

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        a1 = as_matrix(self.A1, "A1")
        b1 = as_matrix(self.B1, "B1")
        c1 = as_matrix(self.C1, "C1")
        m = a1.shape[0]
        if a1.shape[1] != m:
            raise DimensionError(f"A1 must be square, got {a1.shape}")
        if b1.shape != (m, 1):
            raise DimensionError(f"B1 must be {m}x1, got {b1.shape}")
        if c1.shape != (1, m):
            raise DimensionError(f"C1 must be 1x{m}, got {c1.shape}")
        object.__setattr__(self, "A1", a1)
        object.__setattr__(self, "B1", b1)
        object.__setattr__(self, "C1", c1)

    @property
    def m(self) -> int:
        return self.A1.shape[0]


def mode_frequency(n: int) -> float:
    """Plant eigenvalue magnitude lambda_n = (n - 1/2)^2 pi^2."""
    return (n - 0.5) ** 2 * np.pi ** 2


def mode_shape(n: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal eigenfunction phi_n(x) = sqrt(2) sin(sqrt(lambda_n) x)."""
    return np.sqrt(2.0) * np.sin(np.sqrt(mode_frequency(n)) * x)


def count_unstable_modes(mu: float) -> int:
    """Number of modes with -lambda_n + mu >= 0."""
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    # lambda_n <= mu  <=>  n <= 1/2 + sqrt(mu)/pi
    return int(np.floor(0.5 + np.sqrt(mu) / np.pi))


@dataclass(frozen=True)
class ModalTruncation:
    """Data of the N-mode truncation used for plant-side placement.

    ``c1s`` keeps the sampled measured kernel C1 s(x) so that higher modal
    coefficients can be recovered later (spectral verification).
    """

    N: int
    lam: np.ndarray
    gamma: np.ndarray
    L: np.ndarray
    Lambda_N: np.ndarray
    Gamma_N: np.ndarray
    c1s: engine.SpatialFunction

    def __post_init__(self):
        if self.N and np.any(np.abs(self.gamma) <= 0.0):
            raise DesignError("modal truncation with vanishing gamma_n")


@dataclass(frozen=True)
class HeatObserverGains:
    """Design output: sensor gain F1, spatial plant gain F2, truncation."""

    F0: np.ndarray
    F1: np.ndarray
    F2: engine.SpatialFunction
    mt: ModalTruncation


def sylvester_kernel(p: HeatPlant, f0, grid: int = 100) -> engine.SpatialFunction:
    """Sample s(x) = x sinhc(xG) cosh(G)^{-1} B1 on grid+1 points of [0, 1].

    ``G^2 = A1 + F0 C1 - mu`` and both matrix functions are evaluated from
    G^2 by even series, so no square root is formed.  s(0) = 0 exactly and
    s'(1) = B1 up to the sampling resolution.  Raises
    :class:`DesignError` when cosh(G) is (numerically) singular, which
    happens exactly when sigma(A1 + F0 C1) touches a plant eigenvalue.
    """
    f0 = as_matrix(f0, "F0")
    if f0.shape != (p.m, 1):
        raise DimensionError(f"F0 must be {p.m}x1, got {f0.shape}")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    closed = p.A1 + f0 @ p.C1
    if not is_hurwitz(closed, margin=1e-12):
        raise DesignError("A1 + F0 C1 must be Hurwitz; adjust F0")
    plant_eigs = np.diag([-mode_frequency(n) + p.mu for n in range(1, N_SCREEN + 1)])
    gap, eig = min_eigenvalue_gap(closed, plant_eigs)
    if gap < 1e-8 * max(np.linalg.norm(closed), 1.0):
        raise DesignError(
            f"sigma(A1 + F0 C1) touches the plant eigenvalue {eig.real:.6g}; "
            "cosh(G) is singular there, choose a different F0")
    g2 = closed - p.mu * np.eye(p.m)
    cosh_g, _ = cosh_sinhc_pair(g2, 1.0)
    rhs = np.linalg.solve(cosh_g, p.B1).ravel()
    xs = np.linspace(0.0, 1.0, grid + 1)
    samples = np.empty((grid + 1, p.m))
    for k, x in enumerate(xs):
        _, sinhc = cosh_sinhc_pair(g2, x)
        samples[k] = x * (sinhc @ rhs)
    return engine.SpatialFunction(1.0, samples)


def modal_coefficients(c1s: engine.SpatialFunction, n_max: int) -> np.ndarray:
    """Coefficients gamma_n = int_0^1 C1 s(x) phi_n(x) dx, n = 1..n_max.

    Composite Simpson quadrature on the sample grid; the kernel should be
    sampled on at least 64 points for the advertised accuracy.
    """
    if c1s.samples.ndim != 1:
        raise DimensionError("c1s must be scalar-valued")
    if len(c1s) < 65:
        raise DimensionError(f"need >= 65 sample points, got {len(c1s)}")
    xs = c1s.x
    return np.array([simpson(c1s.samples * mode_shape(n, xs), x=xs)
                     for n in range(1, n_max + 1)])


def design_heat_observer(p: HeatPlant, f0, modal_poles,
                         grid: int = 100) -> HeatObserverGains:
    """Design the heat observer gains from F0 and the modal pole set.

    ``modal_poles`` must contain exactly N = count_unstable_modes(mu)
    values (the spectrum assigned to the truncated plant-side block); all
    gamma_n, n <= N must be nonzero or the design fails with
    :class:`DesignError` (loss of observability through the sensor).
    """
    f0 = as_matrix(f0, "F0")
    n_unstable = count_unstable_modes(p.mu)
    modal_poles = np.atleast_1d(np.asarray(modal_poles, dtype=complex))
    if modal_poles.shape != (n_unstable,):
        raise ValueError(
            f"need exactly {n_unstable} modal poles for mu = {p.mu}, "
            f"got {modal_poles.shape[0]}")
    s = sylvester_kernel(p, f0, grid)
    c1s = engine.SpatialFunction(1.0, s.samples @ p.C1.ravel())
    xs = c1s.x
    lam = np.array([mode_frequency(n) for n in range(1, n_unstable + 1)])
    if n_unstable == 0:
        mt = ModalTruncation(N=0, lam=lam, gamma=np.empty(0),
                             L=np.empty((0, 1)), Lambda_N=np.empty((0, 0)),
                             Gamma_N=np.empty((1, 0)), c1s=c1s)
        f2 = engine.SpatialFunction(1.0, np.zeros(grid + 1))
        return HeatObserverGains(F0=f0, F1=f0.ravel().copy(), F2=f2, mt=mt)
    gamma = modal_coefficients(c1s, n_unstable)
    scale = max(np.max(np.abs(c1s.samples)), 1.0)
    dead = np.nonzero(np.abs(gamma) <= GAMMA_RTOL * scale)[0]
    if dead.size:
        raise DesignError(
            f"modal coefficient gamma_{dead[0] + 1} vanishes: mode "
            f"{dead[0] + 1} is unobservable through the sensor dynamics")
    lambda_n = np.diag(-lam + p.mu)
    gamma_row = gamma.reshape(1, -1)
    l_col = place_observer_poles(lambda_n, gamma_row, modal_poles)
    mt = ModalTruncation(N=n_unstable, lam=lam, gamma=gamma, L=l_col,
                         Lambda_N=lambda_n, Gamma_N=gamma_row, c1s=c1s)
    f2_samples = np.zeros(grid + 1)
    for n in range(1, n_unstable + 1):
        f2_samples += l_col[n - 1, 0] * mode_shape(n, xs)
    f2 = engine.SpatialFunction(1.0, f2_samples)
    # F1 = F0 + int_0^1 s(x) F2(x) dx, componentwise Simpson
    corr = np.array([simpson(s.samples[:, i] * f2_samples, x=xs)
                     for i in range(p.m)])
    f1 = f0.ravel() + corr
    return HeatObserverGains(F0=f0, F1=f1, F2=f2, mt=mt)


def truncated_closed_loop_spectrum(p: HeatPlant, mt: ModalTruncation,
                                   n_modes: int) -> Spectrum:
    """Spectrum of the plant-side error operator truncated to n_modes.

    The modal dynamics of the closed plant-side block are
    z_n' = (-lambda_n + mu) z_n + l_n sum_j gamma_j z_j with l_n = 0 for
    n > N, so the truncated matrix is block upper triangular and its
    spectrum is sigma(Lambda_N + L Gamma_N) together with the untouched
    -lambda_j + mu for N < j <= n_modes.
    """
    if n_modes < mt.N + 1:
        raise ValueError(f"n_modes must be >= N + 1 = {mt.N + 1}")
    gamma = modal_coefficients(mt.c1s, n_modes)
    if mt.N:
        gamma[:mt.N] = mt.gamma  # keep the exact design-time values
    diag = np.array([-mode_frequency(n) + p.mu for n in range(1, n_modes + 1)])
    mat = np.diag(diag)
    l_full = np.zeros(n_modes)
    l_full[:mt.N] = mt.L.ravel()
    mat += np.outer(l_full, gamma)
    return eigenvalues(mat)


def simulate_heat_observer(p: HeatPlant, gains: HeatObserverGains, u,
                           v0, w0: engine.SpatialFunction,
                           vhat0, what0: engine.SpatialFunction,
                           cfg: engine.SimConfig,
                           snapshot_times=()) -> engine.Trajectory:
    """Co-simulate the heat plant, sensor, and observer.

    FTCS for both PDE fields (stability bound checked before stepping),
    RK4 for the ODE blocks at the same step.  ``u`` is a callable
    t -> Neumann actuation at x = 1.  Recorded series:
    ``err_sensor_2norm``, ``err_pde_L2norm``, ``err_total``.
    """
    if len(w0) != len(what0):
        raise DimensionError("w0 and what0 must share one grid")
    grid = len(w0) - 1
    dx = 1.0 / grid
    if cfg.dt > engine.heat_step_limit(dx, p.mu) * (1 + 1e-12):
        raise engine.ConfigurationError(
            f"FTCS stability requires dt <= {engine.heat_step_limit(dx, p.mu):.3e} "
            f"for dx = {dx:.3e}, mu = {p.mu}; got dt = {cfg.dt:.3e}")
    f2 = gains.F2.samples
    if f2.shape[0] != grid + 1:
        raise DimensionError(
            f"F2 sampled on {f2.shape[0]} points but the grid has {grid + 1}; "
            f"redesign with grid={grid}")
    f1 = gains.F1.ravel()
    a1, b1, c1 = p.A1, p.B1.ravel(), p.C1.ravel()
    v = np.asarray(v0, dtype=float).ravel().copy()
    vh = np.asarray(vhat0, dtype=float).ravel().copy()
    w = w0.samples.astype(float).copy()
    wh = what0.samples.astype(float).copy()
    zero_forcing = np.zeros(grid + 1)
    xs = np.linspace(0.0, 1.0, grid + 1)
    nsteps = int(round(cfg.T / cfg.dt))
    rec = engine.TrajectoryRecorder(
        ["err_sensor_2norm", "err_pde_L2norm", "err_total"],
        snapshot_x=xs, snapshot_times=snapshot_times)
    for k in range(nsteps + 1):
        t = k * cfg.dt
        if k % cfg.record_every == 0 or k == nsteps:
            ev = float(np.linalg.norm(v - vh))
            ew = engine.l2_norm(w - wh, dx)
            rec.record(t, err_sensor_2norm=ev, err_pde_L2norm=ew,
                       err_total=ev + ew)
        if rec.snapshot_due(t, cfg.dt):
            rec.snapshot(t, {"w": w, "what": wh, "err": w - wh})
        if k == nsteps:
            break
        un = float(u(t))
        innov = float(c1 @ (v - vh))  # y - C1 vhat
        v_new = engine.step_ode(v, a1, b1 * w[-1], cfg.dt)
        w_new = engine.step_heat_ftcs(w, p.mu, zero_forcing, un, cfg.dt, dx)
        vh_new = engine.step_ode(vh, a1, b1 * wh[-1] - f1 * innov, cfg.dt)
        wh_new = engine.step_heat_ftcs(wh, p.mu, f2 * innov, un, cfg.dt, dx)
        v, w, vh, wh = v_new, w_new, vh_new, wh_new
    return rec.build()
