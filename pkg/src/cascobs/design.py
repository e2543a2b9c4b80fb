"""Observer design for finite-dimensional cascade systems.

A cascade couples a plant into sensor dynamics carrying the only
measurement:

    x1' = A1 x1 + B1 C2 x2        (sensor, measured: y = C1 x1)
    x2' = A2 x2 + B2 u            (plant)

The observer copies both blocks and injects the output error with gains
(F1, F2).  Gains are selected by decoupling the error system through a
Sylvester solve:

    (a) place F0 so that A1 + F0 C1 is Hurwitz,
    (b) solve (A1 + F0 C1) S - S A2 = B1 C2,
    (c) place F2 so that A2 + F2 (C1 S) is Hurwitz,
    (d) set F1 = F0 + S F2.

With these gains the error-system matrix is similar, via the block map
[[I, S], [0, I]], to a lower block-triangular matrix whose diagonal
blocks are A1 + F0 C1 and A2 + F2 C1 S, so the error decays at the rate
of the placed spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .exceptions import DesignError, DimensionError, SpectralOverlapError
from .linalg import as_matrix, eigenvalues, min_eigenvalue_gap
from .sylvester import GAP_RTOL, SylvesterProblem, solve_sylvester

__all__ = [
    "StateSpace",
    "CascadeSystem",
    "ObserverGains",
    "observability_matrix",
    "is_observable",
    "place_observer_poles",
    "check_cascade_observability",
    "design_cascade_gains",
    "error_system_matrix",
    "block_decoupling_defect",
    "simulate_cascade_observer",
]

#: relative singular-value cutoff for all rank decisions
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class StateSpace:
    """A state-space triple (A, B, C)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {b.shape}")
        if c.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {c.shape}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class CascadeSystem:
    """Sensor dynamics driven by a plant through the coupling B1 C2.

    ``sensor`` holds (A1, B1, C1) where B1 receives the plant output C2 x2
    and C1 produces the only measurement; ``plant`` holds (A2, B2, C2).
    """

    sensor: StateSpace
    plant: StateSpace

    def __post_init__(self):
        if self.sensor.B.shape[1] != self.plant.C.shape[0]:
            raise DimensionError(
                f"interconnection mismatch: B1 has {self.sensor.B.shape[1]} "
                f"columns but C2 has {self.plant.C.shape[0]} rows")

    @property
    def n1(self) -> int:
        return self.sensor.n

    @property
    def n2(self) -> int:
        return self.plant.n

    @property
    def p(self) -> int:
        """Number of measured outputs."""
        return self.sensor.C.shape[0]

    def coupling(self) -> np.ndarray:
        """The interconnection matrix B1 C2."""
        return self.sensor.B @ self.plant.C


@dataclass(frozen=True)
class ObserverGains:
    """Gains produced by :func:`design_cascade_gains`.

    F1 always equals F0 + S F2; the two closed blocks A1 + F0 C1 and
    A2 + F2 C1 S are Hurwitz by construction.
    """

    F0: np.ndarray
    S: np.ndarray
    F2: np.ndarray
    F1: np.ndarray

    def __post_init__(self):
        for name in ("F0", "S", "F2", "F1"):
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        if not np.array_equal(self.F1, self.F0 + self.S @ self.F2):
            raise ValueError("F1 must equal F0 + S F2 exactly")


def observability_matrix(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Stacked [C; CA; ...; CA^(n-1)]."""
    blocks = [c]
    for _ in range(a.shape[0] - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


def _rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    sv = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def is_observable(sys: StateSpace) -> bool:
    """Kalman rank test on (A, C) with a relative SVD cutoff."""
    return _rank(observability_matrix(sys.A, sys.C)) == sys.n


def place_observer_poles(a, c, desired) -> np.ndarray:
    """Gain F (n x 1) with the spectrum of A + F C at ``desired``.

    Single-output Ackermann formula applied to the transposed pair; the
    desired multiset must be closed under conjugation and have length n.
    """
    a = as_matrix(a, "A")
    c = as_matrix(c, "C")
    n = a.shape[0]
    if c.shape != (1, n):
        raise DimensionError(
            f"single-output placement needs C of shape (1, {n}), got {c.shape}")
    desired = np.atleast_1d(np.asarray(desired, dtype=complex))
    if desired.shape != (n,):
        raise ValueError(f"need exactly {n} poles, got {desired.shape}")
    poly = np.poly(desired)
    if np.abs(poly.imag).max() > 1e-9 * max(1.0, np.abs(poly.real).max()):
        raise ValueError("desired poles are not closed under conjugation")
    poly = poly.real
    if not is_observable(StateSpace(a, np.zeros((n, 0)), c)):
        raise DesignError("pair (A, C) is not observable; cannot place poles")
    at = a.T
    bt = c.T
    ctrb = np.hstack([np.linalg.matrix_power(at, k) @ bt for k in range(n)])
    # q(A^T) by Horner on the desired characteristic polynomial
    q = np.zeros((n, n))
    for coeff in poly:
        q = q @ at + coeff * np.eye(n)
    last_row = np.zeros(n)
    last_row[-1] = 1.0
    f = -(np.linalg.solve(ctrb.T, last_row) @ q).reshape(n, 1)
    achieved = eigenvalues(a + f @ c).eigenvalues
    if _multiset_distance(achieved, desired) > 1e-6 * max(1.0, np.abs(desired).max()):
        raise DesignError(
            f"pole placement is ill-conditioned: achieved {np.sort_complex(achieved)} "
            f"for target {np.sort_complex(desired)}")
    return f


def _multiset_distance(xs: np.ndarray, ys: np.ndarray) -> float:
    """Greedy matching distance between two equal-length eigenvalue sets."""
    ys = list(ys)
    worst = 0.0
    for x in xs:
        d = [abs(x - y) for y in ys]
        i = int(np.argmin(d))
        worst = max(worst, d[i])
        ys.pop(i)
    return worst


def _eigen_clusters(a: np.ndarray, tol: float) -> list[complex]:
    """Distinct eigenvalues of ``a`` after merging clusters within ``tol``."""
    vals = sorted(eigenvalues(a).eigenvalues, key=lambda z: (z.real, z.imag))
    reps: list[complex] = []
    for v in vals:
        if not reps or abs(v - reps[-1]) > tol:
            reps.append(complex(v))
    return reps


def check_cascade_observability(sys: CascadeSystem) -> bool:
    """Factored observability test for the cascade.

    The cascade is observable iff (A1, C1) is observable and, for every
    eigenvalue lambda of A2, no eigenvector of A2 is annihilated by
    C1 (lambda - A1)^{-1} B1 C2.  Requires disjoint spectra of A1 and A2;
    raises :class:`SpectralOverlapError` otherwise.
    """
    a1, c1 = sys.sensor.A, sys.sensor.C
    a2 = sys.plant.A
    scale = max(np.linalg.norm(a1), np.linalg.norm(a2), 1.0)
    gap, eig = min_eigenvalue_gap(a1, a2)
    if gap < GAP_RTOL * scale:
        raise SpectralOverlapError(
            f"spectra of A1 and A2 overlap near {eig:.6g}; the factored "
            "test requires disjoint spectra", eigenvalue=eig)
    if not is_observable(sys.sensor):
        return False
    coupling = sys.coupling()
    n1, n2 = sys.n1, sys.n2
    for lam in _eigen_clusters(a2, tol=1e-8 * scale):
        # eigenbasis of A2 at lam
        u, sv, vh = np.linalg.svd(lam * np.eye(n2) - a2)
        null_dim = int(np.sum(sv <= 1e-8 * max(sv[0], 1.0)))
        if null_dim == 0:
            continue
        basis = vh.conj().T[:, n2 - null_dim:]
        resp = c1 @ np.linalg.solve(lam * np.eye(n1) - a1, coupling @ basis)
        if _rank(resp) < null_dim:
            return False
    return True


def design_cascade_gains(sys: CascadeSystem, sensor_poles,
                         plant_poles) -> ObserverGains:
    """Run the four-step gain scheme on a finite-dimensional cascade.

    ``sensor_poles`` place A1 + F0 C1 and must avoid the spectrum of A2;
    a collision raises :class:`SpectralOverlapError` naming the offending
    eigenvalue so the caller can shift its choice (poles are never
    silently perturbed).  ``plant_poles`` place A2 + F2 C1 S.
    """
    a1, c1 = sys.sensor.A, sys.sensor.C
    a2 = sys.plant.A
    if not np.any(sys.coupling()):
        # no information path from the plant to the measurement: the plant
        # error decays open loop, so the design degenerates to F2 = 0 and
        # is feasible only for an already-stable plant
        if eigenvalues(a2).stability_margin >= 0:
            raise DesignError(
                "zero interconnection B1 C2 with an unstable plant: the "
                "plant state cannot be reconstructed from the sensor output")
        f0 = place_observer_poles(a1, c1, sensor_poles)
        zero_s = np.zeros((sys.n1, sys.n2))
        zero_f2 = np.zeros((sys.n2, sys.p))
        return ObserverGains(F0=f0, S=zero_s, F2=zero_f2, F1=f0.copy())
    if not _cascade_observable_any(sys):
        raise DesignError(
            "cascade is not observable: the plant state cannot be "
            "reconstructed from the sensor output")
    f0 = place_observer_poles(a1, c1, sensor_poles)
    closed1 = a1 + f0 @ c1
    scale = max(np.linalg.norm(closed1), np.linalg.norm(a2), 1.0)
    gap, eig = min_eigenvalue_gap(closed1, a2)
    if gap < GAP_RTOL * scale:
        raise SpectralOverlapError(
            f"sensor pole set collides with plant eigenvalue {eig:.6g} "
            f"(gap {gap:.3g}); shift sensor_poles and retry",
            eigenvalue=eig)
    s = solve_sylvester(SylvesterProblem(closed1, a2, sys.coupling()))
    c1s = c1 @ s
    if not is_observable(StateSpace(a2, np.zeros((sys.n2, 0)), c1s)):
        raise DesignError(
            "(A2, C1 S) is not observable: the plant is invisible through "
            "the sensor dynamics at some plant eigenvalue (transmission "
            "zero of the sensor at an eigenvalue of A2)")
    f2 = place_observer_poles(a2, c1s, plant_poles)
    f1 = f0 + s @ f2
    return ObserverGains(F0=f0, S=s, F2=f2, F1=f1)


def _cascade_observable_any(sys: CascadeSystem) -> bool:
    """Observability of the assembled cascade by the Kalman test.

    Used as the design precheck because it needs no spectral-disjointness
    precondition, unlike the factored test.
    """
    big_a = error_system_matrix(sys, f1=np.zeros((sys.n1, sys.p)),
                                f2=np.zeros((sys.n2, sys.p)))
    big_c = np.hstack([sys.sensor.C, np.zeros((sys.p, sys.n2))])
    return _rank(observability_matrix(big_a, big_c)) == sys.n1 + sys.n2


def error_system_matrix(sys: CascadeSystem, f1, f2) -> np.ndarray:
    """Matrix of the coupled observer-error dynamics.

    [[A1 + F1 C1,  B1 C2],
     [  -F2 C1,      A2 ]]
    """
    f1 = as_matrix(f1, "F1")
    f2 = as_matrix(f2, "F2")
    top = np.hstack([sys.sensor.A + f1 @ sys.sensor.C, sys.coupling()])
    bot = np.hstack([-f2 @ sys.sensor.C, sys.plant.A])
    return np.vstack([top, bot])


def block_decoupling_defect(sys: CascadeSystem, g: ObserverGains) -> float:
    """Frobenius distance of the transformed error matrix from block form.

    Conjugating the error-system matrix by [[I, S], [0, I]] must yield
    [[A1 + F0 C1, 0], [-F2 C1, A2 + F2 C1 S]]; the defect is zero exactly
    when S solves the decoupling Sylvester equation.
    """
    n1, n2 = sys.n1, sys.n2
    m_err = error_system_matrix(sys, g.F1, g.F2)
    trans = np.block([[np.eye(n1), g.S], [np.zeros((n2, n1)), np.eye(n2)]])
    trans_inv = np.block([[np.eye(n1), -g.S], [np.zeros((n2, n1)), np.eye(n2)]])
    c1s = sys.sensor.C @ g.S
    target = np.block([
        [sys.sensor.A + g.F0 @ sys.sensor.C, np.zeros((n1, n2))],
        [-g.F2 @ sys.sensor.C, sys.plant.A + g.F2 @ c1s],
    ])
    return float(np.linalg.norm(trans @ m_err @ trans_inv - target))


def simulate_cascade_observer(sys: CascadeSystem, g: ObserverGains, u,
                              x1_0, x2_0, xhat1_0, xhat2_0,
                              cfg: engine.SimConfig) -> engine.Trajectory:
    """Integrate the cascade and its observer with RK4 at step cfg.dt.

    ``u`` is a callable t -> input vector for the plant.  Recorded series:
    ``err_sensor_2norm``, ``err_plant_2norm``, ``err_total``.
    """
    if sys.p != 1:
        raise DimensionError("simulation assumes a single measured output")
    a1, c1 = sys.sensor.A, sys.sensor.C
    a2, b2 = sys.plant.A, sys.plant.B
    x1 = np.asarray(x1_0, dtype=float).ravel().copy()
    x2 = np.asarray(x2_0, dtype=float).ravel().copy()
    xh1 = np.asarray(xhat1_0, dtype=float).ravel().copy()
    xh2 = np.asarray(xhat2_0, dtype=float).ravel().copy()
    f1 = g.F1.ravel()
    f2 = g.F2.ravel()
    coupling = sys.coupling()
    nsteps = int(round(cfg.T / cfg.dt))
    rec = engine.TrajectoryRecorder(
        ["err_sensor_2norm", "err_plant_2norm", "err_total"])
    for k in range(nsteps + 1):
        t = k * cfg.dt
        if k % cfg.record_every == 0 or k == nsteps:
            e1 = float(np.linalg.norm(x1 - xh1))
            e2 = float(np.linalg.norm(x2 - xh2))
            rec.record(t, err_sensor_2norm=e1, err_plant_2norm=e2,
                       err_total=e1 + e2)
        if k == nsteps:
            break
        uin = np.atleast_1d(np.asarray(u(t), dtype=float))
        innov = c1 @ (x1 - xh1)  # y - C1 xhat1
        x1_new = engine.step_ode(x1, a1, coupling @ x2, cfg.dt)
        x2_new = engine.step_ode(x2, a2, b2 @ uin, cfg.dt)
        xh1_new = engine.step_ode(xh1, a1, coupling @ xh2 - f1 * innov[0], cfg.dt)
        xh2_new = engine.step_ode(xh2, a2, b2 @ uin + f2 * innov[0], cfg.dt)
        x1, x2, xh1, xh2 = x1_new, x2_new, xh1_new, xh2_new
    return rec.build()
