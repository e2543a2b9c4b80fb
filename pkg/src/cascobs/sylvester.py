"""Finite-dimensional Sylvester equations A S - S B = C.

The production solver is Schur-based (Bartels-Stewart, via
``scipy.linalg.solve_sylvester``); a dense Kronecker-vectorization solver
is kept as an independent cross-check for tests.  A solution exists and is
unique iff the spectra of A and B are disjoint, so both solvers refuse
near-collisions up front instead of returning an ill-conditioned answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, UnsolvableError
from .linalg import as_matrix, min_eigenvalue_gap

__all__ = [
    "SylvesterProblem",
    "solve_sylvester",
    "solve_sylvester_kron",
    "sylvester_residual",
]

#: relative eigenvalue-gap threshold below which the problem is reported
#: unsolvable rather than silently ill-conditioned
GAP_RTOL = 1e-8

#: largest n1*n2 accepted by the dense Kronecker solver
KRON_MAX_SIZE = 400


@dataclass(frozen=True)
class SylvesterProblem:
    """The data (A, B, C) of the equation A S - S B = C."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        if a.shape[0] != a.shape[1]:
            raise DimensionError(f"A must be square, got {a.shape}")
        if b.shape[0] != b.shape[1]:
            raise DimensionError(f"B must be square, got {b.shape}")
        if c.shape != (a.shape[0], b.shape[0]):
            raise DimensionError(
                f"C must be {a.shape[0]}x{b.shape[0]}, got {c.shape}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)


def _check_solvable(p: SylvesterProblem) -> None:
    scale = max(np.linalg.norm(p.A), np.linalg.norm(p.B), 1e-300)
    gap, eig = min_eigenvalue_gap(p.A, p.B)
    if gap < GAP_RTOL * scale:
        raise UnsolvableError(
            f"spectra of A and B (nearly) intersect: eigenvalue {eig:.6g} "
            f"of B is within {gap:.3g} of the spectrum of A")


def solve_sylvester(p: SylvesterProblem) -> np.ndarray:
    """Solve A S - S B = C by the Schur-based (Bartels-Stewart) method.

    Raises :class:`UnsolvableError` when the eigenvalue gap between A and B
    falls below ``GAP_RTOL * max(||A||, ||B||)``.
    """
    _check_solvable(p)
    # scipy solves A X + X B = Q, so negate B
    s = scipy.linalg.solve_sylvester(p.A, -p.B, p.C)
    return s


def solve_sylvester_kron(p: SylvesterProblem) -> np.ndarray:
    """Solve the vectorized system (I (x) A - B^T (x) I) vec(S) = vec(C).

    Dense O((n1 n2)^3) solve, restricted to n1 * n2 <= 400.  Used as an
    independent cross-check of :func:`solve_sylvester`.
    """
    n1 = p.A.shape[0]
    n2 = p.B.shape[0]
    if n1 * n2 > KRON_MAX_SIZE:
        raise DimensionError(
            f"dense Kronecker solve limited to n1*n2 <= {KRON_MAX_SIZE}, "
            f"got {n1 * n2}")
    _check_solvable(p)
    big = np.kron(np.eye(n2), p.A) - np.kron(p.B.T, np.eye(n1))
    try:
        vec = np.linalg.solve(big, p.C.flatten(order="F"))
    except np.linalg.LinAlgError as exc:
        raise UnsolvableError(f"vectorized Sylvester system is singular: {exc}") from exc
    return vec.reshape((n1, n2), order="F")


def sylvester_residual(p: SylvesterProblem, s) -> float:
    """Frobenius norm of A S - S B - C."""
    s = as_matrix(s, "S")
    if s.shape != (p.A.shape[0], p.B.shape[0]):
        raise DimensionError(
            f"S must be {p.A.shape[0]}x{p.B.shape[0]}, got {s.shape}")
    return float(np.linalg.norm(p.A @ s - s @ p.B - p.C))
