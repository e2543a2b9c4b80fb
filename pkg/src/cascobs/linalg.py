"""Dense matrix primitives used by all design modules.

Everything here operates on plain numpy arrays.  Matrices entering the
public API are validated with :func:`as_matrix` (2-D, finite entries).
Eigenvalues and matrix exponentials are delegated to LAPACK via
numpy/scipy; the even function pair cosh(xG), sinh(xG)/(xG) is evaluated
from G^2 alone by its even power series, so no matrix square root is ever
formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, NumericalError

__all__ = [
    "Spectrum",
    "as_matrix",
    "eigenvalues",
    "expm",
    "cosh_sinhc_pair",
    "is_hurwitz",
    "spectra_disjoint",
    "min_eigenvalue_gap",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a 2-D array with finite entries."""
    m = np.atleast_2d(np.asarray(a))
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise NumericalError(f"{name} contains non-finite entries")
    if not np.issubdtype(m.dtype, np.number):
        raise DimensionError(f"{name} must be numeric, got dtype {m.dtype}")
    return m


def _require_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix together with the largest real part.

    ``stability_margin`` is max(Re lambda): negative for Hurwitz matrices.
    """

    eigenvalues: np.ndarray
    stability_margin: float

    def __len__(self):
        return len(self.eigenvalues)


def eigenvalues(m) -> Spectrum:
    """All eigenvalues of a square matrix, with algebraic multiplicity."""
    m = _require_square(m)
    if m.size == 0:
        return Spectrum(np.empty(0, dtype=complex), float("-inf"))
    try:
        vals = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:  # QR iteration failure
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    return Spectrum(vals, float(vals.real.max()))


def expm(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(m * t)`` (scaling-and-squaring Pade)."""
    m = _require_square(m)
    out = scipy.linalg.expm(m * t)
    if not np.all(np.isfinite(out)):
        raise NumericalError(
            f"expm overflowed for ||M t|| = {np.linalg.norm(m * t):.3g}")
    return out


def cosh_sinhc_pair(m2, x: float, rel_tol: float = 1e-14,
                    max_terms: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate cosh(xG) and sinh(xG)/(xG) given ``m2`` = G^2.

    Both functions are even entire functions of G, hence analytic in G^2,
    and are summed as power series in x^2 * m2:

        cosh(xG)      = sum_k (x^2 m2)^k / (2k)!
        sinh(xG)/(xG) = sum_k (x^2 m2)^k / (2k+1)!

    The series stops once both term norms fall below ``rel_tol`` times the
    partial-sum norms.  The sinhc factor equals the identity at x = 0.
    """
    m2 = _require_square(m2, "m2")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    n = m2.shape[0]
    eye = np.eye(n, dtype=m2.dtype)
    arg = (x * x) * m2
    cosh_part = eye.copy()
    sinhc_part = eye.copy()
    term = eye.copy()
    for k in range(1, max_terms + 1):
        term = term @ arg
        c_term = term / math.factorial(2 * k)
        s_term = term / math.factorial(2 * k + 1)
        cosh_part = cosh_part + c_term
        sinhc_part = sinhc_part + s_term
        c_done = np.linalg.norm(c_term) <= rel_tol * np.linalg.norm(cosh_part)
        s_done = np.linalg.norm(s_term) <= rel_tol * np.linalg.norm(sinhc_part)
        if c_done and s_done:
            return cosh_part, sinhc_part
    raise NumericalError(
        f"even series did not converge within {max_terms} terms "
        f"(||x^2 m2|| = {np.linalg.norm(arg):.3g})")


def is_hurwitz(m, margin: float) -> bool:
    """True iff every eigenvalue satisfies Re(lambda) <= -margin, margin > 0."""
    if margin <= 0:
        raise ValueError(f"margin must be > 0, got {margin}")
    return eigenvalues(m).stability_margin <= -margin


def min_eigenvalue_gap(m1, m2) -> tuple[float, complex]:
    """Smallest pairwise distance between the spectra of m1 and m2.

    Returns ``(gap, eigenvalue_of_m2)`` where the eigenvalue achieves the
    minimum; useful for reporting near-collisions.
    """
    e1 = eigenvalues(m1).eigenvalues
    e2 = eigenvalues(m2).eigenvalues
    dist = np.abs(e1[:, None] - e2[None, :])
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return float(dist[i, j]), complex(e2[j])


def spectra_disjoint(m1, m2, tol: float) -> bool:
    """True iff every eigenvalue pair of (m1, m2) is more than ``tol`` apart."""
    gap, _ = min_eigenvalue_gap(m1, m2)
    return gap > tol
