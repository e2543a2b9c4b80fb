import numpy as np
import pytest

from cascobs.exceptions import DimensionError, NumericalError
from cascobs.linalg import (cosh_sinhc_pair, eigenvalues, expm, is_hurwitz,
                            min_eigenvalue_gap, spectra_disjoint)

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])
JORDAN_NEG1 = np.array([[-1.0, -2.0], [0.0, -1.0]])


def sorted_eigs(m):
    return np.sort_complex(eigenvalues(m).eigenvalues)


class TestEigenvalues:
    def test_rotation_matrix(self):
        spec = eigenvalues(ROTATION)
        assert np.allclose(sorted_eigs(ROTATION), [-1j, 1j])
        assert abs(spec.stability_margin) < 1e-12

    def test_double_pole(self):
        spec = eigenvalues(JORDAN_NEG1)
        assert np.allclose(spec.eigenvalues, [-1.0, -1.0])
        assert spec.stability_margin == pytest.approx(-1.0)

    def test_scalar(self):
        spec = eigenvalues([[5.0]])
        assert np.allclose(spec.eigenvalues, [5.0])
        assert spec.stability_margin == pytest.approx(5.0)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            eigenvalues(np.ones((2, 3)))

    def test_similarity_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n = rng.integers(2, 6)
            m = rng.normal(size=(n, n))
            p = np.eye(n) + 0.3 * rng.normal(size=(n, n))
            conj = p @ m @ np.linalg.inv(p)
            a = sorted(eigenvalues(m).eigenvalues, key=lambda z: (z.real, z.imag))
            b = sorted(eigenvalues(conj).eigenvalues, key=lambda z: (z.real, z.imag))
            assert np.max(np.abs(np.array(a) - np.array(b))) < 1e-8


class TestExpm:
    def test_zero_matrix(self):
        assert np.allclose(expm(np.zeros((3, 3)), 1.0), np.eye(3))

    def test_rotation_by_pi(self):
        assert np.allclose(expm(ROTATION, np.pi), -np.eye(2), atol=1e-12)

    def test_scalar(self):
        assert expm([[0.7]], 2.0)[0, 0] == pytest.approx(np.exp(1.4))

    def test_semigroup_property(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = rng.integers(1, 6)
            m = rng.normal(size=(n, n))
            m *= 5.0 / max(np.linalg.norm(m), 5.0)
            s, t = rng.uniform(0.1, 2.0, size=2)
            full = expm(m, s + t)
            split = expm(m, s) @ expm(m, t)
            assert np.linalg.norm(full - split) <= 1e-10 * np.linalg.norm(full)


class TestCoshSinhcPair:
    def test_zero_argument(self):
        c, s = cosh_sinhc_pair(np.zeros((2, 2)), 0.7)
        assert np.allclose(c, np.eye(2))
        assert np.allclose(s, np.eye(2))

    def test_scalar(self):
        c, s = cosh_sinhc_pair(np.array([[1.0]]), 1.0)
        assert c[0, 0] == pytest.approx(np.cosh(1.0))
        assert s[0, 0] == pytest.approx(np.sinh(1.0))

    def test_jordan_block_against_closed_form(self):
        # exact values for G^2 = [[-5,-2],[0,-5]] via f(G^2) = f(-5)I + f'(-5)N
        m2 = np.array([[-5.0, -2.0], [0.0, -5.0]])
        c, s = cosh_sinhc_pair(m2, 1.0)
        c_exact = np.array([[-0.61727287645716659, -0.35184490787569899],
                            [0.0, -0.61727287645716659]])
        s_exact = np.array([[0.35184490787569899, -0.19382355686657312],
                            [0.0, 0.35184490787569899]])
        assert np.allclose(c, c_exact, atol=1e-13)
        assert np.allclose(s, s_exact, atol=1e-13)

    def test_matches_eigendecomposition_of_diagonalizable_neighbor(self):
        m2 = np.array([[-5.0, -2.0], [0.0, -5.0 + 1e-5]])
        c, s = cosh_sinhc_pair(m2, 1.0)
        vals, vecs = np.linalg.eig(m2.astype(complex))
        roots = np.sqrt(vals.astype(complex))
        c_orc = (vecs @ np.diag(np.cosh(roots)) @ np.linalg.inv(vecs)).real
        s_orc = (vecs @ np.diag(np.sinh(roots) / roots) @ np.linalg.inv(vecs)).real
        assert np.allclose(c, c_orc, atol=1e-7)
        assert np.allclose(s, s_orc, atol=1e-7)

    def test_hyperbolic_identity(self):
        # cosh(xG)^2 - x^2 G^2 (sinh(xG)/(xG))^2 = I
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = rng.integers(1, 5)
            m2 = rng.normal(size=(n, n))
            m2 *= 10.0 / max(np.linalg.norm(m2), 10.0)
            x = rng.uniform(0.0, 1.0)
            c, s = cosh_sinhc_pair(m2, x)
            lhs = c @ c - (x * x) * (m2 @ s @ s)
            assert np.linalg.norm(lhs - np.eye(n)) < 1e-8

    def test_non_convergence_raises(self):
        with pytest.raises(NumericalError):
            cosh_sinhc_pair(1e6 * np.eye(2), 1.0, max_terms=3)

    def test_negative_x_rejected(self):
        with pytest.raises(ValueError):
            cosh_sinhc_pair(np.eye(2), -0.5)


class TestIsHurwitz:
    def test_double_pole(self):
        assert is_hurwitz(JORDAN_NEG1, margin=0.5)

    def test_imaginary_axis(self):
        assert not is_hurwitz(ROTATION, margin=1e-9)

    def test_scalar(self):
        assert is_hurwitz([[-2.0]], margin=1.0)

    def test_margin_must_be_positive(self):
        with pytest.raises(ValueError):
            is_hurwitz(JORDAN_NEG1, margin=0.0)


class TestSpectraDisjoint:
    def test_separated(self):
        assert spectra_disjoint(-np.eye(2), ROTATION, tol=1.0)
        gap, _ = min_eigenvalue_gap(-np.eye(2), ROTATION)
        assert gap == pytest.approx(np.sqrt(2.0))

    def test_identical(self):
        m = np.diag([1.0, 2.0])
        assert not spectra_disjoint(m, m, tol=1e-12)

    def test_scalars(self):
        assert spectra_disjoint([[-1.0]], [[1.0]], tol=1.0)
