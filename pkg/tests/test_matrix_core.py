import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import solve_discrete_lyapunov, sqrtm

from conftest import random_stable_theta
from mdclt import matrix_core as mc
from mdclt.ar_process import ArParams, companion, gram, path_from_innovations, sigma_series
from mdclt.errors import NonConvergence, NotPd, NotPsd, Unstable

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=finite)


# --------------------------------------------------------------------------
# norms


def test_frobenius_examples():
    assert mc.frobenius_norm(np.eye(2)) == pytest.approx(math.sqrt(2))
    itilde = np.zeros((2, 2))
    itilde[0, 0] = 1
    assert mc.frobenius_norm(itilde) == 1.0


def test_frobenius_submultiplicative_random(np_rng):
    for _ in range(10_000):
        m = np_rng.normal(size=(3, 3))
        assert mc.frobenius_norm(m @ m) <= mc.frobenius_norm(m) ** 2 * (1 + 1e-12)


@given(square(4), square(4), arrays(np.float64, 4, elements=finite))
def test_frobenius_compatibility(m, n, u):
    fm = mc.frobenius_norm(m)
    assert mc.frobenius_norm(m @ n) <= fm * mc.frobenius_norm(n) * (1 + 1e-12) + 1e-300
    assert np.linalg.norm(m @ u) <= fm * np.linalg.norm(u) * (1 + 1e-12) + 1e-300
    assert mc.frobenius_norm(m.T) == pytest.approx(fm)


def test_validation():
    with pytest.raises(ValueError):
        mc.as_mat(np.ones((2, 3)))
    with pytest.raises(ValueError):
        mc.as_mat(np.eye(17))
    with pytest.raises(ValueError):
        mc.as_mat([[np.nan]])
    with pytest.raises(ValueError):
        mc.as_sym([[1.0, 2.0], [0.0, 1.0]])


# --------------------------------------------------------------------------
# spectral radius


def test_spectral_radius_examples():
    assert mc.spectral_radius([[0.9]], 1e-10) == 0.9
    rho = mc.spectral_radius(companion(ArParams((0.5, 0.2))), 1e-10)
    assert rho == pytest.approx((0.5 + math.sqrt(1.05)) / 2, abs=1e-10)
    assert mc.spectral_radius(companion(ArParams((1.5, 0.0))), 1e-10) == pytest.approx(1.5, abs=1e-10)


def test_spectral_radius_matches_roots(np_rng):
    for _ in range(300):
        d = int(np_rng.integers(1, 7))
        theta = np_rng.uniform(-1.2, 1.2, size=d)
        oracle = float(np.max(np.abs(np.roots(np.concatenate(([1.0], -theta))))))
        assert mc.spectral_radius(companion(ArParams(theta)), 1e-10) == pytest.approx(oracle, abs=1e-8)


def test_spectral_radius_general_matrix(np_rng):
    for _ in range(50):
        m = np_rng.normal(size=(4, 4))
        m = m + m.T  # symmetric: Gelfand bracket alone must certify
        assert mc.spectral_radius(m, 1e-9) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(m))), abs=1e-8)


def test_spectral_radius_jordan_block():
    # not a companion matrix, and ||m^p||^(1/p) approaches 0.5 only like (2p)^(1/p)
    assert mc.spectral_radius([[0.5, 1.0], [0.0, 0.5]], 1e-12) == pytest.approx(0.5, abs=1e-12)


def test_spectral_radius_nonconvergence():
    # a bracket narrower than rounding cannot be certified
    with pytest.raises(NonConvergence):
        mc.spectral_radius([[0.5, 1.0], [0.0, 0.5]], 1e-17)


# --------------------------------------------------------------------------
# symmetric eigenproblem


def test_sym_eigen_examples():
    vals, _ = mc.sym_eigen(np.diag([4.0, 9.0]))
    assert vals.tolist() == [9.0, 4.0]
    vals, _ = mc.sym_eigen(np.eye(3))
    assert vals.tolist() == [1.0, 1.0, 1.0]


def test_sym_eigen_reconstruction(np_rng):
    for _ in range(1000):
        d = int(np_rng.integers(1, 8))
        m = np_rng.normal(size=(d, d)) * 10 ** np_rng.uniform(-3, 3)
        s = m + m.T
        vals, q = mc.sym_eigen(s)
        assert mc.frobenius_norm(q.T @ q - np.eye(d)) <= 1e-10
        assert mc.frobenius_norm(q @ np.diag(vals) @ q.T - s) <= 1e-10 * (1 + mc.frobenius_norm(s))
        assert np.all(np.diff(vals) <= 0)
        assert np.allclose(vals, np.sort(np.linalg.eigvalsh(s))[::-1], atol=1e-9 * (1 + np.abs(s).max()))


# --------------------------------------------------------------------------
# square roots, Cholesky, inverse


def test_psd_sqrt_examples():
    assert np.allclose(mc.psd_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(mc.psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    with pytest.raises(NotPsd):
        mc.psd_sqrt(np.diag([1.0, -1e-6]))
    # tiny negative eigenvalues are clamped
    r = mc.psd_sqrt(np.diag([1.0, -1e-11]))
    assert np.allclose(r, np.diag([1.0, 0.0]))


def test_psd_sqrt_squares_back(np_rng):
    for _ in range(500):
        d = int(np_rng.integers(1, 6))
        m = np_rng.normal(size=(d, d))
        a = m.T @ m
        r = mc.psd_sqrt(a)
        assert mc.frobenius_norm(r @ r - a) <= 1e-10 * (1 + mc.frobenius_norm(a))
        assert np.linalg.eigvalsh(r).min() >= -1e-10
        assert np.allclose(r, np.real(sqrtm(a)), atol=1e-7)


def test_cholesky_examples():
    assert np.array_equal(mc.cholesky_pd(np.eye(2)), np.eye(2))
    assert mc.cholesky_pd(np.zeros((2, 2))) is None
    assert mc.cholesky_pd(np.array([[1.0, 1.0], [1.0, 1.0]])) is None


def test_cholesky_agrees_with_eigenvalues(np_rng):
    for _ in range(1000):
        d = int(np_rng.integers(1, 6))
        m = np_rng.normal(size=(d, d))
        s = m + m.T + np_rng.uniform(-2, 4) * np.eye(d)
        lam = np.linalg.eigvalsh(s).min()
        lower = mc.cholesky_pd(s)
        if lam > 1e-8:
            assert lower is not None
            assert np.allclose(lower @ lower.T, s, atol=1e-12 * (1 + np.abs(s).max()))
        elif lam < 0:
            assert lower is None


def test_zero_start_grams_below_dimension_are_not_pd(np_rng):
    # with U_0 = 0 the first n < d states span at most n dimensions
    for _ in range(2000):
        d = int(np_rng.integers(2, 6))
        n = int(np_rng.integers(1, d))
        path = path_from_innovations(ArParams(np_rng.uniform(-0.3, 0.3, d)), np.zeros(d), np_rng.normal(size=n))
        assert mc.cholesky_pd(gram(path)) is None


def test_generic_rank_deficient_grams_mostly_rejected(np_rng):
    # rounding can leave a pivot above the relative threshold; it must stay rare
    accepted = 0
    for _ in range(5000):
        d = int(np_rng.integers(2, 6))
        k = int(np_rng.integers(1, d))
        u = np_rng.normal(size=(k, d)) * 10 ** np_rng.uniform(-4, 4)
        accepted += mc.cholesky_pd(u.T @ u) is not None
    assert accepted <= 25


def test_lemma_head_positive_definite(np_rng):
    for d in (1, 2, 3, 4):
        for _ in range(100):
            res = sigma_series(ArParams(random_stable_theta(np_rng, d)))
            assert mc.is_positive_definite(res.head)


def test_inverse_examples():
    assert np.allclose(mc.inverse(np.eye(3)), np.eye(3))
    assert np.allclose(mc.inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    assert mc.inverse([[1 / 0.19]])[0, 0] == pytest.approx(0.19, rel=1e-14)
    with pytest.raises(NotPd):
        mc.inverse(np.zeros((2, 2)))


def test_inverse_residual(np_rng):
    for _ in range(300):
        d = int(np_rng.integers(1, 8))
        m = np_rng.normal(size=(d, d))
        s = m @ m.T + 0.1 * np.eye(d)
        assert mc.frobenius_norm(s @ mc.inverse(s) - np.eye(d)) <= 1e-10 * d * np.linalg.cond(s) / 1e2 + 1e-10 * d


def test_inverse_sqrt(np_rng):
    m = np_rng.normal(size=(3, 3))
    s = m @ m.T + np.eye(3)
    w = mc.inverse_sqrt(s)
    assert np.allclose(w @ s @ w, np.eye(3), atol=1e-10)


# --------------------------------------------------------------------------
# Lyapunov oracle and stability constants


def test_lyapunov_examples():
    c = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.array_equal(mc.solve_lyapunov(np.zeros((2, 2)), c), c)
    assert mc.solve_lyapunov([[0.9]], [[1.0]])[0, 0] == pytest.approx(1 / 0.19, rel=1e-12)
    with pytest.raises(NonConvergence):
        mc.solve_lyapunov([[1.1]], [[1.0]])


def test_lyapunov_against_scipy(np_rng):
    for d in (1, 2, 3, 4):
        for _ in range(25):
            b = companion(ArParams(random_stable_theta(np_rng, d)))
            c = np.zeros((d, d))
            c[0, 0] = 1
            s = mc.solve_lyapunov(b, c)
            assert np.allclose(s, solve_discrete_lyapunov(b, c), atol=1e-9 * (1 + np.abs(s).max()))
            assert mc.frobenius_norm(s - c - b @ s @ b.T) <= 1e-12 * (1 + mc.frobenius_norm(s))


def test_stability_constants_examples():
    k = mc.stability_constants([[0.0]])
    assert (k.kappa1, k.kappa2, k.kappa3) == (1.0, 1.0, 1.0)
    k = mc.stability_constants([[0.5]])
    assert k.kappa1 == pytest.approx(2.0, abs=1e-11)
    assert k.kappa2 == pytest.approx(4 / 3, abs=1e-11)
    assert k.tail_bound <= 1e-12
    with pytest.raises(Unstable):
        mc.stability_constants([[1.0]])


def test_stability_constants_invariants(np_rng):
    for _ in range(100):
        d = int(np_rng.integers(1, 5))
        b = companion(ArParams(random_stable_theta(np_rng, d)))
        k = mc.stability_constants(b)
        assert k.kappa3 <= k.kappa1
        assert k.kappa2 <= k.kappa1 ** 2
        assert min(k.kappa1, k.kappa2, k.kappa3) >= math.sqrt(d) - 1e-12
        # brute-force partial sums never exceed the certified totals
        p, total = np.eye(d), 0.0
        for _ in range(2000):
            total += mc.frobenius_norm(p)
            p = p @ b
        assert total <= k.kappa1 + k.tail_bound + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.24, 0.24), min_size=1, max_size=4))
def test_sigma_series_matches_lyapunov_property(theta):
    # sum |theta_i| < 1 guarantees stability
    p = ArParams(tuple(theta))
    res = sigma_series(p)
    c = np.zeros((p.d, p.d))
    c[0, 0] = 1
    lyap = mc.solve_lyapunov(companion(p), c)
    assert mc.frobenius_norm(res.sigma - lyap) <= 1e-9 * (1 + mc.frobenius_norm(lyap))
