import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faeduq.errors import DimensionError, InsufficientDataError, NotPsdError
from faeduq.linalg import GaussianSummary, gaussian_summary, sqrtm_psd, sym_eig
from faeduq.rng import RngStream


def random_symmetric(n, seed):
    rs = np.random.RandomState(seed)
    a = rs.randn(n, n)
    return 0.5 * (a + a.T)


def random_spd(n, seed):
    rs = np.random.RandomState(seed)
    b = rs.randn(n, n + 2)
    return b @ b.T / n + 0.05 * np.eye(n)


# -- sym_eig ----------------------------------------------------------------


def test_sym_eig_identity():
    w, v = sym_eig(np.eye(3))
    assert np.allclose(w, 1.0)
    assert np.allclose(v.T @ v, np.eye(3), atol=1e-12)


def test_sym_eig_diagonal_sorted_ascending():
    w, v = sym_eig(np.diag([4.0, 1.0]))
    assert np.allclose(w, [1.0, 4.0])


def test_sym_eig_reconstructs_random_symmetric():
    # the reconstruction itself is the oracle
    a = random_symmetric(8, seed=0)
    w, v = sym_eig(a)
    err = np.linalg.norm(v @ np.diag(w) @ v.T - a)
    assert err <= 1e-9 * (1.0 + np.linalg.norm(a))
    assert np.linalg.norm(v.T @ v - np.eye(8)) <= 1e-9
    assert np.all(np.diff(w) >= 0)


def test_sym_eig_rejects_nonsquare_and_asymmetric():
    with pytest.raises(DimensionError):
        sym_eig(np.zeros((2, 3)))
    bad = np.array([[1.0, 2.0], [0.5, 1.0]])
    with pytest.raises(DimensionError):
        sym_eig(bad)


def test_sym_eig_rejects_nonfinite():
    a = np.eye(2)
    a[0, 0] = np.nan
    with pytest.raises(DimensionError):
        sym_eig(a)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_sym_eig_eigenvalue_sum_equals_trace(n, seed):
    a = random_symmetric(n, seed)
    w, _ = sym_eig(a)
    tr = np.trace(a)
    assert abs(w.sum() - tr) <= 1e-9 * (1.0 + abs(tr))


# -- sqrtm_psd ---------------------------------------------------------------


def test_sqrtm_identity():
    assert np.allclose(sqrtm_psd(np.eye(4)), np.eye(4), atol=1e-12)


def test_sqrtm_diagonal_roots():
    assert np.allclose(sqrtm_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12)


def test_sqrtm_square_and_compare_oracle():
    a = random_spd(16, seed=1)
    s = sqrtm_psd(a)
    assert np.allclose(s, s.T)
    assert np.linalg.norm(s @ s - a) <= 1e-8 * (1.0 + np.linalg.norm(a))


def test_sqrtm_rejects_indefinite_with_eigenvalue():
    a = np.diag([1.0, -0.5])
    with pytest.raises(NotPsdError) as err:
        sqrtm_psd(a)
    assert err.value.eigenvalue == pytest.approx(-0.5, rel=1e-12)


def test_sqrtm_clamps_inside_noise_window():
    # eigenvalue slightly negative but inside -1e-8 * trace / dim is clamped
    n = 4
    rs = np.random.RandomState(3)
    q, _ = np.linalg.qr(rs.randn(n, n))
    w = np.array([2.0, 1.0, 0.5, -1e-10])
    a = q @ np.diag(w) @ q.T
    a = 0.5 * (a + a.T)
    s = sqrtm_psd(a)
    assert np.all(np.isfinite(s))
    assert np.linalg.norm(s @ s - a) <= 1e-8 * (1.0 + np.linalg.norm(a))


def test_sqrtm_commutes_with_input():
    a = random_spd(12, seed=7)
    s = sqrtm_psd(a)
    comm = s @ a - a @ s
    assert np.linalg.norm(comm) <= 1e-8 * np.linalg.norm(a)


# -- gaussian_summary ---------------------------------------------------------


def test_summary_of_identical_vectors_is_degenerate():
    v = np.array([1.0, -2.0, 3.0])
    g = gaussian_summary(np.tile(v, (5, 1)))
    assert np.array_equal(g.mean, v)
    assert np.array_equal(g.cov, np.zeros((3, 3)))


def test_summary_two_scalar_samples():
    g = gaussian_summary(np.array([[0.0], [2.0]]))
    assert g.mean[0] == 1.0
    assert g.cov[0, 0] == 2.0  # N-1 denominator


def test_summary_monte_carlo_oracle():
    # 1000 draws from a known diagonal Gaussian, fixed stream
    s = RngStream(123, 55)
    k = 4
    true_std = np.array([1.0, 2.0, 0.5, 3.0])
    z = s.normals(1000 * k).reshape(1000, k) * true_std
    g = gaussian_summary(z)
    diag = np.diag(g.cov)
    assert np.all(np.abs(diag - true_std**2) <= 0.15 * true_std**2)


def test_summary_requires_two_samples():
    with pytest.raises(InsufficientDataError):
        gaussian_summary(np.ones((1, 3)))


def test_summary_permutation_invariant():
    rs = np.random.RandomState(5)
    x = rs.randn(40, 6)
    g1 = gaussian_summary(x)
    g2 = gaussian_summary(x[rs.permutation(40)])
    assert np.allclose(g1.mean, g2.mean, rtol=1e-12, atol=1e-12)
    assert np.allclose(g1.cov, g2.cov, rtol=1e-10, atol=1e-12)


def test_summary_cov_exactly_symmetric():
    rs = np.random.RandomState(6)
    g = gaussian_summary(rs.randn(25, 8))
    assert np.array_equal(g.cov, g.cov.T)


def test_gaussian_summary_type_validation():
    with pytest.raises(DimensionError):
        GaussianSummary(np.zeros(3), np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        GaussianSummary(np.zeros(2), np.array([[0.0, 1.0], [0.5, 0.0]]))
    g = GaussianSummary(np.zeros(2), np.eye(2))
    assert g.dim == 2
    with pytest.raises(ValueError):
        g.mean[0] = 1.0  # frozen storage
