import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hwglasso import linalg
from hwglasso.exceptions import DataError, NotPositiveDefiniteError
from oracles import brute_covariance, power_extremes


def test_covariance_matches_double_loop(rng):
    x = rng.standard_normal((13, 4))
    for center in (True, False):
        np.testing.assert_allclose(linalg.sample_covariance(x, center), brute_covariance(x, center), atol=1e-12)


def test_covariance_is_exactly_symmetric(rng):
    s = linalg.sample_covariance(rng.standard_normal((7, 9)))
    assert np.array_equal(s, s.T)


def test_covariance_single_row_uncentred_is_outer_product():
    x = np.array([[1.0, 2.0]])
    np.testing.assert_array_equal(linalg.sample_covariance(x, center=False), [[1, 2], [2, 4]])


def test_data_matrix_rejects_nan():
    with pytest.raises(DataError):
        linalg.sample_covariance(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_correlation_unit_diagonal_and_sd(rng):
    x = rng.standard_normal((50, 5)) * np.arange(1, 6)
    r, sd = linalg.sample_correlation(x)
    np.testing.assert_allclose(np.diag(r), 1.0)
    np.testing.assert_allclose(sd, x.std(axis=0))


def test_correlation_constant_column_named():
    x = np.ones((5, 3))
    x[:, 0] = np.arange(5)
    x[:, 2] = np.arange(5) ** 2
    with pytest.raises(DataError, match="b"):
        linalg.sample_correlation(x, labels=["a", "b", "c"])


def test_cholesky_and_logdet():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    assert linalg.is_positive_definite(m)
    ld, inv = linalg.chol_logdet_inverse(m)
    assert ld == pytest.approx(np.log(8.0))
    np.testing.assert_allclose(inv @ m, np.eye(2), atol=1e-14)
    assert np.array_equal(inv, inv.T)


def test_not_pd_raises():
    m = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert not linalg.is_positive_definite(m)
    with pytest.raises(NotPositiveDefiniteError):
        linalg.cholesky(m)


def test_eigen_extremes_against_power_iteration(rng):
    a = rng.standard_normal((6, 6))
    m = a + a.T
    lo, hi = linalg.eigen_extremes(m)
    plo, phi = power_extremes(m)
    assert lo == pytest.approx(plo, abs=1e-6)
    assert hi == pytest.approx(phi, abs=1e-6)


def test_matrix_norms_small_case():
    a = np.array([[1.0, 2.0], [2.0, 1.0]])
    b = np.eye(2)
    fro_sq, op, l1 = linalg.matrix_norms(a, b)
    assert fro_sq == pytest.approx(8.0)
    assert op == pytest.approx(2.0)
    assert l1 == pytest.approx(4.0)


def test_csv_roundtrip_with_inf_and_labels(tmp_path):
    m = np.array([[0.0, np.inf], [np.inf, 0.0]])
    linalg.write_matrix_csv(tmp_path / "w.csv", m, ["x", "y"])
    back, labels = linalg.read_matrix_csv(tmp_path / "w.csv", symmetric=True, allow_inf=True)
    assert labels == ["x", "y"]
    assert np.array_equal(back, m)


def test_csv_rejects_inf_by_default(tmp_path):
    (tmp_path / "m.csv").write_text("1,inf\ninf,1\n")
    with pytest.raises(DataError):
        linalg.read_matrix_csv(tmp_path / "m.csv")


def test_csv_ragged(tmp_path):
    (tmp_path / "m.csv").write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError):
        linalg.read_matrix_csv(tmp_path / "m.csv")


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(1, 5)),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_covariance_psd_and_symmetric(x):
    s = linalg.sample_covariance(x)
    assert np.array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() >= -1e-8 * max(1.0, np.abs(s).max())


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_inverse_residual_on_random_spd(p, seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((p, p))
    m = a @ a.T + p * np.eye(p)
    _, inv = linalg.chol_logdet_inverse(m)
    assert np.abs(inv @ m - np.eye(p)).max() <= 1e-10
