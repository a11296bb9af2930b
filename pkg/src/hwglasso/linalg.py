"""Dense symmetric matrix kernel.

Everything here works on plain ``numpy`` arrays. Symmetric matrices are stored
in full, and functions returning a symmetric matrix guarantee exact symmetry.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy import linalg as sla

from .exceptions import DataError, NotPositiveDefiniteError


def as_data_matrix(data, min_rows: int = 1) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise DataError(f"data must be 2-D, got shape {x.shape}")
    if x.shape[0] < min_rows or x.shape[1] < 1:
        raise DataError(f"data has shape {x.shape}; need at least {min_rows} row(s)")
    if not np.all(np.isfinite(x)):
        raise DataError("data contains non-finite values")
    return x


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite values")
    if not np.array_equal(a, a.T):
        if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
            raise DataError(f"{name} is not symmetric")
        a = symmetrize(a)
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Average ``a`` with its transpose; the result is bitwise symmetric."""
    s = 0.5 * (a + a.T)
    return np.triu(s) + np.triu(s, 1).T


def sample_covariance(data, center: bool = True) -> np.ndarray:
    """Sample covariance with divisor ``n``.

    With ``center=False`` this is ``sum_i x_i x_i^T / n``, the mean-zero form
    used by the Gaussian likelihood. With ``center=True`` column means are
    removed first.
    """
    x = as_data_matrix(data, min_rows=2 if center else 1)
    if center:
        x = x - x.mean(axis=0)
    return symmetrize(x.T @ x / x.shape[0])


def sample_correlation(data, labels=None):
    """Sample correlation matrix and the vector of column standard deviations.

    Raises
    ------
    DataError
        If a column is constant; the message names the offending column.
    """
    x = as_data_matrix(data, min_rows=2)
    s = sample_covariance(x, center=True)
    sd = np.sqrt(np.diag(s))
    zero = np.flatnonzero(sd == 0)
    if zero.size:
        j = int(zero[0])
        name = labels[j] if labels is not None else f"column {j}"
        raise DataError(f"{name} has zero standard deviation")
    r = s / np.outer(sd, sd)
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return symmetrize(r), sd


def cholesky(m) -> np.ndarray:
    a = as_symmetric(m)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def is_positive_definite(m) -> bool:
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        return False
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def chol_logdet_inverse(m):
    """Log-determinant and inverse of a symmetric positive definite matrix.

    Returns
    -------
    logdet : float
    inverse : ndarray
        Exactly symmetric.
    """
    chol = cholesky(m)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    inv = sla.cho_solve((chol, True), np.eye(chol.shape[0]))
    return logdet, symmetrize(inv)


def logdet(m) -> float:
    chol = cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def eigen_extremes(m):
    """Smallest and largest eigenvalue of a symmetric matrix."""
    a = as_symmetric(m)
    w = sla.eigvalsh(a)
    return float(w[0]), float(w[-1])


def matrix_norms(a, b):
    """Norms of ``a - b``: squared Frobenius, operator (spectral) and off-diagonal L1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = symmetrize(a - b)
    fro_sq = float(np.sum(d * d))
    op = float(np.max(np.abs(sla.eigvalsh(d)))) if d.size else 0.0
    off = float(np.sum(np.abs(d)) - np.sum(np.abs(np.diag(d))))
    return fro_sq, op, off


def read_matrix_csv(path, symmetric: bool = False, allow_inf: bool = False):
    """Read a dense matrix from CSV.

    A first row that does not parse as numbers is taken as a header and
    returned as labels.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    labels = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        labels = [v.strip() for v in rows[0]]
        rows = rows[1:]
    try:
        values = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if values.ndim != 2 or (labels is not None and values.shape[1] != len(labels)):
        raise DataError(f"{path}: ragged rows")
    bad = np.isnan(values) if allow_inf else ~np.isfinite(values)
    if bad.any():
        raise DataError(f"{path}: non-finite values")
    if symmetric and not allow_inf:
        values = as_symmetric(values, name=str(path))
    elif symmetric and not np.array_equal(values, values.T):
        raise DataError(f"{path}: matrix is not symmetric")
    return values, labels


def write_matrix_csv(path, m, labels=None) -> None:
    path = Path(path)
    m = np.asarray(m, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if labels is not None:
            w.writerow(labels)
        for row in m:
            w.writerow([_fmt(v) for v in row])


def _fmt(v: float) -> str:
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))
