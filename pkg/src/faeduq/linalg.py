"""Dense symmetric linear algebra for the distance engine.

Matrices and vectors are plain float64 numpy arrays (row-major). The
eigensolver is a hand-rolled cyclic Jacobi iteration, accurate to near
machine precision for the symmetric matrices this package produces
(dimensions of a few hundred at most). numpy is used for storage and
elementwise arithmetic only, which keeps ``numpy.linalg`` available as an
independent oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InsufficientDataError, NotPsdError, NumericalError

SYMMETRY_TOL = 1e-8
PSD_TOL_FACTOR = 1e-8
_MAX_SWEEPS = 60


def _checked_symmetric(a, tol: float, op: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{op}: expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{op}: matrix contains non-finite entries")
    if a.size and np.max(np.abs(a - a.T)) > tol:
        raise DimensionError(f"{op}: matrix is not symmetric within {tol:g}")
    return a


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as orthonormal columns, so ``a ~= V @ diag(w) @ V.T``.
    """
    a = _checked_symmetric(a, SYMMETRY_TOL, "sym_eig")
    n = a.shape[0]
    m = 0.5 * (a + a.T)
    v = np.eye(n)
    if n <= 1:
        return m.diagonal().copy(), v

    scale = 1.0 + float(np.sqrt(np.sum(m * m)))
    stop = 1e-14 * scale
    off_sq = m * m  # reused buffer for the cancellation-free off-diagonal norm
    for sweep in range(_MAX_SWEEPS):
        np.multiply(m, m, out=off_sq)
        np.fill_diagonal(off_sq, 0.0)
        off = float(np.sqrt(np.sum(off_sq)))
        if off <= stop:
            break
        # during the first sweeps only rotate entries that matter yet
        thresh = 0.2 * off / (n * n) if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0 or abs(apq) <= thresh:
                    continue
                g = 100.0 * abs(apq)
                if abs(m[p, p]) + g == abs(m[p, p]) and abs(m[q, q]) + g == abs(m[q, q]):
                    m[p, q] = m[q, p] = 0.0
                    continue
                theta = 0.5 * (m[q, q] - m[p, p]) / apq
                if abs(theta) > 1e150:  # avoid overflow in theta*theta
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta)) if theta != 0.0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # m <- J.T @ m @ J applied as column then row updates
                mp, mq = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * mp - s * mq
                m[:, q] = s * mp + c * mq
                mp, mq = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * mp - s * mq
                m[q, :] = s * mp + c * mq
                m[p, q] = m[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NumericalError(f"sym_eig: Jacobi failed to converge in {_MAX_SWEEPS} sweeps")

    w = m.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sqrtm_psd(a) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix.

    Eigenvalues inside the numerical-noise window ``[-tol, 0)`` with
    ``tol = PSD_TOL_FACTOR * trace / dim`` are clamped to zero; anything
    below the window raises :class:`NotPsdError`.
    """
    a = _checked_symmetric(a, SYMMETRY_TOL, "sqrtm_psd")
    w, v = sym_eig(a)
    n = a.shape[0]
    tol = PSD_TOL_FACTOR * float(np.trace(a)) / n if n else 0.0
    wmin = float(w[0]) if n else 0.0
    if wmin < -tol:
        raise NotPsdError("sqrtm_psd: matrix is not PSD", wmin)
    root = v @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ v.T
    return 0.5 * (root + root.T)


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix of one embedding population."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise DimensionError(f"GaussianSummary: mean must be 1-D, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"GaussianSummary: cov shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise DimensionError("GaussianSummary: non-finite entries")
        if cov.size and np.max(np.abs(cov - cov.T)) > 1e-10:
            raise DimensionError("GaussianSummary: cov is not symmetric within 1e-10")
        mean = mean.copy()
        cov = cov.copy()
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def gaussian_summary(samples) -> GaussianSummary:
    """Mean and unbiased (N-1) sample covariance of a set of vectors.

    Accumulation is sequential in sample-index order with float64
    accumulators, so the result is bit-reproducible regardless of platform
    threading. The covariance is explicitly symmetrized.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"gaussian_summary: expected 2-D (samples, dim), got shape {x.shape}")
    n, k = x.shape
    if n < 2:
        raise InsufficientDataError(f"gaussian_summary: need at least 2 samples, got {n}")
    if not np.all(np.isfinite(x)):
        raise DimensionError("gaussian_summary: non-finite samples")

    mean = np.zeros(k)
    for i in range(n):
        mean += x[i]
    mean /= n

    cov = np.zeros((k, k))
    for i in range(n):
        d = x[i] - mean
        cov += np.outer(d, d)
    cov /= n - 1
    cov = 0.5 * (cov + cov.T)
    return GaussianSummary(mean, cov)
