"""FAED scores and their uncertainty summaries.

The test-side embeddings form a tensor indexed (input i, Monte Carlo sample
j, latent element k). One Frechet distance is computed per j against a fixed
reference Gaussian; the spread of those J scores (sigma_faed) and the mean
per-element variance of the embeddings over j (pvar) are the two uncertainty
readouts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InsufficientDataError, NumericalError
from .linalg import GaussianSummary, gaussian_summary, sqrtm_psd

NEGATIVE_CLAMP = 1e-6


class RankDeficiencyWarning(UserWarning):
    """Fewer test inputs than latent dimensions: covariances are singular."""


@dataclass(frozen=True)
class EmbeddingTensor:
    """Latent representations, shape (n_inputs, n_samples, latent_dim)."""

    data: np.ndarray
    seed: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimensionError(f"EmbeddingTensor: expected 3-D data, got shape {data.shape}")
        if min(data.shape) < 1:
            raise DimensionError(f"EmbeddingTensor: empty axis in shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DimensionError("EmbeddingTensor: non-finite entries")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_inputs(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.data.shape[2]

    def sample_slice(self, j: int) -> np.ndarray:
        """All inputs' embeddings for Monte Carlo sample ``j``, shape (N, K)."""
        return self.data[:, j, :]


@dataclass(frozen=True)
class FaedDistribution:
    """The J per-sample FAED scores; tiny negative round-off is clamped."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).copy()
        if v.ndim != 1 or v.size < 1:
            raise DimensionError("FaedDistribution: expected a non-empty 1-D value array")
        if not np.all(np.isfinite(v)):
            raise NumericalError("FaedDistribution: non-finite FAED value")
        low = float(v.min())
        if low < -NEGATIVE_CLAMP:
            raise NumericalError(f"FaedDistribution: FAED value {low} below -{NEGATIVE_CLAMP:g}")
        v[(v < 0.0)] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MetricReport:
    """Everything one evaluation run reports."""

    mean_faed: float
    sigma_faed: float
    pvar: float
    faed_per_j: FaedDistribution
    n_inputs: int
    n_samples: int
    latent_dim: int
    seed: int
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "mean_faed": self.mean_faed,
            "sigma_faed": self.sigma_faed,
            "pvar": self.pvar,
            "n_inputs": self.n_inputs,
            "n_samples": self.n_samples,
            "latent_dim": self.latent_dim,
            "seed": self.seed,
            "warnings": list(self.warnings),
            "faed_per_j": [float(x) for x in self.faed_per_j.values],
        }


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Squared Frechet distance between two Gaussians.

    ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), using
    the symmetric form of the cross term so the inner square root always
    sees a symmetric PSD matrix. Results in [-1e-6, 0) are clamped to 0.
    """
    if a.dim != b.dim:
        raise DimensionError(f"frechet_distance: dimension mismatch {a.dim} vs {b.dim}")
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    inner = 0.5 * (inner + inner.T)
    cross = sqrtm_psd(inner)
    diff = a.mean - b.mean
    d = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    if -NEGATIVE_CLAMP <= d < 0.0:
        d = 0.0
    return d


def faed_distribution(test: EmbeddingTensor, reference: GaussianSummary) -> FaedDistribution:
    """One FAED score per Monte Carlo sample index j.

    Score j compares the Gaussian fitted to the j-th sampled embedding of
    every test input against the fixed reference Gaussian.
    """
    if test.latent_dim != reference.dim:
        raise DimensionError(
            f"faed_distribution: latent dim {test.latent_dim} vs reference dim {reference.dim}"
        )
    if test.n_inputs < 2:
        raise InsufficientDataError(
            f"faed_distribution: need at least 2 test inputs, got {test.n_inputs}"
        )
    if test.n_inputs <= test.latent_dim:
        warnings.warn(
            f"faed_distribution: {test.n_inputs} inputs <= {test.latent_dim} latent dims; "
            "covariance is rank deficient and scores may be unstable",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    values = np.empty(test.n_samples)
    for j in range(test.n_samples):
        values[j] = frechet_distance(gaussian_summary(test.sample_slice(j)), reference)
    return FaedDistribution(values)


def sigma_faed(d: FaedDistribution) -> float:
    """Population standard deviation (denominator J) of the FAED scores.

    Values are shifted by the first element before squaring, so a constant
    distribution (e.g. from a zero-dropout encoder) yields exactly 0.
    """
    v = d.values
    if v.size == 0:
        raise InsufficientDataError("sigma_faed: empty distribution")
    if v.size == 1:
        return 0.0
    shifted = v - v[0]
    var = np.mean(shifted**2) - np.mean(shifted) ** 2
    return float(np.sqrt(max(var, 0.0)))


def pvar(test: EmbeddingTensor) -> float:
    """Mean over inputs and latent elements of the variance across MC samples.

    The variance over j uses the population denominator J: the J draws are
    the whole dropout ensemble, not a sample from a larger one. Each (i, k)
    cell is shifted by its j = 0 value before squaring, so cells where all
    MC samples coincide contribute exactly 0.
    """
    if test.n_samples < 2:
        raise InsufficientDataError(
            f"pvar: need at least 2 MC samples, got {test.n_samples}"
        )
    shifted = test.data - test.data[:, :1, :]
    var = np.mean(shifted**2, axis=1) - np.mean(shifted, axis=1) ** 2
    return float(np.mean(np.maximum(var, 0.0)))


def rank_deficiency_notes(test: EmbeddingTensor) -> tuple[str, ...]:
    """Stability warnings to attach to a report (empty when healthy)."""
    if test.n_inputs <= test.latent_dim:
        return (
            f"rank-deficient: {test.n_inputs} inputs <= {test.latent_dim} latent dims",
        )
    return ()


def metric_report(
    test: EmbeddingTensor,
    reference: EmbeddingTensor,
    seed: int,
    ref_mode: str = "fixed-j0",
) -> MetricReport:
    """Full evaluation of a test tensor against a reference tensor.

    ``ref_mode`` selects how the reference embeddings collapse to Gaussian
    summaries: ``fixed-j0`` (default) fits one Gaussian to the reference's
    j = 0 slice and compares every test slice against it; ``paired-j`` fits
    one reference Gaussian per j and pairs it with the test slice of the
    same j (requires equal n_samples).
    """
    if test.latent_dim != reference.latent_dim:
        raise DimensionError(
            f"metric_report: latent dim {test.latent_dim} vs {reference.latent_dim}"
        )
    if test.n_inputs < 2:
        raise InsufficientDataError(
            f"metric_report: need at least 2 test inputs, got {test.n_inputs}"
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        if ref_mode == "fixed-j0":
            ref = gaussian_summary(reference.sample_slice(0))
            dist = faed_distribution(test, ref)
        elif ref_mode == "paired-j":
            if reference.n_samples != test.n_samples:
                raise DimensionError(
                    "metric_report: paired-j needs equal n_samples, got "
                    f"{test.n_samples} vs {reference.n_samples}"
                )
            values = np.empty(test.n_samples)
            for j in range(test.n_samples):
                values[j] = frechet_distance(
                    gaussian_summary(test.sample_slice(j)),
                    gaussian_summary(reference.sample_slice(j)),
                )
            dist = FaedDistribution(values)
        else:
            raise ConfigError(f"metric_report: unknown ref_mode {ref_mode!r}")

    return MetricReport(
        mean_faed=float(np.mean(dist.values)),
        sigma_faed=sigma_faed(dist),
        pvar=pvar(test),
        faed_per_j=dist,
        n_inputs=test.n_inputs,
        n_samples=test.n_samples,
        latent_dim=test.latent_dim,
        seed=seed,
        warnings=rank_deficiency_notes(test),
    )
