"""Mean / covariance estimation and the diagonal-estimator error-decay experiment.

The covariance estimator is the population-normalized sample covariance
(divides by N, not N-1). The banding step keeps only its diagonal; downstream
code stores that diagonal as a plain vector, never a k x k matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._hashing import mix
from .core import ProbEmbedding, SampleSet, TheoryReport, ValidationError

__all__ = [
    "FullCovariance",
    "estimate_mean",
    "estimate_cov_sce",
    "band",
    "estimate",
    "spectral_norm",
    "theorem1_experiment",
]


@dataclass(frozen=True, eq=False)
class FullCovariance:
    matrix: np.ndarray  # (k, k), symmetric, diagonal >= 0

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"covariance must be square, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise ValidationError("covariance contains non-finite entries")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValidationError("covariance is not symmetric within 1e-12")
        if (np.diag(m) < 0).any():
            raise ValidationError("covariance diagonal has negative entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, FullCovariance):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and bool(
            np.array_equal(self.matrix, other.matrix)
        )


def estimate_mean(sample_set: SampleSet) -> np.ndarray:
    """Coordinate-wise arithmetic mean over the N samples.

    Computed in shifted form (first sample as reference point), which is both
    better conditioned for offset data and exact when all samples coincide —
    N identical vectors average to that vector bit-for-bit, so a dropout-free
    sample set yields exactly zero variance downstream.
    """
    ref = sample_set.samples[0]
    return ref + (sample_set.samples - ref).mean(axis=0)


def estimate_cov_sce(sample_set: SampleSet) -> FullCovariance:
    """Population covariance (1/N normalization), symmetrized against BLAS
    round-off so the symmetry invariant holds exactly."""
    y = sample_set.samples - sample_set.samples[0]
    x = y - y.mean(axis=0)
    cov = x.T @ x / sample_set.n_samples
    cov = (cov + cov.T) / 2.0
    return FullCovariance(matrix=cov)


def band(cov: FullCovariance) -> np.ndarray:
    """Diagonal of the covariance, order preserved."""
    return np.diag(cov.matrix).copy()


def estimate(sample_set: SampleSet) -> ProbEmbedding:
    if sample_set.mode == "plain":
        raise ValidationError(
            f"sample set {sample_set.sentence_id!r}: cannot estimate a "
            "distribution from a single plain encode"
        )
    return ProbEmbedding(
        sentence_id=sample_set.sentence_id,
        mode=sample_set.mode,
        mu=estimate_mean(sample_set),
        sigma_diag=band(estimate_cov_sce(sample_set)),
        n_samples=sample_set.n_samples,
    )


def spectral_norm(matrix: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value via power iteration on M^T M.

    The starting vector is a fixed seeded Gaussian, so results are
    reproducible; a zero matrix short-circuits to 0.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError("spectral_norm expects a matrix")
    if not np.abs(m).max() > 0:
        return 0.0
    mtm = m.T @ m
    v = np.random.default_rng(0x5EED).standard_normal(m.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = mtm @ v
        new_lam = float(np.linalg.norm(w))
        if new_lam == 0.0:
            return 0.0
        v = w / new_lam
        if abs(new_lam - lam) <= tol * max(1.0, new_lam):
            lam = new_lam
            break
        lam = new_lam
    return float(np.sqrt(lam))


def theorem1_experiment(
    k: int,
    n_grid: list[int],
    trials: int,
    seed: int,
    sigma_star: np.ndarray | None = None,
) -> TheoryReport:
    """Error decay of the diagonal estimator on synthetic Gaussians.

    For each sample count n, draw n samples from N(0, diag(sigma*)), estimate
    the diagonal, and record the spectral-norm deviation from sigma* (equal to
    the max absolute coordinate error for diagonal matrices), averaged over
    trials. Each trial draws one pool of max(n_grid) samples and reuses
    prefixes across the grid (common random numbers), which makes the decay
    trend visible without enormous trial counts. Also reports the least-squares
    slope of log(error) against log(log(k)/n).

    sigma_star fixes the ground-truth diagonal (length k, entries >= 0);
    by default each coordinate's variance is drawn from uniform [0.5, 2).
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if k < 2:
        raise ValidationError("k must be >= 2 (log k must be positive)")
    if not n_grid or any(n < 2 for n in n_grid):
        raise ValidationError("n_grid entries must be >= 2")
    if sorted(n_grid) != list(n_grid):
        raise ValidationError("n_grid must be sorted ascending")

    if sigma_star is None:
        sigma_star = np.random.default_rng(mix(seed, 0x515)).uniform(0.5, 2.0, size=k)
    else:
        sigma_star = np.asarray(sigma_star, dtype=np.float64)
        if sigma_star.shape != (k,) or (sigma_star < 0).any():
            raise ValidationError(f"sigma_star must be length {k} with entries >= 0")
    n_max = n_grid[-1]
    errors = np.zeros((trials, len(n_grid)))
    for t in range(trials):
        rng = np.random.default_rng(mix(seed, t))
        pool = rng.standard_normal((n_max, k)) * np.sqrt(sigma_star)
        for j, n in enumerate(n_grid):
            x = pool[:n]
            var = ((x - x.mean(axis=0)) ** 2).mean(axis=0)
            errors[t, j] = np.abs(var - sigma_star).max()

    mean_err = errors.mean(axis=0)
    log_x = np.log(np.log(k) / np.asarray(n_grid, dtype=np.float64))
    with np.errstate(divide="ignore"):
        log_err = np.log(mean_err)
    # slope is undefined on a single grid point or with exact-zero errors
    # (point-mass sigma_star): report 0.0 rather than fitting a degenerate line
    if len(n_grid) >= 2 and np.isfinite(log_err).all():
        slope = float(np.polyfit(log_x, log_err, 1)[0])
    else:
        slope = 0.0

    measurements = [(f"error_n={n}", float(e)) for n, e in zip(n_grid, mean_err)]
    measurements.append(("slope", slope))
    return TheoryReport(
        experiment="theorem1",
        parameters={"k": k, "n_grid": list(n_grid), "trials": trials, "seed": seed},
        measurements=tuple(measurements),
    )
