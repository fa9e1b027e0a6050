"""Distortion and perception measurements plus per-step error diagnostics.

Distortion: MSE and SI-SDR against the clean reference.  Perception:
distances between the set of produced samples and a set of clean prior
samples, namely the 2-Wasserstein distance between moment-matched Gaussians
(closed form) as the primary proxy, with the energy distance as a
mixture-sensitive cross-check (Gaussian moments cannot tell a mixture from
its moment-matched Gaussian; the energy distance can).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm

SI_SDR_CEILING_DB = 60.0
COV_REGULARIZER = 1e-9


@dataclass
class EvalReport:
    """One evaluation of a sampler output set against references."""

    mse: float
    si_sdr_db: float
    w2: float
    energy_distance: float
    per_step_error: list[float] = field(default_factory=list)
    cov_regularized: bool = False


def si_sdr(estimate: np.ndarray, reference: np.ndarray, ceiling_db: float = SI_SDR_CEILING_DB) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    Projects the estimate onto the reference: s = (<e, r>/||r||^2) r,
    e_res = estimate - s, returns 10 log10(||s||^2 / ||e_res||^2).
    A perfect (up to scale) estimate returns the ceiling; an estimate
    orthogonal to the reference returns -inf.
    """
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimate.shape != reference.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {reference.shape}")
    ref_energy = float(reference @ reference)
    if ref_energy == 0.0:
        raise ValueError("reference signal is zero")
    scale = float(estimate @ reference) / ref_energy
    s = scale * reference
    e = estimate - s
    s_energy = float(s @ s)
    e_energy = float(e @ e)
    if s_energy == 0.0:
        return float("-inf")
    if e_energy == 0.0:
        return ceiling_db
    return min(10.0 * np.log10(s_energy / e_energy), ceiling_db)


def gaussian_w2(
    mu0: np.ndarray, cov0: np.ndarray, mu1: np.ndarray, cov1: np.ndarray
) -> tuple[float, bool]:
    """Closed-form 2-Wasserstein distance between two Gaussians.

    W2^2 = ||mu0 - mu1||^2 + tr(C0 + C1 - 2 (C1^1/2 C0 C1^1/2)^1/2).
    Returns (distance, regularized) where the flag marks near-singular
    covariances that were bumped by a tiny diagonal.
    """
    cov0 = np.atleast_2d(np.asarray(cov0, dtype=float))
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=float))
    d = cov0.shape[0]
    regularized = False
    if min(np.linalg.eigvalsh(cov0).min(), np.linalg.eigvalsh(cov1).min()) < 1e-12:
        cov0 = cov0 + COV_REGULARIZER * np.eye(d)
        cov1 = cov1 + COV_REGULARIZER * np.eye(d)
        regularized = True
    root1 = _psd_sqrt(cov1)
    cross = _psd_sqrt(root1 @ cov0 @ root1)
    delta = np.asarray(mu0, dtype=float) - np.asarray(mu1, dtype=float)
    w2_sq = float(delta @ delta) + float(np.trace(cov0 + cov1 - 2.0 * cross))
    return float(np.sqrt(max(w2_sq, 0.0))), regularized


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    root = sqrtm(mat)
    if np.iscomplexobj(root):
        root = root.real
    return root


def _mean_pairwise_distance(a: np.ndarray, b: np.ndarray, block: int = 512) -> float:
    """Mean Euclidean distance over all (i, j) pairs.

    Scalar samples use the exact sorted O((n+m) log n) evaluation; higher
    dimensions fall back to chunked pairwise blocks to bound memory.
    """
    if a.shape[1] == 1:
        return _mean_abs_difference_sorted(a.ravel(), b.ravel())
    total = 0.0
    for start in range(0, a.shape[0], block):
        chunk = a[start : start + block]
        d2 = np.sum(chunk**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * chunk @ b.T
        total += np.sqrt(np.maximum(d2, 0.0)).sum()
    return total / (a.shape[0] * b.shape[0])


def _mean_abs_difference_sorted(a: np.ndarray, b: np.ndarray) -> float:
    """Mean |a_i - b_j| over all pairs via sorting and prefix sums."""
    a = np.sort(a)
    prefix = np.concatenate([[0.0], np.cumsum(a)])
    total_sum = prefix[-1]
    n = a.size
    k = np.searchsorted(a, b, side="left")
    below = b * k - prefix[k]
    above = (total_sum - prefix[k]) - b * (n - k)
    return float(np.sum(below + above)) / (n * b.size)


def energy_distance(outputs: np.ndarray, reference: np.ndarray) -> float:
    """V-statistic energy distance 2 E||X-Y|| - E||X-X'|| - E||Y-Y'||."""
    a = np.atleast_2d(np.asarray(outputs, dtype=float))
    b = np.atleast_2d(np.asarray(reference, dtype=float))
    return (
        2.0 * _mean_pairwise_distance(a, b)
        - _mean_pairwise_distance(a, a)
        - _mean_pairwise_distance(b, b)
    )


def perception_distance(outputs: np.ndarray, reference: np.ndarray) -> tuple[float, float]:
    """(Gaussian-moment W2, energy distance) between two sample sets."""
    a = np.atleast_2d(np.asarray(outputs, dtype=float))
    b = np.atleast_2d(np.asarray(reference, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("sample sets must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    w2, _ = gaussian_w2(a.mean(axis=0), np.cov(a, rowvar=False, ddof=0), b.mean(axis=0), np.cov(b, rowvar=False, ddof=0))
    return w2, energy_distance(a, b)


def per_step_errors(trajectory, x_true: np.ndarray) -> list[float]:
    """Squared L2 error of every recorded prediction against the clean vector."""
    x_true = np.asarray(x_true, dtype=float)
    if not trajectory.predictions:
        raise ValueError("trajectory has no recorded predictions")
    return [float(np.sum((np.asarray(p) - x_true) ** 2)) for p in trajectory.predictions]


def mse(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Mean squared coordinate error."""
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.mean((estimate - reference) ** 2))
