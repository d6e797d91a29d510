"""Linear post-estimation for the de-dithered channel outputs.

The decoder sees each source coordinate plus an independent zero-mean
noise of known variance (the per-user distortion). The best linear
estimate of either coordinate from both outputs needs only second-order
statistics, and its error has a closed form; both are implemented here,
together with a moment estimator that recovers those statistics from the
channel outputs alone, which is what keeps the whole chain universal.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import DegenerateStatsError, DomainError
from .sources import SecondOrderStats

__all__ = [
    "EstimatorWeights",
    "lmmse_weights",
    "predicted_error",
    "apply_weights",
    "StatsEstimate",
    "estimate_stats_from_channel",
]


@dataclass(frozen=True)
class EstimatorWeights:
    """Affine estimator coefficients for both users.

    User 1's estimate is ``mean1 + own1*(v1 - mean1) + cross1*(v2 - mean2)``
    where v1, v2 are the de-dithered channel outputs; user 2 symmetrically.
    ``predicted1``/``predicted2`` are the mean squared errors the weights
    achieve when the statistics are exact.
    """

    own1: float
    cross1: float
    own2: float
    cross2: float
    mean1: float
    mean2: float
    det: float
    predicted1: float
    predicted2: float


def _centered(stats: SecondOrderStats) -> tuple[float, float, float]:
    return stats.var1, stats.var2, stats.cov12


def lmmse_weights(stats: SecondOrderStats, d1: float, d2: float) -> EstimatorWeights:
    """Solve the two 2x2 normal-equation systems in closed form.

    The output covariance is the source covariance plus diag(d1, d2); its
    determinant is strictly positive whenever both noise variances are,
    so degeneracy can only arise from a noiseless, perfectly correlated
    corner, which is rejected explicitly.
    """
    if d1 < 0.0 or d2 < 0.0:
        raise DomainError("noise variances must be nonnegative")
    c11, c22, c12 = _centered(stats)
    det = (c11 + d1) * (c22 + d2) - c12 * c12
    scale = max((c11 + d1) * (c22 + d2), c12 * c12, 1e-300)
    if det <= 1e-12 * scale:
        raise DegenerateStatsError(
            f"output covariance is singular (det={det}); "
            "perfectly correlated noiseless inputs cannot be separated"
        )
    own1 = (c11 * (c22 + d2) - c12 * c12) / det
    cross1 = c12 * d1 / det
    own2 = (c22 * (c11 + d1) - c12 * c12) / det
    cross2 = c12 * d2 / det
    err1 = d1 * (c11 * (c22 + d2) - c12 * c12) / det
    err2 = d2 * (c22 * (c11 + d1) - c12 * c12) / det
    return EstimatorWeights(
        own1=own1,
        cross1=cross1,
        own2=own2,
        cross2=cross2,
        mean1=stats.m1,
        mean2=stats.m2,
        det=det,
        predicted1=err1,
        predicted2=err2,
    )


def predicted_error(stats: SecondOrderStats, d1: float, d2: float) -> tuple[float, float]:
    """Mean squared errors of the optimal weights, without building them."""
    weights = lmmse_weights(stats, d1, d2)
    return weights.predicted1, weights.predicted2


def apply_weights(weights: EstimatorWeights, outputs: np.ndarray) -> np.ndarray:
    """Estimate both coordinates for every row of (v1, v2) channel outputs."""
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim != 2 or outputs.shape[1] != 2:
        raise DomainError(f"outputs must have shape (n, 2), got {outputs.shape}")
    d1 = outputs[:, 0] - weights.mean1
    d2 = outputs[:, 1] - weights.mean2
    est1 = weights.mean1 + weights.own1 * d1 + weights.cross1 * d2
    est2 = weights.mean2 + weights.cross2 * d1 + weights.own2 * d2
    return np.column_stack([est1, est2])


@dataclass(frozen=True)
class StatsEstimate:
    """Source statistics recovered from channel outputs, with repair flags.

    Channel noise inflates each own second moment by the known noise
    variance and leaves the cross moment untouched, so subtraction is
    unbiased. Finite samples can still produce a negative variance or an
    impossible correlation; those are floored and clamped, and the flags
    record that it happened.
    """

    stats: SecondOrderStats
    sample_count: int
    floored1: bool
    floored2: bool
    cross_clamped: bool


def estimate_stats_from_channel(
    outputs: np.ndarray, d1: float, d2: float
) -> StatsEstimate:
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim != 2 or outputs.shape[1] != 2:
        raise DomainError(f"outputs must have shape (n, 2), got {outputs.shape}")
    if outputs.shape[0] < 2:
        raise DomainError("at least two output rows are needed")
    count = outputs.shape[0]
    mean1 = float(outputs[:, 0].mean())
    mean2 = float(outputs[:, 1].mean())
    var1_raw = float(((outputs[:, 0] - mean1) ** 2).mean()) - d1
    var2_raw = float(((outputs[:, 1] - mean2) ** 2).mean()) - d2
    cov_raw = float(((outputs[:, 0] - mean1) * (outputs[:, 1] - mean2)).mean())
    floored1 = var1_raw < 0.0
    floored2 = var2_raw < 0.0
    var1 = max(var1_raw, 0.0)
    var2 = max(var2_raw, 0.0)
    limit = math.sqrt(var1 * var2)
    cross_clamped = abs(cov_raw) > limit
    cov = min(max(cov_raw, -limit), limit)
    stats = SecondOrderStats(
        m1=mean1,
        m2=mean2,
        s11=var1 + mean1 * mean1,
        s22=var2 + mean2 * mean2,
        s12=cov + mean1 * mean2,
    )
    return StatsEstimate(
        stats=stats,
        sample_count=count,
        floored1=floored1,
        floored2=floored2,
        cross_clamped=cross_clamped,
    )
