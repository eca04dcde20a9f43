"""Batch summaries and confidence intervals for replicate arrays.

The estimators hand back per-replicate values and integer costs; everything
here is plain frequentist machinery on those arrays: streaming-stable mean
and variance, CLT and percentile-bootstrap intervals, and the
cost-times-variance figure of merit used to tune geometric rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .streams import RandomStream

CLT = "clt"
BOOTSTRAP_PERCENTILE = "bootstrap-percentile"

_BLOCK = 1 << 16


@dataclass(frozen=True)
class BatchSummary:
    """Moments and accounting for one batch of replicates.

    ``variance`` is the unbiased sample variance (0 for a single replicate,
    with ``degenerate`` set), ``std_error`` is sqrt(variance / n), and
    ``total_cost`` is the exact integer sum of per-replicate costs.
    """

    n: int
    mean: float
    variance: float
    std_error: float
    total_cost: int
    wall_time: float = 0.0
    degenerate: bool = False


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: str
    degenerate: bool = False


def _mean_m2(values: np.ndarray) -> tuple[float, float]:
    """Blockwise-merged mean and sum of squared deviations.

    Merging block moments keeps the reduction numerically stable for large
    batches without a Python-level loop per element.
    """
    mean = 0.0
    m2 = 0.0
    count = 0
    for start in range(0, values.size, _BLOCK):
        chunk = values[start : start + _BLOCK]
        c = chunk.size
        cmean = float(chunk.mean())
        cm2 = float(((chunk - cmean) ** 2).sum())
        total = count + c
        delta = cmean - mean
        m2 += cm2 + delta * delta * (count * c / total)
        mean += delta * (c / total)
        count = total
    return mean, m2


def summarize(values, costs, wall_time: float = 0.0) -> BatchSummary:
    """Reduce replicate values and costs to a BatchSummary."""
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a nonempty 1-d array")
    if costs.shape != values.shape:
        raise ValueError("values and costs must have matching length")
    n = values.size
    mean, m2 = _mean_m2(values)
    variance = m2 / (n - 1) if n > 1 else 0.0
    variance = max(variance, 0.0)
    return BatchSummary(
        n=n,
        mean=mean,
        variance=variance,
        std_error=math.sqrt(variance / n),
        total_cost=int(costs.sum()),
        wall_time=float(wall_time),
        degenerate=(n == 1),
    )


def clt_ci(summary: BatchSummary, alpha: float = 0.05) -> ConfidenceInterval:
    """Central-limit interval mean +/- z_{alpha/2} * std_error.

    ``alpha`` may equal 1 (a zero-width interval at the mean); a
    zero-variance batch is flagged degenerate.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if summary.n < 1:
        raise ValueError("summary must cover at least one replicate")
    z = float(ndtri(1.0 - alpha / 2.0))
    half = z * summary.std_error
    return ConfidenceInterval(
        lo=summary.mean - half,
        hi=summary.mean + half,
        level=1.0 - alpha,
        method=CLT,
        degenerate=summary.degenerate or summary.variance == 0.0,
    )


def bootstrap_ci(values, alpha: float = 0.05, resamples: int = 1000, stream=None) -> ConfidenceInterval:
    """Percentile bootstrap interval for the mean.

    Resample ``b`` draws its indices from the substream keyed ``(b,)`` of
    ``stream``, so the interval is reproducible and independent of how the
    resamples might be scheduled.  Values are sorted first, which makes the
    interval a function of the multiset of values only.  Quantiles use the
    inverse-CDF convention: the q-quantile of B sorted means is entry
    ceil(q * B).
    """
    values = np.sort(np.asarray(values, dtype=float))
    if values.size < 2:
        raise ValueError("bootstrap needs at least two values")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if resamples < 100:
        raise ValueError("resamples must be at least 100")
    if not isinstance(stream, RandomStream):
        raise TypeError("bootstrap_ci needs a RandomStream to key its resamples")
    n = values.size
    means = np.empty(resamples)
    for b in range(resamples):
        idx = stream.child(b).generator.integers(0, n, size=n)
        means[b] = values[idx].mean()
    means.sort()

    def quantile(q: float) -> float:
        k = math.ceil(q * resamples)
        k = min(max(k, 1), resamples)
        return float(means[k - 1])

    return ConfidenceInterval(
        lo=quantile(alpha / 2.0),
        hi=quantile(1.0 - alpha / 2.0),
        level=1.0 - alpha,
        method=BOOTSTRAP_PERCENTILE,
        degenerate=bool(values[0] == values[-1]),
    )


def self_normalized_variance(values, costs) -> float:
    """Mean cost times sample variance: the figure of merit for rate tuning.

    By Wald-type reasoning this is proportional to the variance achievable
    per unit of sampling budget, so comparing it across rates is a fair
    cost-adjusted comparison.
    """
    values = np.asarray(values, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if values.shape != costs.shape or values.ndim != 1 or values.size == 0:
        raise ValueError("values and costs must be matching nonempty 1-d arrays")
    if values.size == 1:
        return 0.0
    _, m2 = _mean_m2(values)
    return float(costs.mean()) * (m2 / (values.size - 1))


def summary_to_json(summary: BatchSummary, ci: ConfidenceInterval) -> dict:
    """The canonical JSON payload for one estimation run."""
    return {
        "n": summary.n,
        "mean": summary.mean,
        "variance": summary.variance,
        "std_error": summary.std_error,
        "ci_lo": ci.lo,
        "ci_hi": ci.hi,
        "ci_method": ci.method,
        "level": ci.level,
        "total_cost": summary.total_cost,
        "wall_time_s": summary.wall_time,
    }
