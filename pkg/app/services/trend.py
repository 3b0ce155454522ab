"""
Stability parameters of cumulative daily precipitation

T_n / n^beta -> a for the cumulative sums T_n of nonzero daily volumes;
(a, beta) are estimated by ordinary least squares of log T_k on log k.
"""
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.core.config import Settings, settings
from app.core.errors import DomainError, InsufficientDataError
from app.core.logger import trend_logger
from app.schemas.trend import TrendFit


def _as_volumes(x: ArrayLike) -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise InsufficientDataError("empty series")
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("daily volumes must be nonnegative numbers")
    return arr


def cumulative_sums(x: ArrayLike) -> NDArray[np.float64]:
    """T_k = x_1 + ... + x_k"""
    return np.cumsum(_as_volumes(x))


def default_start(n: int, config: Optional[Settings] = None) -> int:
    """
    First regression index when none is given

    TREND_M when the series is longer than that, otherwise half the series
    (at least 2) so that short records still get a fit.
    """
    start = (config or settings).TREND_M
    if start < n:
        return start
    fallback = max(2, n // 2)
    trend_logger.warning(f"Series of {n} values is not longer than TREND_M={start}; regressing from k={fallback}")
    return fallback


def estimate_trend(x: ArrayLike, m: Optional[int] = None, config: Optional[Settings] = None) -> TrendFit:
    """
    Least-squares estimate of (a, beta) over k = m..n

    Minimizes sum_{k=m}^n (log T_k - beta log k - log a)^2 through the closed-form
    normal equations on centered log k, so noiseless power data are recovered
    to machine precision.

    Args:
        x: Daily volumes (zeros should be filtered out beforehand)
        m: First index of the regression range, default_start(n) when omitted
        config: Settings for TREND_M (module settings when omitted)

    Returns:
        TrendFit

    Raises:
        DomainError: m < 2, m > n or a nonpositive T_k in range
    """
    t = cumulative_sums(x)
    n = t.size
    m = default_start(n, config) if m is None else int(m)

    if m < 2:
        raise DomainError(f"m must be >= 2, got {m}")
    if m > n:
        raise DomainError(f"m={m} exceeds series length n={n}", details={"m": m, "n": n})

    tail = t[m - 1:]
    if np.any(tail <= 0):
        raise DomainError("cumulative sums must be positive over the regression range")

    log_k = np.log(np.arange(m, n + 1, dtype=float))
    log_t = np.log(tail)

    if log_k.size == 1:
        raise InsufficientDataError("regression range holds a single point", details={"m": m, "n": n})

    centered = log_k - log_k.mean()
    beta = float(np.dot(centered, log_t - log_t.mean()) / np.dot(centered, centered))
    log_a = float(log_t.mean() - beta * log_k.mean())
    residuals = log_t - log_a - beta * log_k
    sse = float(np.dot(residuals, residuals))

    trend_logger.info(f"Trend fit on k={m}..{n}: a={np.exp(log_a):.6g}, beta={beta:.6g}, sse={sse:.3g}")
    return TrendFit(a_hat=float(np.exp(log_a)), beta_hat=beta, m=m, n=n, residual_sse=sse)


def cumulative_average_series(x: ArrayLike, beta: float) -> NDArray[np.float64]:
    """T_k / k^beta for k = 1..n"""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    t = cumulative_sums(x)
    return t / np.arange(1, t.size + 1, dtype=float) ** beta


def nonzero_volumes(precip_mm: Sequence[float]) -> NDArray[np.float64]:
    """Drops dry days; the stability law concerns nonzero daily volumes"""
    arr = _as_volumes(precip_mm)
    return arr[arr > 0]
