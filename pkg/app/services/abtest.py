"""
Abnormality test for wet-period totals and the moving-window scan

Under homogeneity the volumes of a window are iid GG(r, gamma, mu), so the
gamma-powered volumes are iid G_{r,mu} and
SR_GG = (m - 1) V_1^gamma / (V_2^gamma + ... + V_m^gamma) has the Snedecor-Fisher
law Q_{r,(m-1)r} whenever the tested observation V_1 is chosen independently
of the values. Testing the window maximum, as the scan does, rejects more
often than the nominal level under homogeneity.
"""
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from math import isfinite
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from app.core.config import settings
from app.core.errors import DomainError, InsufficientDataError, OptimizerError
from app.core.logger import abtest_logger
from app.schemas.abtest import ExtremityClass, TestDecision, WindowVote
from app.schemas.params import GGParams
from app.services.distcore import sf_quantile

_SCAN_CHUNK: int = 4096


def _as_window(volumes: ArrayLike) -> NDArray[np.float64]:
    v = np.asarray(volumes, dtype=float).ravel()
    if v.size < 2:
        raise DomainError(f"window must hold at least 2 volumes, got {v.size}")
    if np.any(np.isnan(v)) or np.any(v <= 0):
        raise DomainError("volumes must be positive")
    return v


def _check_level(alpha_level: float) -> None:
    if not 0 < alpha_level < 1:
        raise DomainError(f"alpha_level must lie in (0, 1), got {alpha_level}")


def _check_shape(name: str, value: float) -> None:
    if not (value > 0 and isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value}")


def _tested(v: NDArray, tested_index: Optional[int]) -> int:
    if tested_index is None:
        return int(np.argmax(v))  # earliest maximum
    if not 0 <= tested_index < v.size:
        raise DomainError(f"tested_index {tested_index} outside window of size {v.size}")
    return int(tested_index)


def _ratio_rows(log_v: NDArray, gamma: float, idx: NDArray) -> NDArray:
    """(m - 1) V_idx^gamma / sum of the other V_j^gamma for every row, scaled by the row maximum"""
    m = log_v.shape[1]
    rows = np.arange(log_v.shape[0])
    powers = np.exp(gamma * (log_v - log_v.max(axis=1, keepdims=True)))
    tested = powers[rows, idx]
    rest = powers.sum(axis=1) - tested
    with np.errstate(divide="ignore"):
        return np.where(rest > 0, (m - 1) * tested / rest, np.inf)


# ============================================================================
# TESTS
# ============================================================================

def sr_statistic(volumes: Sequence[float], gamma: float, tested_index: Optional[int] = None) -> float:
    """
    SR_GG = (m - 1) V_1^gamma / (V_2^gamma + ... + V_m^gamma)

    Args:
        volumes: Window of positive wet-period totals
        gamma: Power of the GG law
        tested_index: Position of V_1 in the window; None tests the window maximum

    Returns:
        Statistic value (1 for a window of equal volumes)
    """
    _check_shape("gamma", gamma)
    v = _as_window(volumes)
    idx = _tested(v, tested_index)
    return float(_ratio_rows(np.log(v)[None, :], gamma, np.array([idx]))[0])


@lru_cache(maxsize=256)
def critical_value(alpha_level: float, r: float, m: int) -> float:
    """(1 - alpha) quantile of Q_{r,(m-1)r}"""
    _check_level(alpha_level)
    _check_shape("r", r)
    return sf_quantile(1.0 - alpha_level, r, (m - 1) * r)


def test_abnormal(
        volumes: Sequence[float],
        r: float,
        gamma: float,
        alpha_level: float,
        tested_index: Optional[int] = None,
) -> TestDecision:
    """
    Snedecor-Fisher test of H0: the tested volume comes from the same GG law as the rest

    Raises:
        DomainError: Invalid volumes, shape parameters or level
    """
    _check_shape("r", r)
    _check_level(alpha_level)
    statistic = sr_statistic(volumes, gamma, tested_index)
    m = len(volumes)
    critical = critical_value(float(alpha_level), float(r), m)
    return TestDecision(
        statistic=statistic,
        critical_value=critical,
        alpha_level=alpha_level,
        reject=statistic > critical,
        d1=r,
        d2=(m - 1) * r,
    )


test_abnormal.__test__ = False  # not a pytest test despite the name


def sr_test_classic(
        volumes: Sequence[float],
        r: float,
        alpha_level: float,
        tested_index: Optional[int] = None,
) -> TestDecision:
    """
    Classical SR test for gamma-distributed volumes

    SR = (m - 1) V_1 / (V_2 + ... + V_m), compared with the same Snedecor-Fisher
    quantile; the SR_GG test at gamma = 1.
    """
    _check_shape("r", r)
    _check_level(alpha_level)
    v = _as_window(volumes)
    idx = _tested(v, tested_index)
    m = v.size
    statistic = float((m - 1) * v[idx] / (v.sum() - v[idx]))
    critical = critical_value(float(alpha_level), float(r), m)
    return TestDecision(
        statistic=statistic,
        critical_value=critical,
        alpha_level=alpha_level,
        reject=statistic > critical,
        d1=r,
        d2=(m - 1) * r,
    )


def fit_volume_gg(volumes: Sequence[float], fixed_gamma: Optional[float] = None) -> GGParams:
    """
    Maximum-likelihood GG law for wet-period totals

    scipy's gengamma(a, c, scale) with loc fixed at 0 maps to
    r = a, gamma = c, mu = scale^{-c}. With fixed_gamma the powered volumes
    V^gamma are gamma distributed and only (r, mu) are fitted; fixed_gamma = 1
    is the gamma law of the classical SR test.

    Raises:
        InsufficientDataError: Fewer than 10 volumes
        OptimizerError: Non-finite estimates
    """
    v = np.asarray(volumes, dtype=float).ravel()
    if v.size < 10:
        raise InsufficientDataError(f"need at least 10 volumes, got {v.size}")
    if np.any(v <= 0):
        raise DomainError("volumes must be positive")

    if fixed_gamma is not None:
        _check_shape("fixed_gamma", fixed_gamma)
        a, _, scale = stats.gamma.fit(v ** fixed_gamma, floc=0)
        c = float(fixed_gamma)
        mu = 1.0 / scale if scale > 0 else float("nan")
    else:
        a, c, _, scale = stats.gengamma.fit(v, 1.0, 1.0, floc=0)
        mu = float(scale) ** (-float(c)) if scale > 0 else float("nan")

    if not all(isfinite(t) and t != 0 for t in (a, c, mu)) or a <= 0 or mu <= 0:
        abtest_logger.error(f"GG likelihood fit failed: a={a}, c={c}, scale={scale}")
        raise OptimizerError("GG maximum-likelihood fit did not converge", details={"a": a, "c": c, "scale": scale})

    params = GGParams(r=float(a), gamma=float(c), mu=float(mu))
    abtest_logger.info(f"GG volume fit on {v.size} periods: r={params.r:.4g}, gamma={params.gamma:.4g}, mu={params.mu:.4g}")
    return params


# ============================================================================
# MOVING-WINDOW SCAN
# ============================================================================

def _scan_block(log_v: NDArray, window_m: int, gamma: float, critical: float, start: int, stop: int) -> Tuple[NDArray, NDArray]:
    windows = sliding_window_view(log_v, window_m)[start:stop]
    idx = np.argmax(windows, axis=1)
    reject = _ratio_rows(windows, gamma, idx) > critical
    return start + idx, reject


def windows_containing(n: int, window_m: int) -> NDArray[np.int64]:
    """Number of full windows of size window_m that contain each position"""
    i = np.arange(n)
    return np.minimum.reduce([i + 1, np.full(n, window_m), n - i, np.full(n, n - window_m + 1)])


def moving_window_scan(
        volumes: Sequence[float],
        window_m: int,
        r: float,
        gamma: float,
        alpha_level: float,
        workers: Optional[int] = None,
) -> List[WindowVote]:
    """
    Slide a window over consecutive wet periods and tally votes per period

    A window votes for period i when i is the window maximum (earliest on ties)
    and the window's test rejects H0. With c_i votes out of w_i windows containing
    i the class is absolute for c_i = w_i, intermediate for c_i > w_i / 2,
    relative for c_i >= 1 and none otherwise. Only full windows are evaluated.

    Args:
        volumes: Wet-period totals in time order
        window_m: Window size m
        r: Shape used in the Snedecor-Fisher degrees of freedom
        gamma: Power of the GG law (1 gives the classical SR scan)
        alpha_level: Significance level of each window test
        workers: Thread pool size (default settings.WORKERS); results do not depend on it

    Returns:
        One WindowVote per period

    Raises:
        DomainError: Series shorter than the window or invalid parameters
    """
    _check_shape("gamma", gamma)
    _check_shape("r", r)
    _check_level(alpha_level)

    v = np.asarray(volumes, dtype=float).ravel()
    n = v.size
    if window_m < 2 or n < window_m:
        raise DomainError(
            f"need 2 <= window_m <= series length, got window_m={window_m}, n={n}",
            details={"window_m": window_m, "n": n},
        )
    if np.any(np.isnan(v)) or np.any(v <= 0):
        raise DomainError("volumes must be positive")

    log_v = np.log(v)
    critical = critical_value(float(alpha_level), float(r), int(window_m))
    n_windows = n - window_m + 1
    bounds = [(s, min(s + _SCAN_CHUNK, n_windows)) for s in range(0, n_windows, _SCAN_CHUNK)]
    workers = workers or settings.WORKERS

    def run(bound: Tuple[int, int]) -> Tuple[NDArray, NDArray]:
        return _scan_block(log_v, window_m, gamma, critical, *bound)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, bounds))
    else:
        blocks = [run(b) for b in bounds]

    votes = np.zeros(n, dtype=np.int64)
    for positions, reject in blocks:
        np.add.at(votes, positions[reject], 1)

    counts = windows_containing(n, window_m)
    result = [
        WindowVote(index=i, votes=int(c), windows=int(w), extremity=classify_votes(int(c), int(w)))
        for i, (c, w) in enumerate(zip(votes, counts))
    ]

    flagged = sum(1 for vote in result if vote.extremity != ExtremityClass.NOT_EXTREME)
    abtest_logger.info(
        f"Scan of {n} periods, window {window_m}, alpha {alpha_level}: "
        f"{n_windows} windows, critical value {critical:.6g}, {flagged} periods flagged"
    )
    return result


def classify_votes(votes: int, windows: int) -> ExtremityClass:
    if windows > 0 and votes == windows:
        return ExtremityClass.ABSOLUTE
    if 2 * votes > windows:
        return ExtremityClass.INTERMEDIATE
    if votes >= 1:
        return ExtremityClass.RELATIVE
    return ExtremityClass.NOT_EXTREME


def moving_window_classify(
        volumes: Sequence[float],
        window_m: int,
        r: float,
        gamma: float,
        alpha_level: float,
        workers: Optional[int] = None,
) -> List[ExtremityClass]:
    """Extremity class of every period from moving_window_scan"""
    return [vote.extremity for vote in moving_window_scan(volumes, window_m, r, gamma, alpha_level, workers)]
