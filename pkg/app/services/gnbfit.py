"""
NB and GNB models for wet-period durations

Durations are whole days >= 1 while the GNB law lives on k = 0, 1, ...; a
duration D is modelled as D = N + 1 with N ~ GNB(r, gamma, mu), so the model
probability of duration d is gnb_pmf(d - 1).
"""
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from math import ceil, exp, isfinite, log, nan, sqrt
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError
from scipy import stats
from scipy.optimize import minimize
from scipy.special import gammaln

from app.core.config import Settings, settings
from app.core.errors import DomainError, InsufficientDataError, NumericalError, OptimizerError
from app.core.logger import fit_logger
from app.schemas.fit import DurationHistogram, FitResult, Metric
from app.schemas.params import GGParams
from app.services.distcore import gnb_pmf_table, gnb_truncation_point

Durations = Union[Sequence[int], DurationHistogram]

_PENALTY: float = 1e3
_LOG_BOUND: float = 15.0
_MIN_EXPECTED: float = 5.0
_START_GAMMAS: Tuple[float, ...] = (0.6, 1.0, 1.5, 2.2)
_START_JITTER: Tuple[float, ...] = (1.0, 0.5, 2.0, 0.25, 4.0, 0.125, 8.0)


# ============================================================================
# HISTOGRAMS AND DISTANCES
# ============================================================================

def build_histogram(durations: Iterable[int]) -> DurationHistogram:
    """
    Unit-width histogram of wet-period durations

    Raises:
        InsufficientDataError: On empty input
        DomainError: On durations below one day
    """
    values = [int(d) for d in durations]
    if not values:
        raise InsufficientDataError("cannot build a histogram from no durations")
    if min(values) < 1:
        raise DomainError(f"durations must be >= 1 day, got {min(values)}")

    counts = Counter(values)
    return DurationHistogram(counts=dict(sorted(counts.items())), total=len(values))


def _as_histogram(durations: Durations) -> DurationHistogram:
    if isinstance(durations, DurationHistogram):
        return durations
    return build_histogram(durations)


def _support_size(h: DurationHistogram, p: GGParams) -> int:
    """Number of durations evaluated: histogram support and the model truncation range"""
    cap = 4 * h.max_duration + 100
    try:
        truncation = gnb_truncation_point(p) + 1
    except DomainError:
        truncation = cap
    return max(h.max_duration, min(truncation, cap))


def _frequency_vector(h: DurationHistogram, size: int) -> NDArray[np.float64]:
    f = np.zeros(size)
    for d, c in h.counts.items():
        f[d - 1] = c / h.total
    return f


def _distance(f: NDArray, pmf: NDArray, metric: Metric) -> float:
    # model mass beyond the evaluated range acts as one extra cell with f = 0
    residual = max(0.0, 1.0 - float(pmf.sum()))
    diff = np.abs(f - pmf)

    if metric == Metric.L1:
        return float(diff.sum()) + residual
    if metric == Metric.L2:
        return sqrt(float(np.square(diff).sum()) + residual ** 2)
    return max(float(diff.max()), residual)


def duration_pmf(size: int, p: GGParams) -> NDArray[np.float64]:
    """Model probabilities of durations 1..size under the shifted GNB law"""
    return gnb_pmf_table(size - 1, p)


def lp_distance(h: DurationHistogram, p: GGParams, metric: Metric = Metric.L1) -> float:
    """
    l1 / l2 / l-infinity distance between histogram frequencies and the model pmf

    Taken over the union of the histogram support and the model truncation range.
    """
    metric = Metric(metric)
    size = _support_size(h, p)
    return _distance(_frequency_vector(h, size), duration_pmf(size, p), metric)


def histogram_vs_pmf(h: DurationHistogram, p: GGParams) -> List[dict]:
    """Rows (k, frequency, pmf) for durations 1..support, the content of the fit plots"""
    size = _support_size(h, p)
    f = _frequency_vector(h, size)
    pmf = duration_pmf(size, p)
    return [
        {"k": d, "frequency": float(f[d - 1]), "pmf": float(pmf[d - 1])}
        for d in range(1, size + 1)
    ]


# ============================================================================
# NEGATIVE BINOMIAL
# ============================================================================

def _shifted_moments(h: DurationHistogram) -> Tuple[float, float]:
    keys = np.array(list(h.counts), dtype=float) - 1.0
    weights = np.array(list(h.counts.values()), dtype=float) / h.total
    mean = float((keys * weights).sum())
    var = float((np.square(keys - mean) * weights).sum())
    return mean, var


def _nb_moment_params(h: DurationHistogram) -> Tuple[float, float]:
    """(r, mu) from mean r/mu and variance r(1+mu)/mu^2 of the shifted counts"""
    mean, var = _shifted_moments(h)
    mean = max(mean, 1e-3)
    if var <= mean:
        # under-dispersed data: close to Poisson, large r
        r = 50.0
        return r, r / mean
    mu = mean / (var - mean)
    return mean * mu, mu


def fit_nb(durations: Durations, method: str = "mle", config: Optional[Settings] = None) -> FitResult:
    """
    Negative binomial (gamma = 1) model for durations

    Args:
        durations: Durations in days or their histogram
        method: "mle" (maximum likelihood on the shifted counts) or "moments"
        config: Settings for FIT_TOLERANCE (module settings when omitted)

    Returns:
        FitResult with the l1 distance to the histogram

    Raises:
        OptimizerError: If the likelihood cannot be maximized
    """
    config = config or settings
    h = _as_histogram(durations)
    r0, mu0 = _nb_moment_params(h)

    if method == "moments":
        r_hat, mu_hat = r0, mu0
    elif method == "mle":
        values = np.array(list(h.counts), dtype=float) - 1.0
        weights = np.array(list(h.counts.values()), dtype=float)

        def negative_loglik(theta: NDArray) -> float:
            if np.any(np.abs(theta) > _LOG_BOUND):
                return np.inf
            r, mu = np.exp(theta)
            ll = stats.nbinom.logpmf(values, r, mu / (1.0 + mu))
            total = -float((weights * ll).sum())
            return total if isfinite(total) else np.inf

        result = minimize(
            negative_loglik,
            x0=np.log([r0, mu0]),
            method="Nelder-Mead",
            options={"xatol": config.FIT_TOLERANCE, "fatol": config.FIT_TOLERANCE, "maxiter": 4000},
        )
        if not isfinite(result.fun):
            fit_logger.error(f"NB likelihood maximization failed: {result.message}")
            raise OptimizerError(
                "negative binomial likelihood maximization failed",
                details={"message": str(result.message), "start": [r0, mu0]},
            )
        r_hat, mu_hat = (float(v) for v in np.exp(result.x))
    else:
        raise DomainError(f"unknown fit_nb method '{method}'")

    params = GGParams(r=r_hat, gamma=1.0, mu=mu_hat)
    fit_logger.info(f"NB fit ({method}) on {h.total} periods: r={r_hat:.6g}, mu={mu_hat:.6g}")

    return FitResult(
        params=params,
        metric=Metric.L1,
        distance=lp_distance(h, params, Metric.L1),
        chi_square_pvalue=_safe_pvalue(h, params, n_fitted=2),
    )


# ============================================================================
# GENERALIZED NEGATIVE BINOMIAL
# ============================================================================

def _start_points(
        h: DurationHistogram,
        fixed_r: Optional[float],
        fixed_gamma: Optional[float],
        n_starts: int,
) -> List[GGParams]:
    """Deterministic multi-start grid on log parameters, mu matched to the mean"""
    r0, _ = _nb_moment_params(h)
    mean, _ = _shifted_moments(h)
    mean = max(mean, 1e-3)

    rs = [fixed_r] if fixed_r is not None else [min(r0, 20.0) * 0.6, min(r0, 20.0) * 1.4]
    gammas = [fixed_gamma] if fixed_gamma is not None else list(_START_GAMMAS)
    n_jitter = min(len(_START_JITTER), ceil(n_starts / (len(rs) * len(gammas))))

    starts = []
    for r, g, jitter in product(rs, gammas, _START_JITTER[:n_jitter]):
        # E Lambda = Gamma(r + 1/g) / Gamma(r) * mu^{-1/g} set equal to the mean count
        log_mu = g * (float(gammaln(r + 1.0 / g) - gammaln(r)) - log(mean))
        starts.append(GGParams(r=r, gamma=g, mu=exp(np.clip(log_mu, -_LOG_BOUND, _LOG_BOUND)) * jitter))
    return starts[:n_starts]


def fit_gnb(
        h: DurationHistogram,
        fixed_r: Optional[float] = None,
        metric: Metric = Metric.L1,
        fixed_gamma: Optional[float] = None,
        nest: bool = True,
        config: Optional[Settings] = None,
) -> FitResult:
    """
    Fit the shifted GNB law to a duration histogram by distance minimization

    Nelder-Mead on log parameters from a deterministic multi-start grid. With
    fixed_r only (gamma, mu) move, which is the fine-tuning protocol for a
    shape taken from the NB fit. When gamma is free and nest is set, the
    gamma = 1 optimum for the same metric is added as a start, so the GNB
    distance never exceeds the NB one.

    Args:
        h: Duration histogram
        fixed_r: Keep r at this value
        metric: Distance to minimize
        fixed_gamma: Keep gamma at this value (1.0 gives the NB model class)
        nest: Seed the search with the gamma = 1 optimum
        config: Settings for FIT_STARTS, FIT_TOLERANCE and WORKERS (module settings when omitted)

    Returns:
        FitResult with the best parameters and achieved distance

    Raises:
        OptimizerError: If no start produced a finite objective
    """
    metric = Metric(metric)
    config = config or settings
    if fixed_r is not None and not fixed_r > 0:
        raise DomainError(f"fixed_r must be positive, got {fixed_r}")
    if fixed_gamma is not None and not fixed_gamma > 0:
        raise DomainError(f"fixed_gamma must be positive, got {fixed_gamma}")

    free = [name for name, fixed in (("r", fixed_r), ("gamma", fixed_gamma), ("mu", None)) if fixed is None]

    def to_params(theta: NDArray) -> GGParams:
        values = dict(zip(free, np.exp(theta)))
        return GGParams(
            r=fixed_r if fixed_r is not None else float(values["r"]),
            gamma=fixed_gamma if fixed_gamma is not None else float(values["gamma"]),
            mu=float(values["mu"]),
        )

    def to_theta(p: GGParams) -> NDArray:
        return np.log([getattr(p, name) for name in free])

    def objective(theta: NDArray) -> float:
        if np.any(np.abs(theta) > _LOG_BOUND):
            return _PENALTY
        try:
            value = lp_distance(h, to_params(theta), metric)
        except (NumericalError, DomainError, ValidationError, FloatingPointError, OverflowError):
            return _PENALTY
        return value if isfinite(value) else _PENALTY

    starts = _start_points(h, fixed_r, fixed_gamma, config.FIT_STARTS)
    if nest and fixed_gamma is None:
        nb = fit_gnb(h, fixed_r=fixed_r, metric=metric, fixed_gamma=1.0, nest=False, config=config)
        starts.append(nb.params)

    def run(start: GGParams):
        return minimize(
            objective,
            x0=to_theta(start),
            method="Nelder-Mead",
            options={
                "xatol": config.FIT_TOLERANCE,
                "fatol": config.FIT_TOLERANCE,
                "maxiter": 1000 * len(free),
                "adaptive": len(free) > 2,
            },
        )

    if config.WORKERS > 1:
        with ThreadPoolExecutor(max_workers=config.WORKERS) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]

    best = min(results, key=lambda res: res.fun)
    if not best.fun < _PENALTY:
        fit_logger.error(f"GNB fit failed for all {len(starts)} starts (metric={metric.value})")
        raise OptimizerError(
            "no start produced a finite distance",
            details={"metric": metric.value, "starts": [s.model_dump() for s in starts]},
        )
    if not best.success:
        fit_logger.warning(f"GNB fit stopped before convergence: {best.message}")

    params = to_params(best.x)
    fit_logger.info(
        f"GNB fit metric={metric.value} free={free} on {h.total} periods: "
        f"r={params.r:.6g}, gamma={params.gamma:.6g}, mu={params.mu:.6g}, distance={best.fun:.6g}"
    )

    return FitResult(
        params=params,
        metric=metric,
        distance=float(best.fun),
        fixed_r=fixed_r,
        chi_square_pvalue=_safe_pvalue(h, params, n_fitted=len(free)),
    )


# ============================================================================
# GOODNESS OF FIT
# ============================================================================

def _pooled_cells(observed: NDArray, expected: NDArray) -> Tuple[List[float], List[float]]:
    """Merge adjacent cells left to right until each expected count is >= 5"""
    obs_cells: List[float] = []
    exp_cells: List[float] = []
    acc_o = acc_e = 0.0

    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= _MIN_EXPECTED:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0

    if acc_e > 0 or acc_o > 0:
        if exp_cells:
            obs_cells[-1] += acc_o
            exp_cells[-1] += acc_e
        else:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)

    return obs_cells, exp_cells


def chi_square_statistic(h: DurationHistogram, p: GGParams, n_fitted: int) -> Tuple[float, int]:
    """
    Pearson statistic with pooled cells and its degrees of freedom

    Cells are durations 1..max plus the tail beyond the largest observed
    duration; df = cells - 1 - n_fitted.

    Raises:
        InsufficientDataError: Fewer than two pooled cells or no degrees of freedom
    """
    if n_fitted < 0:
        raise DomainError(f"n_fitted must be >= 0, got {n_fitted}")
    size = h.max_duration
    pmf = duration_pmf(size, p)
    tail = max(0.0, 1.0 - float(pmf.sum()))

    observed = np.append(_frequency_vector(h, size) * h.total, 0.0)
    expected = np.append(pmf, tail) * h.total
    obs_cells, exp_cells = _pooled_cells(observed, expected)

    df = len(exp_cells) - 1 - n_fitted
    if len(exp_cells) < 2 or df < 1:
        raise InsufficientDataError(
            "not enough pooled cells for the chi-square test",
            details={"cells": len(exp_cells), "n_fitted": n_fitted},
        )

    o = np.array(obs_cells)
    e = np.array(exp_cells)
    return float((np.square(o - e) / e).sum()), df


def chi_square_gof(h: DurationHistogram, p: GGParams, n_fitted: int) -> float:
    """
    P-value of the Pearson chi-square goodness-of-fit test

    n_fitted is the number of parameters estimated from h (0 for a model fixed
    in advance); it lowers the degrees of freedom.
    """
    statistic, df = chi_square_statistic(h, p, n_fitted)
    return float(stats.chi2.sf(statistic, df))


def _safe_pvalue(h: DurationHistogram, p: GGParams, n_fitted: int) -> float:
    """NaN when too few pooled cells are left for the test"""
    try:
        return chi_square_gof(h, p, n_fitted)
    except InsufficientDataError as e:
        fit_logger.warning(f"Chi-square test skipped: {e.message}")
        return nan
