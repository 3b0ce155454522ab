"""
Limit law M_{r,alpha,gamma,lambda} of the maximum daily precipitation within a wet period

F(x) = integral of exp(-z x^{-alpha}) g*(z; r, gamma, lambda) dz, the law of
G_bar_{r,gamma,lambda}^{1/alpha} / W_alpha. Besides evaluation and sampling
the module carries the Monte-Carlo checks of the mixed-exponential form and
the moments, the threshold rule for abnormal daily maxima, a parameter
estimator, and simulators for maxima and sums over GNB-distributed counts.

The law is also infinitely divisible for r <= 1 and alpha*gamma <= 1; that
property has no constructive counterpart here.
"""
from math import exp, expm1, inf, isfinite, isinf, log, sqrt
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import ValidationError
from scipy.optimize import brentq, minimize
from scipy.special import gammaln

from app.core.config import Settings, settings
from app.core.errors import DomainError, InsufficientDataError, NumericalError, RepresentationError
from app.core.logger import extremes_logger
from app.schemas.extremes import ExtremeFit, MonteCarloEstimate, Representation
from app.schemas.params import ExtremeParams, GGParams
from app.services.distcore import (
    FloatOrArray,
    Rng,
    Size,
    bracket_increasing,
    gamma_sample,
    gg_log_const,
    gnb_sample,
    log_integral,
    mixture_log_integral,
    pareto_mix_sample,
    safe_exp,
    stable_sample,
    weibull_sample,
    z_ratio_sample,
)
from app.services.montecarlo import sharded_mean

SummandSampler = Callable[[Rng, int], NDArray[np.float64]]

_SUM_BUDGET: int = 1 << 22
_FIT_GRID: int = 50
_PENALTY: float = 1e3


# ============================================================================
# EVALUATION
# ============================================================================

def _log_sf_integral(s: float, p: ExtremeParams, rel_tol: Optional[float] = None) -> float:
    """log of the integral of (1 - e^{-s z}) g*(z; r, gamma, lambda) dz"""
    mixing = p.mixing()
    c = gg_log_const(mixing)
    a = p.gamma * p.r
    g, lam = p.gamma, p.lam

    def h(t: float) -> float:
        w = s * safe_exp(t)
        if w <= 0:
            return -inf
        return c + a * t - lam * safe_exp(g * t) + log(-expm1(-w))

    def dh(t: float) -> float:
        w = s * safe_exp(t)
        if w == 0:
            ratio = 1.0
        elif w > 700:
            ratio = 0.0
        else:
            ratio = w / expm1(w)
        return a - lam * g * safe_exp(g * t) + ratio

    return log_integral(h, dh, t0=-log(s) if s > 0 else 0.0, rel_tol=rel_tol)


def _sf_scalar(x: float, p: ExtremeParams, rel_tol: Optional[float] = None) -> float:
    if x == 0:
        return 1.0
    if isinf(x):
        return 0.0
    s = x ** -p.alpha
    if s == 0:
        return 0.0
    return min(1.0, exp(_log_sf_integral(s, p, rel_tol)))


def _cdf_scalar(x: float, p: ExtremeParams, rel_tol: Optional[float] = None) -> float:
    if x == 0:
        return 0.0
    if isinf(x):
        return 1.0
    s = x ** -p.alpha
    if s == 0:
        return 1.0
    value = exp(mixture_log_integral(shift=0.0, s=s, p=p.mixing(), rel_tol=rel_tol))
    if value > 0.5:
        return 1.0 - _sf_scalar(x, p, rel_tol)
    return value


def _pdf_scalar(x: float, p: ExtremeParams, rel_tol: Optional[float] = None) -> float:
    if isinf(x):
        return 0.0
    s = x ** -p.alpha
    log_integral_value = mixture_log_integral(shift=0.0, s=s, p=p.mixing(), power=1.0, rel_tol=rel_tol)
    return exp(log(p.alpha) - (p.alpha + 1.0) * log(x) + log_integral_value)


def _map(
        fn: Callable[[float, ExtremeParams, Optional[float]], float],
        x: ArrayLike,
        p: ExtremeParams,
        rel_tol: Optional[float],
        strict: bool = False,
) -> FloatOrArray:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or (strict and np.any(arr == 0)):
        raise DomainError(f"x must be {'>' if strict else '>='} 0")
    out = np.array([fn(float(v), p, rel_tol) for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def extreme_cdf(x: ArrayLike, p: ExtremeParams, rel_tol: Optional[float] = None) -> FloatOrArray:
    """
    F(x; r, alpha, gamma, lambda) by adaptive quadrature

    Evaluated in log space, so values below the double range come out as 0
    rather than failing. Above 1/2 the survival integral is used instead.
    rel_tol defaults to QUAD_REL_TOL.
    """
    return _map(_cdf_scalar, x, p, rel_tol)


def extreme_sf(x: ArrayLike, p: ExtremeParams, rel_tol: Optional[float] = None) -> FloatOrArray:
    """1 - F(x) integrated directly, accurate far into the tail"""
    return _map(_sf_scalar, x, p, rel_tol)


def extreme_pdf(x: ArrayLike, p: ExtremeParams, rel_tol: Optional[float] = None) -> FloatOrArray:
    """alpha x^{-alpha-1} * integral of z e^{-z x^{-alpha}} g*(z) dz for x > 0"""
    return _map(_pdf_scalar, x, p, rel_tol, strict=True)


def extreme_quantile(q: float, p: ExtremeParams, rel_tol: Optional[float] = None) -> float:
    """Root of extreme_cdf(x) = q; the upper half is solved on the survival function"""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")

    if q > 0.5:
        def f(x: float) -> float:
            return (1.0 - q) - _sf_scalar(x, p, rel_tol)
    else:
        def f(x: float) -> float:
            return _cdf_scalar(x, p, rel_tol) - q

    x0 = p.lam ** (-1.0 / p.alpha_gamma) * (q / (1.0 - q)) ** (1.0 / p.alpha)
    lo, hi = bracket_increasing(f, x0)
    if lo == hi:
        return lo
    return float(brentq(f, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500))


def quantile_table(p: ExtremeParams, qs: Sequence[float], rel_tol: Optional[float] = None) -> List[Tuple[float, float]]:
    """(q, x) pairs for the requested probabilities"""
    return [(float(q), extreme_quantile(float(q), p, rel_tol)) for q in qs]


def abnormal_daily_threshold(p: ExtremeParams, level: float, rel_tol: Optional[float] = None) -> float:
    """Daily maximum above which a wet period is abnormal at the given level"""
    if not 0 < level < 1:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    return extreme_quantile(1.0 - level, p, rel_tol)


def flag_abnormal_maxima(
        maxima: Sequence[float],
        p: ExtremeParams,
        level: float,
        rel_tol: Optional[float] = None,
) -> List[bool]:
    """Flags maxima that exceed abnormal_daily_threshold(p, level)"""
    threshold = abnormal_daily_threshold(p, level, rel_tol)
    return [float(m) > threshold for m in maxima]


# ============================================================================
# SAMPLING
# ============================================================================

def _z_factor(r: float, rng: Rng, size: Size) -> FloatOrArray:
    # Z_{1,1} degenerates to the constant 1
    if r == 1:
        return 1.0 if size is None else np.ones(size)
    return z_ratio_sample(r, 1.0, rng, size)


def _require(condition: bool, representation: Representation, constraint: str) -> None:
    if not condition:
        raise RepresentationError(
            f"representation '{representation.value}' requires {constraint}",
            details={"representation": representation.value, "constraint": constraint},
        )


def admissible_representations(p: ExtremeParams) -> List[Representation]:
    """Representations whose parameter constraints p satisfies"""
    checks = {
        Representation.DIRECT: True,
        Representation.RATIO_WEIBULL: p.r <= 1,
        Representation.TEMPERED_SF: p.gamma <= 1,
        Representation.PARETO_MIX: p.r <= 1 and p.gamma <= 1,
        Representation.FOLDED_NORMAL: p.r <= 1 and p.alpha_gamma <= 1,
    }
    return [rep for rep, ok in checks.items() if ok]


def extreme_sample(
        p: ExtremeParams,
        rng: Rng,
        representation: Union[Representation, str] = Representation.DIRECT,
        size: Size = None,
) -> FloatOrArray:
    """
    Draws of M_{r,alpha,gamma,lambda} through one of its product representations

    direct:        lambda^{-1/(alpha gamma)} G_{r,1}^{1/(alpha gamma)} / W_alpha
    ratio_weibull: (lambda Z_{r,1})^{-1/(alpha gamma)} W_{alpha gamma} / W_alpha        (r <= 1)
    tempered_sf:   (r Q_{r,1} E^{1 - gamma} / lambda)^{1/(alpha gamma)}                  (gamma <= 1)
    pareto_mix:    lambda^{-1/(alpha gamma)} Pi_alpha (S_{gamma,1} Z_{r,1}^{1/gamma})^{-1/alpha}
                                                                                      (r, gamma <= 1)
    folded_normal: |X| sqrt(2 W_1) / (lambda^{1/(alpha gamma)} W_alpha S_{alpha gamma,1} Z_{r,1}^{1/(alpha gamma)})
                                                                                      (r, alpha gamma <= 1)

    All follow from M^{alpha gamma} = G_{r,1} / (lambda W_1^gamma). tempered_sf
    is the Direct law written through the Snedecor-Fisher ratio
    Q_{r,1} = (G_{r,1}/r) / E: the tempering factor E^{1 - gamma} reuses the E
    in the denominator of Q, so the draw equals
    lambda^{-1/(alpha gamma)} G_{r,1}^{1/(alpha gamma)} E^{-1/alpha} factor for
    factor. A product of independent S_{gamma,1} and Q_{r,1} has this law only
    at gamma = 1. Every other representation uses independent factors.

    Raises:
        RepresentationError: If p violates the representation's constraints
    """
    try:
        rep = Representation(representation)
    except ValueError:
        raise DomainError(
            f"unknown representation {representation!r}",
            details={"representations": [item.value for item in Representation]},
        )
    r, alpha, gamma, lam = p.r, p.alpha, p.gamma, p.lam
    ag = p.alpha_gamma

    if rep == Representation.DIRECT:
        g = gamma_sample(r, 1.0, rng, size)
        return lam ** (-1.0 / ag) * g ** (1.0 / ag) / weibull_sample(alpha, rng, size)

    if rep == Representation.RATIO_WEIBULL:
        _require(r <= 1, rep, "r in (0, 1]")
        z = _z_factor(r, rng, size)
        return (lam * z) ** (-1.0 / ag) * weibull_sample(ag, rng, size) / weibull_sample(alpha, rng, size)

    if rep == Representation.TEMPERED_SF:
        _require(gamma <= 1, rep, "gamma in (0, 1]")
        e = rng.standard_exponential(size=size)
        q = (gamma_sample(r, 1.0, rng, size) / r) / e
        return (r * q * e ** (1.0 - gamma) / lam) ** (1.0 / ag)

    if rep == Representation.PARETO_MIX:
        _require(r <= 1 and gamma <= 1, rep, "r in (0, 1] and gamma in (0, 1]")
        s = stable_sample(gamma, rng, size)
        z = _z_factor(r, rng, size)
        return lam ** (-1.0 / ag) * pareto_mix_sample(alpha, rng, size) * (s * z ** (1.0 / gamma)) ** (-1.0 / alpha)

    _require(r <= 1 and ag <= 1, rep, "r in (0, 1] and alpha*gamma in (0, 1]")
    folded = np.abs(rng.standard_normal(size=size)) * np.sqrt(2.0 * rng.standard_exponential(size=size))
    return folded / mixing_scale_sample(p, rng, size)


def _check_mixed_exponential(p: ExtremeParams) -> None:
    if not (p.r <= 1 and p.alpha_gamma <= 1):
        raise RepresentationError(
            "mixed exponential form requires r in (0, 1] and alpha*gamma in (0, 1]",
            details={"r": p.r, "alpha_gamma": p.alpha_gamma},
        )


def mixing_scale_sample(p: ExtremeParams, rng: Rng, size: Size = None) -> FloatOrArray:
    """
    U = lambda^{1/(alpha gamma)} W_alpha S_{alpha gamma,1} Z_{r,1}^{1/(alpha gamma)}

    Mixing variable of the exponential-mixture form 1 - F(x) = E exp(-x U),
    valid for r <= 1 and alpha*gamma <= 1.
    """
    _check_mixed_exponential(p)
    ag = p.alpha_gamma
    return (
        p.lam ** (1.0 / ag)
        * weibull_sample(p.alpha, rng, size)
        * stable_sample(ag, rng, size)
        * _z_factor(p.r, rng, size) ** (1.0 / ag)
    )


def mixed_exp_tail_estimate(
        x: float,
        p: ExtremeParams,
        n_draws: int,
        seed: Optional[int] = None,
        n_shards: Optional[int] = None,
        workers: Optional[int] = None,
        config: Optional[Settings] = None,
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of E exp(-x U), which equals 1 - F(x); shard defaults come from config"""
    if not x > 0:
        raise DomainError(f"x must be > 0, got {x}")
    _check_mixed_exponential(p)

    def draw(rng: Rng, size: int) -> NDArray:
        return np.exp(-x * mixing_scale_sample(p, rng, size))

    return sharded_mean(draw, n_draws, seed, n_shards, workers, config=config)


def mixed_exp_tail(x: float, p: ExtremeParams, n_draws: int, seed: Optional[int] = None) -> float:
    return mixed_exp_tail_estimate(x, p, n_draws, seed).value


# ============================================================================
# MOMENTS
# ============================================================================

def extreme_moment(delta: float, p: ExtremeParams) -> float:
    """
    E M^delta = Gamma(r + delta/(alpha gamma)) Gamma(1 - delta/alpha) / (lambda^{delta/(alpha gamma)} Gamma(r))

    Raises:
        DomainError: Unless 0 < delta < alpha (the moment does not exist otherwise)
    """
    if not 0 < delta < p.alpha:
        raise DomainError(f"moment of order {delta} exists only for 0 < delta < alpha={p.alpha}")
    ratio = delta / p.alpha_gamma
    log_moment = gammaln(p.r + ratio) + gammaln(1.0 - delta / p.alpha) - ratio * log(p.lam) - gammaln(p.r)
    return float(np.exp(log_moment))


def extreme_moment_mc(
        delta: float,
        p: ExtremeParams,
        n_draws: int,
        seed: Optional[int] = None,
        representation: Union[Representation, str] = Representation.DIRECT,
        config: Optional[Settings] = None,
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of E M^delta from sampled maxima"""
    if not delta > 0:
        raise DomainError(f"delta must be > 0, got {delta}")

    def draw(rng: Rng, size: int) -> NDArray:
        return extreme_sample(p, rng, representation, size) ** delta

    return sharded_mean(draw, n_draws, seed, config=config)


# ============================================================================
# RANDOM MAXIMA AND SUMS OVER GNB COUNTS
# ============================================================================

def random_max_sample(
        p_count: GGParams,
        inverse_sf: Callable[[NDArray], NDArray],
        rng: Rng,
        size: Size = None,
) -> FloatOrArray:
    """
    max{X_1, ..., X_N} with N ~ GNB(p_count) and iid X_j

    Drawn exactly as x with P(X > x) = 1 - U^{1/N}; an empty maximum (N = 0) is 0.

    Args:
        p_count: GNB parameters of the count
        inverse_sf: Maps tail probabilities v to x with P(X > x) = v
        rng: Generator
        size: Number of maxima
    """
    counts = np.atleast_1d(gnb_sample(p_count, rng, size))
    u = rng.random(counts.shape)
    out = np.zeros(counts.shape)
    positive = counts > 0
    tail = -np.expm1(np.log1p(-u[positive]) / counts[positive])
    out[positive] = inverse_sf(tail)
    return float(out[0]) if size is None else out


def random_sum_sample(
        p_count: GGParams,
        summand_sampler: SummandSampler,
        rng: Rng,
        size: Size = None,
) -> FloatOrArray:
    """
    X_1 + ... + X_N with N ~ GNB(p_count) and summands from summand_sampler

    Replications are batched so that one batch draws at most about 4M summands.
    """
    counts = np.atleast_1d(gnb_sample(p_count, rng, size)).astype(np.int64)
    n = counts.size
    out = np.zeros(n)

    i = 0
    while i < n:
        j, budget = i, 0
        while j < n and (j == i or budget + counts[j] <= _SUM_BUDGET):
            budget += int(counts[j])
            j += 1
        if budget > 0:
            draws = np.asarray(summand_sampler(rng, budget), dtype=float)
            if np.any(draws < 0):
                raise DomainError("summands must be nonnegative")
            cumulative = np.concatenate(([0.0], np.cumsum(draws)))
            offsets = np.concatenate(([0], np.cumsum(counts[i:j])))
            out[i:j] = cumulative[offsets[1:]] - cumulative[offsets[:-1]]
        i = j

    return float(out[0]) if size is None else out


def random_sum_normalizer(n: float, a: float, alpha: float, beta: float, lam: float) -> float:
    """
    Constant c_n with c_n (X_1 + ... + X_{N_n}) => G_bar_{r, alpha/beta, 1}

    N_n ~ GNB(r, alpha, lambda / n^alpha) and T_k / k^beta -> a; then
    c_n = lambda^{beta/alpha} / (a n^beta). With a = 1 (the Renyi case) this is
    lambda^{beta/alpha} / n^beta.
    """
    for name, value in (("n", n), ("a", a), ("alpha", alpha), ("beta", beta), ("lam", lam)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value}")
    return lam ** (beta / alpha) / (a * n ** beta)


# ============================================================================
# ESTIMATION
# ============================================================================

def hill_estimator(sample: Sequence[float], k: Optional[int] = None) -> float:
    """Hill estimate of the tail index from the k largest observations"""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    k = k or max(10, int(sqrt(n)))
    if n <= k or x[n - k - 1] <= 0:
        raise InsufficientDataError(f"Hill estimator needs more than k={k} positive observations")
    mean_log_excess = float(np.mean(np.log(x[n - k:] / x[n - k - 1])))
    if not mean_log_excess > 0:
        raise InsufficientDataError("degenerate upper tail")
    return 1.0 / mean_log_excess


def fit_extreme(maxima: Sequence[float], max_iter: int = 400, config: Optional[Settings] = None) -> ExtremeFit:
    """
    Estimate (r, alpha, gamma, lambda) from observed wet-period maxima

    1. alpha from the Hill estimator;
    2. (r, gamma, lambda) matching the fractional moments of orders
       (0.25, 0.5, 0.75) * alpha;
    3. Nelder-Mead on all four parameters minimizing the l2 distance between
       the model CDF and the empirical CDF on 50 sample quantiles.

    Raises:
        InsufficientDataError: Fewer than 20 positive maxima
    """
    rel_tol = (config or settings).QUAD_REL_TOL
    x = np.sort(np.asarray([m for m in maxima if m > 0], dtype=float))
    n = x.size
    if n < 20:
        raise InsufficientDataError(f"need at least 20 positive maxima, got {n}")

    alpha_hill = hill_estimator(x)
    deltas = np.array([0.25, 0.5, 0.75]) * alpha_hill
    empirical_log_moments = np.log([np.mean(x ** d) for d in deltas])

    def moment_loss(theta: NDArray) -> float:
        try:
            r, gamma, lam = np.exp(theta)
            p = ExtremeParams(r=r, alpha=alpha_hill, gamma=gamma, lam=lam)
            model = np.log([extreme_moment(d, p) for d in deltas])
        except (DomainError, ValidationError, OverflowError, FloatingPointError):
            return _PENALTY
        value = float(np.sum(np.square(model - empirical_log_moments)))
        return value if isfinite(value) else _PENALTY

    stage = minimize(moment_loss, x0=np.zeros(3), method="Nelder-Mead", options={"maxiter": 2000, "xatol": 1e-8, "fatol": 1e-12})
    r0, gamma0, lam0 = np.exp(stage.x)

    idx = np.unique(np.linspace(0, n - 1, min(_FIT_GRID, n)).astype(int))
    grid = x[idx]
    ecdf = (idx + 0.5) / n

    def cdf_loss(theta: NDArray) -> float:
        if np.any(np.abs(theta) > 15):
            return _PENALTY
        try:
            r, alpha, gamma, lam = np.exp(theta)
            p = ExtremeParams(r=r, alpha=alpha, gamma=gamma, lam=lam)
            model = extreme_cdf(grid, p, rel_tol)
        except (NumericalError, DomainError, ValidationError, OverflowError, FloatingPointError, ValueError):
            return _PENALTY
        value = sqrt(float(np.mean(np.square(model - ecdf))))
        return value if isfinite(value) else _PENALTY

    theta0 = np.log([r0, alpha_hill, gamma0, lam0])
    refined = minimize(cdf_loss, x0=theta0, method="Nelder-Mead", options={"maxiter": max_iter, "xatol": 1e-6, "fatol": 1e-9, "adaptive": True})

    r, alpha, gamma, lam = (float(v) for v in np.exp(refined.x))
    params = ExtremeParams(r=r, alpha=alpha, gamma=gamma, lam=lam)
    extremes_logger.info(
        f"Extreme-law fit on {n} maxima: alpha_hill={alpha_hill:.4g} -> "
        f"r={r:.4g}, alpha={alpha:.4g}, gamma={gamma:.4g}, lambda={lam:.4g}, l2={refined.fun:.3g}"
    )
    return ExtremeFit(params=params, distance=float(refined.fun), alpha_hill=alpha_hill, n=n)
