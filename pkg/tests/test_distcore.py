from itertools import combinations

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats
from scipy.integrate import quad

from app.core.errors import DomainError
from app.schemas.params import GGParams
from app.services import distcore


def _integrate(f):
    head, _ = quad(f, 0, 1, limit=200)
    tail, _ = quad(f, 1, np.inf, limit=200)
    return head + tail


GG_CASES = [
    GGParams(r=2.0, gamma=1.5, mu=0.7),
    GGParams(r=0.6, gamma=0.8, mu=1.3),
    GGParams(r=1.7, gamma=-1.2, mu=2.0),
]


# ============================================================================
# GENERALIZED GAMMA
# ============================================================================

@pytest.mark.parametrize("p", GG_CASES)
def test_gg_pdf_integrates_to_one(p):
    total = _integrate(lambda x: float(distcore.gg_pdf(x, p)))
    assert total == pytest.approx(1.0, abs=1e-7)


@pytest.mark.parametrize("p", GG_CASES[:2])
def test_gg_cdf_matches_scipy_gengamma(p):
    x = np.array([0.05, 0.3, 1.0, 2.5, 7.0])
    reference = stats.gengamma.cdf(x, p.r, p.gamma, scale=p.mu ** (-1.0 / p.gamma))
    np.testing.assert_allclose(distcore.gg_cdf(x, p), reference, rtol=1e-10)


@pytest.mark.parametrize("p", GG_CASES)
def test_gg_cdf_and_sf_are_complementary(p):
    x = np.array([0.01, 0.5, 1.0, 4.0])
    np.testing.assert_allclose(distcore.gg_cdf(x, p) + distcore.gg_sf(x, p), 1.0, atol=1e-14)


def test_gg_cdf_decreasing_power_is_increasing():
    p = GG_CASES[2]
    values = distcore.gg_cdf(np.linspace(0.1, 10, 50), p)
    assert np.all(np.diff(values) > 0)
    assert distcore.gg_cdf(0.0, p) == 0.0


@pytest.mark.parametrize("p", GG_CASES)
@pytest.mark.parametrize("q", [0.001, 0.25, 0.5, 0.9, 0.999])
def test_gg_quantile_inverts_cdf(p, q):
    x = distcore.gg_quantile(q, p)
    assert float(distcore.gg_cdf(x, p)) == pytest.approx(q, abs=1e-10)


def test_gg_quantile_rejects_probability_outside_unit_interval():
    with pytest.raises(DomainError):
        distcore.gg_quantile(1.0, GG_CASES[0])
    with pytest.raises(DomainError):
        distcore.gg_quantile(0.0, GG_CASES[0])


@pytest.mark.parametrize("p", GG_CASES)
def test_gg_moment_matches_numerical_integral(p):
    expected = _integrate(lambda x: x ** 0.5 * float(distcore.gg_pdf(x, p)))
    assert distcore.gg_moment(0.5, p) == pytest.approx(expected, rel=1e-7)


def test_gg_moment_outside_existence_range():
    with pytest.raises(DomainError):
        distcore.gg_moment(-3.0, GGParams(r=1.0, gamma=1.0, mu=1.0))


def test_gg_pdf_rejects_negative_x():
    with pytest.raises(DomainError):
        distcore.gg_pdf(-1.0, GG_CASES[0])


def test_gg_params_reject_zero_power():
    with pytest.raises(ValidationError):
        GGParams(r=1.0, gamma=0.0, mu=1.0)


# ============================================================================
# SNEDECOR-FISHER
# ============================================================================

def test_sf_quantile_unit_parameters():
    # CDF is x / (1 + x)
    assert distcore.sf_quantile(0.99, 1.0, 1.0) == pytest.approx(99.0, rel=1e-10)


def test_sf_quantile_half_parameters_is_textbook_f_one_one():
    assert distcore.sf_quantile(0.99, 0.5, 0.5) == pytest.approx(4052.18, rel=1e-5)


@pytest.mark.parametrize("d1, d2", [(0.7, 3.3), (2.5, 11.0), (1.3, 0.4)])
def test_sf_cdf_is_f_law_with_doubled_degrees_of_freedom(d1, d2):
    x = np.array([0.1, 0.8, 1.0, 3.0, 25.0])
    np.testing.assert_allclose(distcore.sf_cdf(x, d1, d2), stats.f.cdf(x, 2 * d1, 2 * d2), rtol=1e-10)


@pytest.mark.parametrize("q", [0.05, 0.5, 0.95, 0.999])
def test_sf_quantile_inverts_cdf(q):
    x = distcore.sf_quantile(q, 1.8, 40.0)
    assert float(distcore.sf_cdf(x, 1.8, 40.0)) == pytest.approx(q, abs=1e-12)


def test_sf_sample_follows_sf_cdf(rng):
    draws = distcore.sf_sample(1.5, 4.0, rng, 20000)
    assert stats.kstest(draws, lambda x: distcore.sf_cdf(x, 1.5, 4.0)).pvalue > 0.001


# ============================================================================
# AUXILIARY SAMPLERS
# ============================================================================

def test_make_rng_is_reproducible():
    a = distcore.make_rng(42).random(5)
    b = distcore.make_rng(42).random(5)
    np.testing.assert_array_equal(a, b)


def test_make_rng_rejects_negative_seed():
    with pytest.raises(DomainError):
        distcore.make_rng(-1)


def test_spawned_generators_differ():
    first, second = distcore.spawn_rngs(3, 2)
    assert not np.array_equal(first.random(4), second.random(4))


@pytest.mark.parametrize("gamma", [0.3, 0.6, 0.9])
def test_stable_sampler_weibull_identity(rng, gamma):
    s = distcore.stable_sample(gamma, rng, 20000)
    ratio = rng.standard_exponential(20000) / s
    assert stats.kstest(ratio, stats.weibull_min(c=gamma).cdf).pvalue > 0.001


def test_stable_sampler_is_constant_one_at_unit_index(rng):
    np.testing.assert_array_equal(distcore.stable_sample(1.0, rng, 10), np.ones(10))
    assert distcore.stable_sample(1.0, rng) == 1.0


def test_stable_sampler_rejects_index_above_one(rng):
    with pytest.raises(DomainError):
        distcore.stable_sample(1.5, rng)


def test_weibull_power_is_exponential(rng):
    w = distcore.weibull_sample(2.7, rng, 20000)
    assert stats.kstest(w ** 2.7, "expon").pvalue > 0.001


def test_z_ratio_is_bounded_below_and_reproduces_gamma(rng):
    z = distcore.z_ratio_sample(0.4, 1.0, rng, 20000)
    assert z.min() >= 1.0
    # W_1 / Z_{r,1} has the gamma(r) law
    g = rng.standard_exponential(20000) / z
    assert stats.kstest(g, stats.gamma(a=0.4).cdf).pvalue > 0.001


def test_pareto_mix_tail(rng):
    alpha = 1.7
    draws = distcore.pareto_mix_sample(alpha, rng, 20000)
    assert stats.kstest(draws, lambda x: 1.0 - 1.0 / (1.0 + x ** alpha)).pvalue > 0.001


@pytest.mark.parametrize("p", GG_CASES)
def test_gg_sampler_follows_gg_cdf(rng, p):
    draws = distcore.gg_sample(p, rng, 20000)
    assert stats.kstest(draws, lambda x: distcore.gg_cdf(x, p)).pvalue > 0.001


def test_gnb_sample_mean_equals_mixing_mean(rng):
    p = GGParams(r=1.4, gamma=0.7, mu=0.9)
    counts = distcore.gnb_sample(p, rng, 50000)
    assert counts.dtype.kind == "i"
    expected = distcore.gg_moment(1.0, p)
    assert abs(counts.mean() - expected) < 5 * counts.std() / np.sqrt(counts.size)


# ============================================================================
# NB / GNB
# ============================================================================

def test_geometric_pmf_values():
    assert distcore.nb_pmf(0, 1.0, 1.0) == pytest.approx(0.5)
    assert distcore.nb_pmf(2, 1.0, 1.0) == pytest.approx(0.125)
    geometric = GGParams(r=1.0, gamma=1.0, mu=1.0)
    assert distcore.gnb_pmf(0, geometric) == pytest.approx(0.5, rel=1e-9)
    assert distcore.gnb_pmf(2, geometric) == pytest.approx(0.125, rel=1e-9)


def test_gnb_reduces_to_negative_binomial():
    p = GGParams(r=2.5, gamma=1.0, mu=0.8)
    ks = np.arange(11)
    expected = distcore.nb_pmf(ks, p.r, p.mu)
    np.testing.assert_allclose([distcore.gnb_pmf(int(k), p) for k in ks], expected, rtol=1e-8)


def test_gnb_matches_negative_binomial_far_into_the_support():
    p = GGParams(r=2.5, gamma=1.0, mu=0.05)
    ks = np.arange(201)
    expected = distcore.nb_pmf(ks, p.r, p.mu)
    np.testing.assert_allclose([distcore.gnb_pmf(int(k), p) for k in ks], expected, rtol=1e-8)


@pytest.mark.parametrize("p", [GGParams(r=0.8, gamma=0.7, mu=0.5), GGParams(r=3.0, gamma=2.0, mu=4.0), GGParams(r=1.5, gamma=-0.8, mu=1.0)])
def test_gnb_pmf_table_agrees_with_quadrature(p):
    table = distcore.gnb_pmf_table(25, p)
    single = np.array([distcore.gnb_pmf(k, p) for k in range(26)])
    np.testing.assert_allclose(table, single, rtol=1e-8, atol=1e-15)


def test_gnb_pmf_sums_to_one_up_to_truncation_point():
    p = GGParams(r=0.9, gamma=0.6, mu=0.4)
    kmax = distcore.gnb_truncation_point(p)
    total = distcore.gnb_pmf_table(kmax, p).sum()
    assert total == pytest.approx(1.0, abs=1e-8)


def test_gnb_pmf_matches_sample_frequencies(rng):
    p = GGParams(r=1.2, gamma=0.8, mu=1.1)
    counts = distcore.gnb_sample(p, rng, 40000)
    table = distcore.gnb_pmf_table(5, p)
    for k in range(6):
        freq = np.mean(counts == k)
        assert abs(freq - table[k]) < 5 * np.sqrt(table[k] * (1 - table[k]) / counts.size)


def test_gnb_pmf_rejects_negative_k():
    with pytest.raises(DomainError):
        distcore.gnb_pmf(-1, GGParams(r=1.0, gamma=1.0, mu=1.0))


# ============================================================================
# LIMIT THEOREMS AND REPRESENTATIONS
# ============================================================================

@pytest.mark.slow
@pytest.mark.parametrize("r, gamma", [(0.847, 1.286), (0.876, 1.279), (0.5, 0.5)])
def test_scaled_gnb_counts_approach_generalized_gamma(r, gamma):
    limit = GGParams(r=r, gamma=gamma, mu=1.0)
    distances = []
    for mu in (1e-2, 1e-3, 1e-4):
        # same seed at every scale so the sampling noise is shared
        counts = distcore.gnb_sample(GGParams(r=r, gamma=gamma, mu=mu), distcore.make_rng(15), 100_000)
        scaled = mu ** (1.0 / gamma) * counts
        distances.append(stats.kstest(scaled, lambda x: distcore.gg_cdf(x, limit)).statistic)

    assert distances[-1] < distances[0]
    assert distances[-1] < 0.02


@pytest.mark.slow
@pytest.mark.parametrize("r, gamma", [(0.4, 0.6), (0.85, 0.9)])
def test_four_gamma_power_samplers_agree(r, gamma):
    n = 100_000
    rng = distcore.make_rng(16)
    g_r = rng.gamma(r, size=n)
    g_rest = rng.gamma(1.0 - r, size=n)
    samples = {
        "gamma_power": distcore.gamma_sample(r, 1.0, rng, n) ** (1.0 / gamma),
        "stable_ratio": rng.standard_exponential(n)
        / (distcore.stable_sample(gamma, rng, n) * distcore.z_ratio_sample(r, 1.0, rng, n) ** (1.0 / gamma)),
        "weibull_ratio": (rng.standard_exponential(n) / distcore.z_ratio_sample(r, 1.0, rng, n)) ** (1.0 / gamma),
        "beta_thinned": (rng.standard_exponential(n) * g_r / (g_r + g_rest)) ** (1.0 / gamma),
    }
    for a, b in combinations(samples, 2):
        assert stats.ks_2samp(samples[a], samples[b]).pvalue > 0.001, (a, b)
