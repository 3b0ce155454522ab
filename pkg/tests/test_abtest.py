import numpy as np
import pytest
from scipy import stats

from app.core.errors import DomainError, InsufficientDataError
from app.schemas.abtest import ExtremityClass
from app.schemas.params import GGParams
from app.services import abtest, distcore


# ============================================================================
# STATISTIC AND DECISION
# ============================================================================

def test_sr_statistic_values():
    assert abtest.sr_statistic([8.0, 2.0], gamma=1.0) == pytest.approx(4.0)
    assert abtest.sr_statistic([8.0, 2.0, 2.0], gamma=2.0) == pytest.approx(16.0)
    assert abtest.sr_statistic([3.0, 3.0, 3.0, 3.0], gamma=0.7) == pytest.approx(1.0)


def test_sr_statistic_tests_the_maximum_by_default():
    assert abtest.sr_statistic([2.0, 8.0, 2.0], gamma=1.0) == pytest.approx(4.0)
    assert abtest.sr_statistic([8.0, 2.0, 2.0], gamma=1.0, tested_index=1) == pytest.approx(0.4)


def test_sr_statistic_survives_huge_volumes():
    assert abtest.sr_statistic([1e200, 1e200], gamma=3.0) == pytest.approx(1.0)


def test_sr_statistic_rejects_bad_windows():
    with pytest.raises(DomainError):
        abtest.sr_statistic([5.0], gamma=1.0)
    with pytest.raises(DomainError):
        abtest.sr_statistic([5.0, 0.0], gamma=1.0)
    with pytest.raises(DomainError):
        abtest.sr_statistic([5.0, 1.0], gamma=1.0, tested_index=2)


def test_critical_value_is_snedecor_fisher_quantile():
    assert abtest.critical_value(0.01, 1.0, 2) == pytest.approx(99.0, rel=1e-10)
    assert abtest.critical_value(0.05, 0.8, 30) == pytest.approx(distcore.sf_quantile(0.95, 0.8, 23.2))


def test_decision_on_an_outlier():
    volumes = [1000.0] + [1.0] * 9
    decision = abtest.test_abnormal(volumes, r=1.0, gamma=1.0, alpha_level=0.05)
    assert decision.reject
    assert decision.d1 == 1.0
    assert decision.d2 == 9.0

    flat = abtest.test_abnormal([1.0] * 10, r=1.0, gamma=1.0, alpha_level=0.05)
    assert not flat.reject


def test_classic_test_equals_unit_power():
    volumes = [4.0, 1.0, 2.5, 0.7, 3.3]
    classic = abtest.sr_test_classic(volumes, r=1.4, alpha_level=0.05)
    general = abtest.test_abnormal(volumes, r=1.4, gamma=1.0, alpha_level=0.05)
    assert classic.statistic == pytest.approx(general.statistic)
    assert classic.reject == general.reject


def test_level_must_lie_in_unit_interval():
    with pytest.raises(DomainError):
        abtest.test_abnormal([1.0, 2.0], r=1.0, gamma=1.0, alpha_level=1.0)


@pytest.mark.slow
def test_fixed_position_test_has_nominal_size(rng):
    p = GGParams(r=1.5, gamma=0.7, mu=1.0)
    windows = distcore.gg_sample(p, rng, (4000, 10))
    rejections = [
        abtest.test_abnormal(w, p.r, p.gamma, 0.05, tested_index=0).reject
        for w in windows
    ]
    assert np.mean(rejections) == pytest.approx(0.05, abs=4 * np.sqrt(0.05 * 0.95 / 4000))


def test_window_maximum_rejects_more_often_than_nominal(rng):
    p = GGParams(r=1.5, gamma=0.7, mu=1.0)
    windows = distcore.gg_sample(p, rng, (2000, 10))
    rejections = [abtest.test_abnormal(w, p.r, p.gamma, 0.05).reject for w in windows]
    assert np.mean(rejections) > 0.1


# ============================================================================
# VOLUME FIT
# ============================================================================

def test_fit_volume_with_fixed_power(rng):
    truth = GGParams(r=2.0, gamma=0.8, mu=1.5)
    fit = abtest.fit_volume_gg(distcore.gg_sample(truth, rng, 5000), fixed_gamma=0.8)
    assert fit.gamma == 0.8
    assert fit.r == pytest.approx(truth.r, rel=0.1)
    assert fit.mu == pytest.approx(truth.mu, rel=0.15)


def test_fit_volume_free_power_describes_the_sample(rng):
    truth = GGParams(r=2.0, gamma=0.8, mu=1.5)
    volumes = distcore.gg_sample(truth, rng, 5000)
    fit = abtest.fit_volume_gg(volumes)
    sorted_v = np.sort(volumes)
    ecdf = np.arange(1, sorted_v.size + 1) / sorted_v.size
    assert np.max(np.abs(distcore.gg_cdf(sorted_v, fit) - ecdf)) < 0.03


def test_fit_volume_needs_ten_periods():
    with pytest.raises(InsufficientDataError):
        abtest.fit_volume_gg([1.0, 2.0, 3.0])


# ============================================================================
# MOVING-WINDOW SCAN
# ============================================================================

def test_windows_containing():
    np.testing.assert_array_equal(abtest.windows_containing(5, 3), [1, 2, 3, 2, 1])
    np.testing.assert_array_equal(abtest.windows_containing(4, 4), [1, 1, 1, 1])


@pytest.mark.parametrize(
    "votes, windows, expected",
    [
        (3, 3, ExtremityClass.ABSOLUTE),
        (2, 3, ExtremityClass.INTERMEDIATE),
        (1, 3, ExtremityClass.RELATIVE),
        (2, 4, ExtremityClass.RELATIVE),
        (0, 3, ExtremityClass.NOT_EXTREME),
    ],
)
def test_classify_votes(votes, windows, expected):
    assert abtest.classify_votes(votes, windows) == expected


def test_scan_flags_a_single_spike():
    volumes = [1.0] * 12
    volumes[5] = 1e6
    votes = abtest.moving_window_scan(volumes, window_m=4, r=1.0, gamma=1.0, alpha_level=0.01)

    assert len(votes) == 12
    assert votes[5].votes == votes[5].windows == 4
    assert votes[5].extremity == ExtremityClass.ABSOLUTE
    assert all(v.extremity == ExtremityClass.NOT_EXTREME for i, v in enumerate(votes) if i != 5)


def test_scan_classes_match_classify_wrapper(rng):
    volumes = distcore.gg_sample(GGParams(r=0.9, gamma=0.6, mu=1.0), rng, 300)
    votes = abtest.moving_window_scan(volumes, 30, 0.9, 0.6, 0.05)
    classes = abtest.moving_window_classify(volumes, 30, 0.9, 0.6, 0.05)
    assert classes == [v.extremity for v in votes]
    assert all(v.votes <= v.windows for v in votes)


def test_scan_does_not_depend_on_worker_count(rng):
    volumes = distcore.gg_sample(GGParams(r=0.9, gamma=0.6, mu=1.0), rng, 10_000)
    single = abtest.moving_window_scan(volumes, 50, 0.9, 0.6, 0.01, workers=1)
    pooled = abtest.moving_window_scan(volumes, 50, 0.9, 0.6, 0.01, workers=4)
    assert single == pooled


def test_scan_window_longer_than_series():
    with pytest.raises(DomainError):
        abtest.moving_window_scan([1.0, 2.0, 3.0], window_m=4, r=1.0, gamma=1.0, alpha_level=0.05)


def test_scan_of_equal_volumes_flags_nothing():
    votes = abtest.moving_window_scan([2.5] * 40, window_m=10, r=0.8, gamma=1.3, alpha_level=0.01)
    assert all(v.votes == 0 and v.extremity == ExtremityClass.NOT_EXTREME for v in votes)


def test_outlier_in_simulated_series_is_absolute(rng):
    volumes = distcore.gg_sample(GGParams(r=0.85, gamma=1.28, mu=1.0), rng, 2000)
    volumes[1000] = volumes.max() * 1e6
    votes = abtest.moving_window_scan(volumes, 360, 0.85, 1.28, 0.01)
    assert votes[1000].extremity == ExtremityClass.ABSOLUTE


# ============================================================================
# SCALE INVARIANCE
# ============================================================================

@pytest.mark.parametrize("factor", [1024.0, 1.0 / 1024.0, 3.7e5])
def test_statistic_does_not_depend_on_volume_units(rng, factor):
    window = distcore.gg_sample(GGParams(r=0.85, gamma=1.28, mu=1.0), rng, 60)
    for tested_index in (None, 0, 17):
        assert abtest.sr_statistic(window * factor, 1.28, tested_index) == pytest.approx(
            abtest.sr_statistic(window, 1.28, tested_index), rel=1e-12
        )


@pytest.mark.parametrize("factor", [1024.0, 1.0 / 1024.0])
def test_scan_does_not_depend_on_volume_units(rng, factor):
    volumes = distcore.gg_sample(GGParams(r=0.85, gamma=1.28, mu=1.0), rng, 3000)
    base = abtest.moving_window_scan(volumes, 360, 0.85, 1.28, 0.01)
    scaled = abtest.moving_window_scan(volumes * factor, 360, 0.85, 1.28, 0.01)
    assert scaled == base


# ============================================================================
# CALIBRATION
# ============================================================================

@pytest.mark.slow
def test_fixed_position_test_is_exact_for_long_windows():
    p = GGParams(r=0.85, gamma=1.28, mu=1.0)
    replications = 10_000
    windows = distcore.gg_sample(p, distcore.make_rng(360), (replications, 360))

    rejections = sum(
        abtest.test_abnormal(w, p.r, p.gamma, 0.01, tested_index=0).reject
        for w in windows
    )
    low, high = stats.binom.interval(0.99, replications, 0.01)
    assert low <= rejections <= high


@pytest.mark.slow
def test_unit_power_agrees_with_classic_test_window_by_window():
    p = GGParams(r=0.85, gamma=1.0, mu=1.0)
    windows = distcore.gg_sample(p, distcore.make_rng(361), (1000, 360))

    for w in windows:
        classic = abtest.sr_test_classic(w, p.r, 0.01)
        general = abtest.test_abnormal(w, p.r, 1.0, 0.01)
        assert general.reject == classic.reject
        assert general.statistic == pytest.approx(classic.statistic, rel=1e-10)
