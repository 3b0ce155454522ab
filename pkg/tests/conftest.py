import os

# keep test runs from writing rotating log files
os.environ.setdefault("LOG_TO_FILE", "false")

from datetime import date, timedelta
from math import sqrt

import numpy as np
import pytest
from scipy import stats


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def grid_ks():
    """
    Kolmogorov distance between a sample and an expensive CDF, evaluated on a
    grid of sample quantiles, and the 0.1% critical value for the sample size
    """

    def check(sample, cdf, n_grid: int = 400):
        x = np.sort(np.asarray(sample, dtype=float))
        n = x.size
        idx = np.unique(np.linspace(0, n - 1, n_grid).astype(int))
        model = np.asarray(cdf(x[idx]), dtype=float)
        upper = (idx + 1) / n - model
        lower = model - idx / n
        distance = float(max(upper.max(), lower.max()))
        return distance, float(stats.kstwobign.isf(0.001)) / sqrt(n)

    return check


@pytest.fixture
def daily_csv(tmp_path):
    """Three years of synthetic daily precipitation with a header and a comment"""
    rng = np.random.default_rng(7)
    start = date(2000, 1, 1)
    wet = rng.random(1100) < 0.45
    amounts = np.where(wet, np.round(rng.gamma(0.8, 6.0, 1100) + 0.1, 1), 0.0)

    lines = ["# station 27612, synthetic", "date,precip_mm"]
    lines += [f"{(start + timedelta(days=i)).isoformat()},{v}" for i, v in enumerate(amounts)]

    path = tmp_path / "moscow.csv"
    path.write_text("\n".join(lines) + "\n", encoding="UTF-8")
    return path
