from enum import Enum
from math import isnan, nan
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.schemas.params import GGParams


class Metric(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"


class DurationHistogram(BaseModel):
    """Counts of wet-period durations in days, unit-width bins"""

    model_config = ConfigDict(frozen=True)

    counts: Dict[int, int]
    total: int = Field(gt=0)

    @model_validator(mode="after")
    def _check_counts(self) -> "DurationHistogram":
        if any(k < 1 for k in self.counts):
            raise ValueError("durations must be >= 1 day")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        if sum(self.counts.values()) != self.total:
            raise ValueError("total must equal the sum of counts")
        return self

    @property
    def max_duration(self) -> int:
        return max(self.counts)

    def frequencies(self) -> Dict[int, float]:
        """Relative frequencies f(k) = count(k) / total"""
        return {k: c / self.total for k, c in sorted(self.counts.items())}

    def scaled(self, factor: int) -> "DurationHistogram":
        return DurationHistogram(
            counts={k: c * factor for k, c in self.counts.items()},
            total=self.total * factor,
        )


class FitResult(BaseModel):
    """Fitted GNB (or NB when gamma == 1) model for wet-period durations"""

    model_config = ConfigDict(frozen=True)

    params: GGParams
    metric: Metric
    distance: float = Field(ge=0)
    fixed_r: Optional[float] = None
    # NaN when too few pooled cells remain for the test
    chi_square_pvalue: float = nan

    @model_validator(mode="after")
    def _check_fixed_r(self) -> "FitResult":
        if self.fixed_r is not None and self.params.r != self.fixed_r:
            raise ValueError("params.r must equal fixed_r")
        if not isnan(self.chi_square_pvalue) and not 0 <= self.chi_square_pvalue <= 1:
            raise ValueError("chi_square_pvalue must lie in [0, 1]")
        return self

    def to_json_dict(self) -> dict:
        """Flat JSON layout {"r", "gamma", "mu", "metric", "distance", "pvalue"}"""
        data = {
            "r": self.params.r,
            "gamma": self.params.gamma,
            "mu": self.params.mu,
            "metric": self.metric.value,
            "distance": self.distance,
            "pvalue": None if isnan(self.chi_square_pvalue) else self.chi_square_pvalue,
        }
        if self.fixed_r is not None:
            data["fixed_r"] = self.fixed_r
        return data
