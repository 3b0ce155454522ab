from datetime import date
from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DailySeries(BaseModel):
    """Daily precipitation of one station; missing days appear as date gaps"""

    model_config = ConfigDict(frozen=True)

    dates: List[date]
    precip_mm: List[float]
    station_id: str = "station"

    @model_validator(mode="after")
    def _check_series(self) -> "DailySeries":
        if len(self.dates) != len(self.precip_mm):
            raise ValueError("dates and precip_mm must have equal length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if any(v < 0 for v in self.precip_mm):
            raise ValueError("precipitation must be nonnegative")
        return self

    def __len__(self) -> int:
        return len(self.dates)

    def wet_days(self, threshold_mm: float = 0.0) -> int:
        return sum(1 for v in self.precip_mm if v > threshold_mm)


class WetPeriod(BaseModel):
    """Maximal run of consecutive wet days"""

    model_config = ConfigDict(frozen=True)

    start_index: int = Field(ge=0)
    start_date: date
    duration_days: int = Field(ge=1)
    total_volume_mm: float = Field(gt=0)
    max_daily_mm: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_volumes(self) -> "WetPeriod":
        if self.max_daily_mm > self.total_volume_mm * (1 + 1e-12):
            raise ValueError("max_daily_mm must not exceed total_volume_mm")
        return self
