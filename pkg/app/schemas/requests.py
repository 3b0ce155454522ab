from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from app.schemas.extremes import Representation
from app.schemas.fit import Metric

FamilyName = Literal["gg", "gnb", "extreme"]


class EvaluateRequest(BaseModel):
    """Body of POST /api/distributions/evaluate; the point list matching op is required"""

    family: FamilyName
    op: str
    params: Dict[str, float]
    x: Optional[List[float]] = None
    k: Optional[List[int]] = None
    q: Optional[List[float]] = None
    delta: Optional[List[float]] = None


class SampleRequest(BaseModel):
    family: FamilyName
    params: Dict[str, float]
    n: int = Field(ge=1, le=1_000_000)
    seed: Optional[int] = Field(default=None, ge=0)
    representation: Optional[Representation] = None


class FitDurationRequest(BaseModel):
    durations: List[int] = Field(min_length=1)
    metric: Metric = Metric.L1
    fixed_r: Optional[float] = Field(default=None, gt=0)


class TrendRequest(BaseModel):
    values: List[float] = Field(min_length=2, description="nonzero daily volumes in time order")
    m: Optional[int] = Field(default=None, ge=2)


class ScanRequest(BaseModel):
    volumes: List[float] = Field(min_length=2, description="wet-period totals in time order")
    window: Optional[int] = Field(default=None, ge=2)
    alpha: Optional[float] = Field(default=None, gt=0, lt=1)
    r: float = Field(gt=0)
    gamma: float = Field(gt=0)
