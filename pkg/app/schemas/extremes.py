from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.params import ExtremeParams


class Representation(str, Enum):
    """Product representations of the limit law used for sampling"""

    DIRECT = "direct"
    RATIO_WEIBULL = "ratio_weibull"
    TEMPERED_SF = "tempered_sf"
    PARETO_MIX = "pareto_mix"
    FOLDED_NORMAL = "folded_normal"


class MonteCarloEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    std_error: float = Field(ge=0)
    n_draws: int = Field(gt=0)


class ExtremeFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: ExtremeParams
    distance: float = Field(ge=0, description="l2 distance between fitted and empirical CDF")
    alpha_hill: float = Field(gt=0)
    n: int = Field(gt=0)
