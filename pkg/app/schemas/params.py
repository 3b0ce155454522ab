from pydantic import BaseModel, ConfigDict, Field, field_validator


class GGParams(BaseModel):
    """
    Generalized gamma parameters (r, gamma, mu)

    The same triple parameterizes the generalized negative binomial law,
    the mixed Poisson law whose intensity is GG(r, gamma, mu).
    """

    model_config = ConfigDict(frozen=True)

    r: float = Field(gt=0, description="shape")
    gamma: float = Field(description="power, nonzero")
    mu: float = Field(gt=0, description="scale")

    @field_validator("gamma")
    @classmethod
    def _nonzero_gamma(cls, value: float) -> float:
        if value == 0:
            raise ValueError("gamma must be nonzero")
        return value


class ExtremeParams(BaseModel):
    """Parameters (r, alpha, gamma, lambda) of the limit law of wet-period maxima"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    r: float = Field(gt=0)
    alpha: float = Field(gt=0, description="tail index of the daily volumes")
    gamma: float = Field(gt=0)
    lam: float = Field(gt=0, alias="lambda")

    @property
    def alpha_gamma(self) -> float:
        return self.alpha * self.gamma

    def mixing(self) -> GGParams:
        """GG law of the mixing intensity, GG(r, gamma, lambda)"""
        return GGParams(r=self.r, gamma=self.gamma, mu=self.lam)
