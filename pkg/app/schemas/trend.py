from pydantic import BaseModel, ConfigDict, Field, model_validator


class TrendFit(BaseModel):
    """Least-squares estimates of (a, beta) in T_n / n^beta -> a"""

    model_config = ConfigDict(frozen=True)

    a_hat: float = Field(gt=0)
    beta_hat: float
    m: int = Field(ge=1)
    n: int = Field(ge=1)
    residual_sse: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_range(self) -> "TrendFit":
        if self.m > self.n:
            raise ValueError("m must not exceed n")
        return self

    def to_json_dict(self) -> dict:
        return {
            "a": self.a_hat,
            "beta": self.beta_hat,
            "m": self.m,
            "n": self.n,
            "sse": self.residual_sse,
        }
