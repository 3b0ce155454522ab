from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ExtremityClass(str, Enum):
    ABSOLUTE = "absolute"
    INTERMEDIATE = "intermediate"
    RELATIVE = "relative"
    NOT_EXTREME = "none"


class TestDecision(BaseModel):
    """Outcome of the SR_GG abnormality test for one window"""

    __test__ = False  # keep pytest from collecting this model

    model_config = ConfigDict(frozen=True)

    statistic: float = Field(ge=0)
    critical_value: float = Field(gt=0)
    alpha_level: float = Field(gt=0, lt=1)
    reject: bool
    d1: float = Field(gt=0)
    d2: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_reject(self) -> "TestDecision":
        if self.reject != (self.statistic > self.critical_value):
            raise ValueError("reject must equal statistic > critical_value")
        return self


class WindowVote(BaseModel):
    """Per-period tally of the moving-window scan"""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    votes: int = Field(ge=0)
    windows: int = Field(ge=0)
    extremity: ExtremityClass
