"""Pydantic schemas for domain types and API requests"""
from app.schemas.abtest import ExtremityClass, TestDecision, WindowVote
from app.schemas.extremes import ExtremeFit, MonteCarloEstimate, Representation
from app.schemas.fit import DurationHistogram, FitResult, Metric
from app.schemas.params import ExtremeParams, GGParams
from app.schemas.series import DailySeries, WetPeriod
from app.schemas.trend import TrendFit

__all__ = [
    "DailySeries",
    "DurationHistogram",
    "ExtremeFit",
    "ExtremeParams",
    "ExtremityClass",
    "FitResult",
    "GGParams",
    "Metric",
    "MonteCarloEstimate",
    "Representation",
    "TestDecision",
    "TrendFit",
    "WetPeriod",
    "WindowVote",
]
