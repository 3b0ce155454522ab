from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import get_settings
from app.core.logger import api_logger
from app.core.responses import success_response
from app.schemas.requests import FitDurationRequest, ScanRequest, TrendRequest
from app.services import abtest, gnbfit, trend

router = APIRouter(prefix="/analysis")


@router.post(path="/fit-duration")
def fit_duration(body: FitDurationRequest, config: Settings = Depends(get_settings)):
    """GNB fit of a list of wet-period durations with the histogram-vs-pmf rows"""
    h = gnbfit.build_histogram(body.durations)
    result = gnbfit.fit_gnb(h, fixed_r=body.fixed_r, metric=body.metric, config=config)

    api_logger.info(f"fit-duration on {h.total} durations, metric {body.metric.value}")
    return success_response(
        message="GNB fit",
        data={**result.to_json_dict(), "histogram": gnbfit.histogram_vs_pmf(h, result.params)},
    )


@router.post(path="/trend")
def estimate_trend(body: TrendRequest, config: Settings = Depends(get_settings)):
    fit = trend.estimate_trend(body.values, body.m, config=config)
    return success_response(message="Trend fit", data=fit.to_json_dict())


@router.post(path="/scan")
def scan(body: ScanRequest, config: Settings = Depends(get_settings)):
    """Moving-window classification of wet-period totals"""
    window = body.window or config.SCAN_WINDOW
    alpha_level = body.alpha or config.SCAN_ALPHA
    votes = abtest.moving_window_scan(body.volumes, window, body.r, body.gamma, alpha_level, workers=config.WORKERS)

    api_logger.info(f"scan of {len(votes)} periods, window {window}")
    return success_response(
        message="Scan complete",
        data={
            "classes": [v.extremity.value for v in votes],
            "votes": [v.votes for v in votes],
            "windows": [v.windows for v in votes],
        },
        meta={"window": window, "alpha": alpha_level, "r": body.r, "gamma": body.gamma},
    )
