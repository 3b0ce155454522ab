from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import get_settings
from app.core.logger import api_logger
from app.core.responses import success_response
from app.schemas.requests import EvaluateRequest, SampleRequest
from app.services import dispatch

router = APIRouter(prefix="/distributions")


@router.post(path="/evaluate")
def evaluate(body: EvaluateRequest, config: Settings = Depends(get_settings)):
    """
    Evaluate pdf / pmf / cdf / sf / quantile / moment of a family

    The point list is read from the field matching the operation:
    x for densities and distribution functions, k for GNB, q for quantiles,
    delta for moments.
    """
    argument = dispatch.argument_name(body.family, body.op)
    params = dispatch.make_params(body.family, body.params)
    points = getattr(body, argument) or []
    pairs = dispatch.evaluate(body.family, body.op, params, points, config=config)

    api_logger.info(f"evaluate {body.family}.{body.op} at {len(pairs)} points")
    return success_response(
        message=f"{body.family} {body.op}",
        data={
            "argument": argument,
            "points": [p for p, _ in pairs],
            "values": [v for _, v in pairs],
        },
        meta={"params": params.model_dump(by_alias=True)},
    )


@router.post(path="/sample")
def sample(body: SampleRequest):
    params = dispatch.make_params(body.family, body.params)
    draws = dispatch.sample(body.family, params, body.n, body.seed, body.representation)

    api_logger.info(f"sample {body.family} n={body.n} seed={body.seed}")
    return success_response(
        message=f"{body.n} draws",
        data={"samples": draws.tolist()},
        meta={
            "params": params.model_dump(by_alias=True),
            "seed": body.seed,
            "representation": body.representation,
        },
    )
