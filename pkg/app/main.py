from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from starlette.requests import Request

from app import __version__
from app.api import analysis, distributions
from app.core.errors import NumericalError, PrecipError
from app.core.logger import api_logger, logger
from app.core.responses import error_response, standard_response


@asynccontextmanager
async def lifespan(_: FastAPI):
    logger.info("=" * 50)
    logger.info(f"Starting precip-glaw service v{__version__}")
    logger.info("=" * 50)

    yield

    logger.info("Precip-glaw service stopped")


app = FastAPI(
    title="precip-glaw",
    description="Generalized gamma / GNB statistics for daily precipitation",
    version=__version__,
    lifespan=lifespan,
)

app.include_router(
    distributions.router,
    prefix="/api",
    tags=["Distributions"]
)

app.include_router(
    analysis.router,
    prefix="/api",
    tags=["Analysis"]
)


@app.get("/health", tags=["Health"])
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "service": "precip-glaw"}


@app.exception_handler(PrecipError)
async def precip_exception_handler(request: Request, exc: PrecipError):
    status_code = 422 if isinstance(exc, NumericalError) else 400
    api_logger.warning(f"{request.url.path}: {type(exc).__name__}: {exc.message}")
    return error_response(message=exc.message, errors=[exc.to_dict()], status_code=status_code)


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(_: Request, exc: RequestValidationError):
    return error_response(
        message="Invalid request body",
        errors=[{"loc": list(e["loc"]), "msg": e["msg"]} for e in exc.errors()],
        status_code=422,
    )


@app.exception_handler(HTTPException)
async def http_exception_handler(_: Request, exc: HTTPException):
    return standard_response(
        success=False,
        message=str(exc.detail),
        errors=[str(exc.detail)],
        status_code=exc.status_code
    )
