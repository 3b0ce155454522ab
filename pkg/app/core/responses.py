from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from orjson import OPT_INDENT_2, OPT_NON_STR_KEYS, OPT_SERIALIZE_NUMPY, dumps
from pydantic import BaseModel
from starlette.responses import JSONResponse

from app.core.logger import api_logger


def default(obj: Any) -> Any:
    """
    Args:
        obj: Object orjson cannot serialize natively

    Returns:
        Serializable representation
    """
    if isinstance(obj, BaseModel):
        return obj.model_dump(by_alias=True, mode="json")

    if isinstance(obj, (datetime, date)):
        return obj.isoformat()

    if isinstance(obj, Enum):
        return obj.value

    if isinstance(obj, Path):
        return str(obj)

    # numpy scalars that slipped past OPT_SERIALIZE_NUMPY
    if hasattr(obj, "item"):
        return obj.item()

    raise TypeError(f"Type is not JSON serializable: {type(obj).__name__}")


def dump_json(content: Any, pretty: bool = False) -> bytes:
    """
    Serialize content with orjson

    Args:
        content: Data to serialize
        pretty: Indent output

    Returns:
        JSON bytes
    """
    options = OPT_NON_STR_KEYS | OPT_SERIALIZE_NUMPY

    if pretty:
        options |= OPT_INDENT_2

    return dumps(content, option=options, default=default)


class ORJSONResponse(JSONResponse):
    """JSONResponse rendered through dump_json"""

    def __init__(self, content: Any, status_code: int = 200, pretty: bool = False, **kwargs: Any):
        self._pretty = pretty
        super().__init__(content=content, status_code=status_code, **kwargs)

    def render(self, content: Any) -> bytes:
        try:
            return dump_json(content, pretty=self._pretty)
        except TypeError as e:
            api_logger.error(f"Response not serializable: {e}")
            return dumps({"success": False, "message": "Serialization error", "errors": [str(e)]})


def standard_response(
        success: bool,
        message: str,
        data: Any = None,
        errors: Optional[List[Any]] = None,
        meta: Optional[Dict[str, Any]] = None,
        status_code: int = 200,
        pretty: bool = False,
) -> ORJSONResponse:
    """
    Envelope shared by every endpoint

    `success`, `message` and a UTC `timestamp` are always present; `data`,
    `errors` (PrecipError.to_dict() payloads or validation messages) and
    `meta` (seeds, parameters, draw counts) only when given.
    """
    envelope: Dict[str, Any] = {"success": success, "message": message}
    optional = {"data": data, "errors": errors, "meta": meta}
    envelope.update({key: value for key, value in optional.items() if value is not None})
    envelope["timestamp"] = datetime.now(timezone.utc).isoformat()

    return ORJSONResponse(content=envelope, status_code=status_code, pretty=pretty)


def success_response(message: str = "Success", data: Any = None, meta: Optional[Dict[str, Any]] = None) -> ORJSONResponse:
    return standard_response(True, message, data=data, meta=meta)


def error_response(message: str, errors: Optional[List[Any]] = None, status_code: int = 400) -> ORJSONResponse:
    return standard_response(False, message, errors=errors, status_code=status_code)
