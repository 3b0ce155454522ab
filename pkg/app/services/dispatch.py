"""Family / operation dispatch shared by the CLI and the HTTP API"""
from functools import partial
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from app.core.config import Settings, settings
from app.core.errors import DomainError
from app.schemas.extremes import Representation
from app.schemas.params import ExtremeParams, GGParams
from app.services import distcore, extremes

Family = Literal["gg", "gnb", "extreme"]
Params = Union[GGParams, ExtremeParams]

PARAM_NAMES: Dict[str, Tuple[str, ...]] = {
    "gg": ("r", "gamma", "mu"),
    "gnb": ("r", "gamma", "mu"),
    "extreme": ("r", "alpha", "gamma", "lambda"),
}

OPERATIONS: Dict[str, Tuple[str, ...]] = {
    "gg": ("pdf", "cdf", "sf", "quantile", "moment"),
    "gnb": ("pmf", "cdf"),
    "extreme": ("pdf", "cdf", "sf", "quantile", "moment"),
}


def argument_name(family: str, op: str) -> str:
    """Name of the point argument of an operation: x, k, q or delta"""
    if op == "quantile":
        return "q"
    if op == "moment":
        return "delta"
    return "k" if family == "gnb" else "x"


def _check_family(family: str) -> None:
    if family not in PARAM_NAMES:
        raise DomainError(f"unknown family {family!r}", details={"families": list(PARAM_NAMES)})


def make_params(family: str, values: Union[Mapping[str, float], Sequence[float]]) -> Params:
    """
    Parameter model for a family from a mapping or a positional list

    Raises:
        DomainError: Wrong arity or invalid values
    """
    _check_family(family)
    names = PARAM_NAMES[family]

    if not isinstance(values, Mapping):
        values = list(values)
        if len(values) != len(names):
            raise DomainError(
                f"{family} takes {len(names)} parameters ({', '.join(names)}), got {len(values)}",
                details={"expected": list(names)},
            )
        values = dict(zip(names, values))

    model = ExtremeParams if family == "extreme" else GGParams
    try:
        return model.model_validate(dict(values))
    except ValidationError as e:
        raise DomainError(f"invalid {family} parameters", details={"errors": e.errors(include_url=False, include_context=False)})


def evaluate(
        family: str,
        op: str,
        params: Params,
        points: Sequence[float],
        config: Optional[Settings] = None,
) -> List[Tuple[float, float]]:
    """
    Evaluate op at every point; quadrature-based operations use config.QUAD_REL_TOL

    Returns:
        (point, value) pairs in input order
    """
    _check_family(family)
    if op not in OPERATIONS[family]:
        raise DomainError(
            f"operation {op!r} is not available for family {family!r}",
            details={"operations": list(OPERATIONS[family])},
        )
    if len(points) == 0:
        raise DomainError(f"no {argument_name(family, op)} values given")
    rel_tol = (config or settings).QUAD_REL_TOL

    if family == "gnb":
        ks = [int(k) for k in points]
        if any(k != v for k, v in zip(ks, points)) or min(ks) < 0:
            raise DomainError("k must be nonnegative integers")
        if op == "pmf":
            values = [distcore.gnb_pmf(k, params, rel_tol) for k in ks]
        else:
            cdf = np.minimum(np.cumsum(distcore.gnb_pmf_table(max(ks), params)), 1.0)
            values = [float(cdf[k]) for k in ks]
        return list(zip(ks, values))

    if family == "gg":
        point_fns = {"pdf": distcore.gg_pdf, "cdf": distcore.gg_cdf, "sf": distcore.gg_sf}
        scalar_fns = {"quantile": distcore.gg_quantile, "moment": distcore.gg_moment}
    else:
        point_fns = {
            "pdf": partial(extremes.extreme_pdf, rel_tol=rel_tol),
            "cdf": partial(extremes.extreme_cdf, rel_tol=rel_tol),
            "sf": partial(extremes.extreme_sf, rel_tol=rel_tol),
        }
        scalar_fns = {
            "quantile": partial(extremes.extreme_quantile, rel_tol=rel_tol),
            "moment": extremes.extreme_moment,
        }

    if op in point_fns:
        values = np.atleast_1d(point_fns[op](np.asarray(points, dtype=float), params))
        return [(float(x), float(v)) for x, v in zip(points, values)]

    fn = scalar_fns[op]
    return [(float(v), fn(float(v), params)) for v in points]


def sample(
        family: str,
        params: Params,
        n: int,
        seed: Optional[int],
        representation: Union[Representation, str, None] = None,
) -> NDArray:
    """n draws from one seeded generator; identical seeds give identical draws"""
    _check_family(family)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")

    rng = distcore.make_rng(seed)
    if family == "gg":
        return np.asarray(distcore.gg_sample(params, rng, n))
    if family == "gnb":
        return np.asarray(distcore.gnb_sample(params, rng, n))
    return np.asarray(extremes.extreme_sample(params, rng, representation or Representation.DIRECT, n))
