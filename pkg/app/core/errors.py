from typing import Any, Dict, Optional


class PrecipError(Exception):
    """Base exception for the package"""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable representation used by the CLI and the API"""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class DomainError(PrecipError, ValueError):
    """Argument or parameter outside the domain of an operation"""

    exit_code = 2


class RepresentationError(DomainError):
    """Sampler representation used outside its admissible parameter box"""
    pass


class DataValidationError(PrecipError):
    """Input data failed validation"""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None, details: Optional[Dict[str, Any]] = None):
        details = dict(details or {})
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        super().__init__(message, details)
        self.line = line


class InsufficientDataError(DataValidationError):
    """Not enough data for the requested statistic"""
    pass


class NumericalError(PrecipError):
    """Numerical procedure failed"""

    exit_code = 4


class QuadratureError(NumericalError):
    """Adaptive quadrature could not reach the requested tolerance"""
    pass


class OptimizerError(NumericalError):
    """Minimizer failed to converge"""
    pass
