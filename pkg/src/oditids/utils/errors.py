from __future__ import annotations
from typing import Any

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class OditError(Exception):
    exit_code: int = EXIT_RUNTIME

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.cause = cause

    def __str__(self) -> str:
        base = self.message
        if self.details:
            detail_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            base = f"{base} ({detail_str})"
        if self.cause:
            base = f"{base} [caused by: {self.cause}]"
        return base

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
            "cause": str(self.cause) if self.cause else None,
            "exit_code": self.exit_code,
        }


class DataValidationError(OditError):
    exit_code = EXIT_VALIDATION


class InsufficientDataError(DataValidationError):
    def __init__(self, message: str, required: int, available: int, **kwargs: Any) -> None:
        details = kwargs.pop("details", {}) or {}
        details["required"] = required
        details["available"] = available
        super().__init__(message, details=details, **kwargs)
        self.required = required
        self.available = available


class DimensionMismatchError(DataValidationError):
    def __init__(self, message: str, expected: int, actual: int, **kwargs: Any) -> None:
        details = kwargs.pop("details", {}) or {}
        details["expected"] = expected
        details["actual"] = actual
        super().__init__(message, details=details, **kwargs)
        self.expected = expected
        self.actual = actual


class SchemaVersionError(DataValidationError):
    pass


class ConfigError(DataValidationError):
    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        config_file: str | None = None,
        **kwargs: Any,
    ) -> None:
        details = kwargs.pop("details", {}) or {}
        if config_key:
            details["config_key"] = config_key
        if config_file:
            details["config_file"] = config_file
        super().__init__(message, details=details, **kwargs)
        self.config_key = config_key
        self.config_file = config_file


class TrainingError(OditError):
    pass


class CalibrationError(OditError):
    def __init__(self, message: str, best_fpr: float, **kwargs: Any) -> None:
        details = kwargs.pop("details", {}) or {}
        details["best_fpr"] = best_fpr
        super().__init__(message, details=details, **kwargs)
        self.best_fpr = best_fpr


class ConvergenceError(OditError):
    pass
