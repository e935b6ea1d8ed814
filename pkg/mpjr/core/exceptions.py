"""Custom exceptions and the CLI error handler."""

from typing import Any, Dict, Optional

import structlog

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NONCONVERGENCE = 3


class MpjrError(Exception):
    """Base solver exception."""

    def __init__(
        self,
        error_code: str,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        exit_code: int = EXIT_FAILURE
    ):
        self.error_code = error_code
        self.message = message
        self.details = details or {}
        self.exit_code = exit_code
        super().__init__(message)


class ConfigError(MpjrError):
    """Invalid run configuration (exit 2)."""

    def __init__(self, key: str, message: str, details: Optional[Dict[str, Any]] = None):
        self.key = key
        super().__init__(
            error_code="CONFIG_ERROR",
            message=f"{key}: {message}",
            details={"key": key, **(details or {})},
            exit_code=EXIT_CONFIG_ERROR
        )


class GridParseError(MpjrError):
    """Malformed scan-grid file."""

    def __init__(self, path: str, line: int, message: str):
        self.line = line
        super().__init__(
            error_code="GRID_PARSE_ERROR",
            message=f"{path}, line {line}: {message}",
            details={"path": path, "line": line}
        )


class GridDataError(MpjrError):
    """Scan-grid value violates a field invariant."""

    def __init__(self, message: str, index: Optional[tuple] = None, details: Optional[Dict[str, Any]] = None):
        self.index = index
        super().__init__(
            error_code="GRID_DATA_ERROR",
            message=message if index is None else f"{message} at (i={index[0]}, j={index[1]})",
            details={"index": index, **(details or {})}
        )


class ProfileIndexError(MpjrError):
    """Requested profile row does not exist."""

    def __init__(self, row_index: int, ny: int):
        super().__init__(
            error_code="PROFILE_INDEX_ERROR",
            message=f"row_index {row_index} outside [0, {ny})",
            details={"row_index": row_index, "ny": ny}
        )


class PhaseFractionError(MpjrError):
    """Phase fractions do not form a partition."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(error_code="PHASE_FRACTION_ERROR", message=message, details=details)


class ParameterizationError(MpjrError):
    """Interface law cannot be regularized with the given parameters."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(error_code="PARAMETERIZATION_ERROR", message=message, details=details)


class ResolutionMismatchError(MpjrError):
    """Scan data and mesh resolutions are incompatible."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(error_code="RESOLUTION_MISMATCH", message=message, details=details)


class GeometryError(MpjrError):
    """Invalid mesh dimensions or degenerate element geometry."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(error_code="GEOMETRY_ERROR", message=message, details=details)


class UnsupportedModelError(MpjrError):
    """Model combination outside the supported scope."""

    def __init__(self, message: str):
        super().__init__(error_code="UNSUPPORTED_MODEL", message=message)


class SingularSystemError(MpjrError):
    """Constrained tangent could not be factorized."""

    def __init__(self, message: str = "Constrained system is singular", details: Optional[Dict[str, Any]] = None):
        super().__init__(
            error_code="SINGULAR_SYSTEM",
            message=message,
            details=details,
            exit_code=EXIT_NONCONVERGENCE
        )


class NewtonFailure(MpjrError):
    """Newton iterations did not converge for one increment."""

    def __init__(self, residual_norm: float, iterations: int):
        self.residual_norm = residual_norm
        self.iterations = iterations
        super().__init__(
            error_code="NEWTON_FAILURE",
            message=f"Newton failed after {iterations} iterations (|R| = {residual_norm:.3e})",
            details={"residual_norm": residual_norm, "iterations": iterations},
            exit_code=EXIT_NONCONVERGENCE
        )


class StepFailure(MpjrError):
    """Increment could not be solved even after recursive bisection."""

    def __init__(self, u_bar: float, residual_norm: float, depth: int, history=None):
        self.u_bar = u_bar
        self.residual_norm = residual_norm
        self.depth = depth
        self.history = history
        super().__init__(
            error_code="STEP_FAILURE",
            message=f"Step to u_bar={u_bar:.6e} failed at substep depth {depth} (|R| = {residual_norm:.3e})",
            details={"u_bar": u_bar, "residual_norm": residual_norm, "depth": depth},
            exit_code=EXIT_NONCONVERGENCE
        )


class OutputError(MpjrError):
    """Writing a result file failed."""

    def __init__(self, path: str, error: str):
        super().__init__(
            error_code="OUTPUT_ERROR",
            message=f"Could not write {path}: {error}",
            details={"path": path}
        )


def handle_exception(exc: Exception) -> int:
    """Log an exception raised by a command and map it to an exit code."""
    if isinstance(exc, MpjrError):
        logger.error(
            "command_error",
            error_code=exc.error_code,
            message=exc.message,
            details=exc.details,
            exit_code=exc.exit_code
        )
        return exc.exit_code

    logger.error(
        "unhandled_exception",
        error=str(exc),
        error_type=type(exc).__name__
    )
    return EXIT_FAILURE
