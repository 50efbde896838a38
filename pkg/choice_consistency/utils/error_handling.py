"""
Error types and error-handling decorators.
Every module error is an AnalysisError so the command line can map it to an exit status.
"""

import logging
import time
from functools import wraps
from typing import Any, Callable, Dict, Optional, TypeVar

from choice_consistency.config.constants import ErrorMessages, ExitCodes

logger = logging.getLogger(__name__)

T = TypeVar('T')


class AnalysisError(Exception):
    """Base exception for toolkit errors."""

    def __init__(self, source: str, operation: str, message: str,
                 original_error: Optional[Exception] = None):
        self.source = source
        self.operation = operation
        self.message = message
        self.original_error = original_error
        super().__init__(f"{source} {operation}: {message}")

    def __reduce__(self):
        # Worker processes send errors back pickled
        state = dict(self.__dict__, original_error=None)
        return _restore_error, (type(self), self.args, state)


def _restore_error(cls, args, state):
    error = cls.__new__(cls)
    Exception.__init__(error, *args)
    error.__dict__.update(state)
    return error


class DataValidationError(AnalysisError):
    """Invalid input data. `row` is 1-based when the error belongs to one row."""

    def __init__(self, source: str, operation: str, message: str,
                 row: Optional[int] = None, original_error: Optional[Exception] = None):
        self.row = row
        super().__init__(source, operation, message, original_error)


class InsufficientVariationError(DataValidationError):
    """Data lacks the variation an estimate or statistic needs."""


class SearchBudgetExceeded(AnalysisError):
    """An exact combinatorial search hit its node cap."""

    def __init__(self, source: str, operation: str, nodes: int, cap: int):
        self.nodes = nodes
        self.cap = cap
        super().__init__(source, operation, ErrorMessages.NODE_CAP.format(cap=cap))


class UsageError(AnalysisError):
    """Bad flags or run configuration."""


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the command-line exit status."""
    if isinstance(error, SearchBudgetExceeded):
        return ExitCodes.RESOURCE_CAP
    if isinstance(error, UsageError):
        return ExitCodes.USAGE_ERROR
    return ExitCodes.DATA_ERROR


def error_payload(error: BaseException) -> Dict[str, Any]:
    """Machine-readable description of an error."""
    payload: Dict[str, Any] = {
        'error': type(error).__name__,
        'exit_code': exit_code_for(error),
        'message': str(error),
    }
    if isinstance(error, AnalysisError):
        payload.update(source=error.source, operation=error.operation, message=error.message)
        if isinstance(error, DataValidationError) and error.row is not None:
            payload['row'] = error.row
        if isinstance(error, SearchBudgetExceeded):
            payload.update(nodes=error.nodes, cap=error.cap)
    return payload


def error_boundary(source: str, operation: str):
    """
    Decorator isolating an operation: foreign exceptions are logged and
    re-raised as AnalysisError, toolkit errors pass through untouched.

    Args:
        source: Subsystem name used in error messages
        operation: Operation name used in error messages
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> T:
            try:
                return func(*args, **kwargs)
            except AnalysisError:
                raise
            except (OSError, ValueError, KeyError) as e:
                logger.error(f"Error boundary caught in {source}.{operation}: {e}")
                raise DataValidationError(source, operation, str(e), original_error=e) from e
        return wrapper
    return decorator


def log_performance(operation_name: str):
    """
    Decorator to log performance metrics for operations.

    Args:
        operation_name: Name of operation for logging
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> T:
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
                logger.debug(f"{operation_name} completed in {time.perf_counter() - start_time:.2f}s")
                return result
            except Exception as e:
                logger.error(f"{operation_name} failed after {time.perf_counter() - start_time:.2f}s: {e}")
                raise
        return wrapper
    return decorator
