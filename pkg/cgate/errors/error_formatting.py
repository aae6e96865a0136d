import traceback

from ..exceptions import ConnectionError as GateConnectionError
from ..logging import logger

retryable_exceptions = (TimeoutError, GateConnectionError)  # We can add more exceptions here


def format_error(error: Exception, include_stack: bool = False, **context) -> dict:
    """
    Formats an exception into a structured, machine-readable dict.

    Args:
        error: The exception to format.
        include_stack: Whether to attach the formatted traceback.
        **context: Additional context to include in the formatted error.

    Returns:
        A dictionary containing the formatted error.
    """
    formatted_context = {
        "error": getattr(error, "code", "UNKNOWN"),
        "type": type(error).__name__,
        "details": str(error),
        "isRetryable": isinstance(error, retryable_exceptions),
    }
    if include_stack:
        formatted_context["stack"] = traceback.format_exc()
    formatted_context.update(context)

    logger.debug(f"Structured error: {formatted_context}")
    return formatted_context


def format_error_line(error: Exception) -> str:
    """One-line `<code>: <details>` rendering used on stderr by the CLI."""
    details = " ".join(str(error).split())
    return f"{getattr(error, 'code', 'UNKNOWN')}: {details}"
