from .error_formatting import format_error, format_error_line

__all__ = ["format_error", "format_error_line"]
