"""
Middleware package for gate request interception.

Middleware functions receive a request context and a call_next function, so they
can act both before and after the gate decision.
"""

from .logging import LoggingMiddleware, default_logging_middleware
from .metrics import UNKNOWN_FEATURES_KEY, MetricsMiddleware, calculate_percentiles
from .middleware import GateResponseContext, Middleware, MiddlewareContext, MiddlewareManager, NextFunctionT

__all__ = [
    "MiddlewareContext",
    "GateResponseContext",
    "Middleware",
    "MiddlewareManager",
    "NextFunctionT",
    "LoggingMiddleware",
    "default_logging_middleware",
    "MetricsMiddleware",
    "UNKNOWN_FEATURES_KEY",
    "calculate_percentiles",
]
