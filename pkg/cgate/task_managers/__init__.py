"""
Connectors for various connection types.

This module provides the connection managers used by gate clients.
"""

from .base import ConnectionManager
from .stream import StreamConnectionManager

__all__ = [
    "ConnectionManager",
    "StreamConnectionManager",
]
