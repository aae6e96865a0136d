"""
Connection management for gate clients.

A connection manager owns exactly one live connection. Subclasses provide the
transport; the base class bounds the connect time and guarantees that ``stop``
is idempotent.
"""

import asyncio
from abc import ABC, abstractmethod
from typing import Generic, TypeVar

from ..exceptions import ConnectionError as GateConnectionError
from ..logging import logger

T = TypeVar("T")

DEFAULT_CONNECT_TIMEOUT_S = 5.0


class ConnectionManager(Generic[T], ABC):
    """Abstract base class for connection managers."""

    def __init__(self, connect_timeout: float = DEFAULT_CONNECT_TIMEOUT_S) -> None:
        self.connect_timeout = connect_timeout
        self._connection: T | None = None
        self._lock = asyncio.Lock()

    @abstractmethod
    async def _establish_connection(self) -> T:
        """Establish the connection.

        Raises:
            ConnectionError: If connection cannot be established.
        """

    @abstractmethod
    async def _close_connection(self) -> None:
        """Close ``self._connection``."""

    @property
    def is_connected(self) -> bool:
        return self._connection is not None

    async def start(self) -> T:
        """Connect, or return the live connection if there already is one.

        Raises:
            ConnectionError: if the transport fails or the connect timeout expires.
        """
        async with self._lock:
            if self._connection is not None:
                return self._connection
            name = self.__class__.__name__
            try:
                self._connection = await asyncio.wait_for(self._establish_connection(), self.connect_timeout)
            except TimeoutError as e:
                raise GateConnectionError(f"{name}: no connection after {self.connect_timeout}s") from e
            logger.debug(f"{name} connected")
            return self._connection

    async def stop(self) -> None:
        async with self._lock:
            if self._connection is None:
                return
            try:
                await self._close_connection()
            except Exception as e:
                logger.warning(f"Error closing connection in {self.__class__.__name__}: {e}")
            finally:
                self._connection = None
            logger.debug(f"{self.__class__.__name__} closed")

    async def __aenter__(self) -> T:
        return await self.start()

    async def __aexit__(self, exc_type, exc_val, exc_tb) -> None:
        await self.stop()
