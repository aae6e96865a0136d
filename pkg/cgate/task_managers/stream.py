"""
TCP stream connection management for the gate protocol.
"""

import asyncio

from ..exceptions import ConnectionError as GateConnectionError
from ..logging import logger
from .base import DEFAULT_CONNECT_TIMEOUT_S, ConnectionManager

Streams = tuple[asyncio.StreamReader, asyncio.StreamWriter]


class StreamConnectionManager(ConnectionManager[Streams]):
    """Owns one TCP connection to a gate service."""

    def __init__(self, host: str, port: int, limit: int = 1 << 20, connect_timeout: float = DEFAULT_CONNECT_TIMEOUT_S):
        super().__init__(connect_timeout)
        self.host = host
        self.port = port
        self.limit = limit

    async def _establish_connection(self) -> Streams:
        try:
            return await asyncio.open_connection(self.host, self.port, limit=self.limit)
        except OSError as e:
            raise GateConnectionError(f"cannot connect to {self.host}:{self.port}: {e}") from e

    async def _close_connection(self) -> None:
        if self._connection is None:
            return
        _, writer = self._connection
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionResetError, BrokenPipeError) as e:
            logger.debug(f"Connection to {self.host}:{self.port} closed uncleanly: {e}")
