"""
Client for a running gate service.

One ``GateClient`` owns one connection; requests on it are answered in order.
"""

import asyncio
from collections.abc import Sequence

from .exceptions import ConnectionError as GateConnectionError
from .logging import logger
from .serve.protocol import ErrorResponse, GateRequest, GateResponse, parse_response
from .task_managers import StreamConnectionManager


class GateClient:
    """Async client speaking newline-delimited JSON to a gate service."""

    def __init__(self, host: str = "127.0.0.1", port: int = 7341):
        self.host = host
        self.port = port
        self._manager = StreamConnectionManager(host, port)
        self._streams = None

    @property
    def is_connected(self) -> bool:
        return self._streams is not None

    async def connect(self) -> None:
        """Open the connection.

        Raises:
            ConnectionError: if the service refuses the connection.
        """
        if self._streams is None:
            self._streams = await self._manager.start()
            logger.debug(f"Connected to gate service at {self.host}:{self.port}")

    async def close(self) -> None:
        if self._streams is not None:
            self._streams = None
            await self._manager.stop()

    async def __aenter__(self) -> "GateClient":
        await self.connect()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb) -> None:
        await self.close()

    async def send_line(self, line: bytes) -> bytes:
        """Send one raw line and return the raw response line."""
        if self._streams is None:
            await self.connect()
        reader, writer = self._streams
        writer.write(line if line.endswith(b"\n") else line + b"\n")
        await writer.drain()
        response = await reader.readline()
        if not response:
            raise GateConnectionError(f"gate service at {self.host}:{self.port} closed the connection")
        return response

    async def request(self, request: GateRequest) -> GateResponse | ErrorResponse:
        line = request.model_dump_json(exclude_none=True).encode("utf-8")
        return parse_response(await self.send_line(line))

    async def pipeline(self, requests: Sequence[GateRequest]) -> list[GateResponse | ErrorResponse]:
        """Stream the requests while reading responses; the result keeps request order."""
        if self._streams is None:
            await self.connect()
        reader, writer = self._streams

        async def write_all() -> None:
            for request in requests:
                writer.write(request.model_dump_json(exclude_none=True).encode("utf-8") + b"\n")
                await writer.drain()

        async def read_all() -> list[GateResponse | ErrorResponse]:
            responses = []
            for _ in requests:
                line = await reader.readline()
                if not line:
                    raise GateConnectionError(f"gate service at {self.host}:{self.port} closed the connection")
                responses.append(parse_response(line))
            return responses

        _, responses = await asyncio.gather(write_all(), read_all())
        return responses
