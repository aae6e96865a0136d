"""
Newline-delimited JSON gate service on asyncio streams.

Each connection is served sequentially, so responses keep request order; connections
run concurrently and share only the immutable gate.
"""

import asyncio
import itertools
import time

from ..errors.error_formatting import format_error
from ..exceptions import BadRequestError
from ..logging import logger
from ..middleware import (
    UNKNOWN_FEATURES_KEY,
    MetricsMiddleware,
    Middleware,
    MiddlewareContext,
    MiddlewareManager,
    default_logging_middleware,
)
from .gate import Gate
from .protocol import ErrorResponse, GateResponse, parse_request

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7341
MAX_LINE_BYTES = 1 << 20


class GateServer:
    """Serves a ``Gate`` over TCP until stopped."""

    def __init__(
        self,
        gate: Gate,
        host: str = DEFAULT_HOST,
        port: int = DEFAULT_PORT,
        middleware: list[Middleware] | None = None,
        max_line_bytes: int = MAX_LINE_BYTES,
    ):
        self.gate = gate
        self.host = host
        self.port = port
        self.max_line_bytes = max_line_bytes
        self.metrics = MetricsMiddleware()
        chain = [default_logging_middleware, self.metrics] if middleware is None else list(middleware)
        self.middleware_manager = MiddlewareManager(chain)
        self._server: asyncio.AbstractServer | None = None
        self._connection_ids = itertools.count(1)

    @property
    def address(self) -> tuple[str, int]:
        if self._server is None:
            raise RuntimeError("server is not started")
        host, port = self._server.sockets[0].getsockname()[:2]
        return host, port

    async def start(self) -> tuple[str, int]:
        """Bind and start accepting; port 0 picks a free port. Returns the bound address."""
        self._server = await asyncio.start_server(self._handle, self.host, self.port, limit=self.max_line_bytes)
        logger.info(f"Gate service listening on {self.address[0]}:{self.address[1]}")
        return self.address

    async def serve_forever(self) -> None:
        if self._server is None:
            await self.start()
        async with self._server:
            await self._server.serve_forever()

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
            logger.info("Gate service stopped")

    async def __aenter__(self) -> "GateServer":
        await self.start()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb) -> None:
        await self.stop()

    async def respond(self, line: bytes, connection_id: str = "local") -> bytes:
        """Answer one request line; never raises for bad input."""
        started = time.perf_counter_ns()
        try:
            request = parse_request(line)
        except BadRequestError as e:
            formatted = format_error(e)
            return ErrorResponse(id=e.request_id, error=formatted["error"], details=formatted["details"]).to_line()

        context = MiddlewareContext(
            id=request.id,
            method=request.kind,
            params=request,
            connection_id=connection_id,
            timestamp=time.time(),
            metadata={UNKNOWN_FEATURES_KEY: self.gate.unknown_features(request.features)},
        )

        async def call():
            return self.gate.decide(request)

        outcome = await self.middleware_manager.process_request(context, call)
        if outcome.error is not None:
            formatted = format_error(outcome.error)
            return ErrorResponse(id=request.id, error=formatted["error"], details=formatted["details"]).to_line()
        decision = outcome.result
        return GateResponse(
            id=request.id,
            passed=decision.passed,
            score=decision.score,
            threshold=decision.threshold,
            rule_hit=decision.rule_hit,
            latency_us=(time.perf_counter_ns() - started) // 1000,
        ).to_line()

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        connection_id = f"conn-{next(self._connection_ids)}"
        logger.debug(f"{connection_id} opened")
        try:
            while True:
                try:
                    line = await reader.readline()
                except ValueError:
                    # line longer than the stream limit; the rest of it is unrecoverable
                    error = BadRequestError(f"request line exceeds {self.max_line_bytes} bytes")
                    writer.write(ErrorResponse(details=str(error)).to_line())
                    break
                if not line:
                    break
                if not line.strip():
                    continue
                writer.write(await self.respond(line, connection_id))
                await writer.drain()
        except ConnectionResetError:
            logger.debug(f"{connection_id} reset by peer")
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass
            logger.debug(f"{connection_id} closed")


async def serve(gate: Gate, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT) -> None:
    """Run the gate service until cancelled."""
    server = GateServer(gate, host, port)
    try:
        await server.serve_forever()
    finally:
        await server.stop()
