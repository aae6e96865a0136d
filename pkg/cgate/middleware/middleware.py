"""
Core middleware system for gate requests.

- A typed MiddlewareContext carries the parsed request.
- A Middleware base class dispatches to per-kind hooks.
- A MiddlewareManager builds and runs the chain around the gate decision.
"""

import time
from collections.abc import Awaitable, Callable
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Generic, Protocol, TypeVar

T = TypeVar("T")
R = TypeVar("R", covariant=True)


@dataclass
class MiddlewareContext(Generic[T]):
    """Unified, typed context for all middleware operations."""

    id: str
    method: str  # request kind: "trigger" or "filter"
    params: T
    connection_id: str
    timestamp: float
    metadata: dict[str, Any] = field(default_factory=dict)


@dataclass
class GateResponseContext:
    """Outcome of one request after the chain ran."""

    request_id: str
    result: Any
    error: Exception | None
    duration: float
    metadata: dict[str, Any]

    @classmethod
    def create(cls, request_id: str, result: Any = None, error: Exception | None = None) -> "GateResponseContext":
        return cls(request_id=request_id, result=result, error=error, duration=0.0, metadata={})


class NextFunctionT(Protocol[T, R]):
    """Protocol for the `call_next` function passed to middleware."""

    async def __call__(self, context: MiddlewareContext[T]) -> R: ...


class Middleware:
    """Base class for middlewares with hooks."""

    async def __call__(self, context: MiddlewareContext[T], call_next: NextFunctionT[T, Any]) -> Any:
        handler_chain = await self._dispatch_handler(context, call_next)
        return await handler_chain(context)

    async def _dispatch_handler(
        self, context: MiddlewareContext[Any], call_next: NextFunctionT[Any, Any]
    ) -> NextFunctionT[Any, Any]:
        handler = call_next

        method_map = {
            "trigger": self.on_trigger,
            "filter": self.on_filter,
        }

        if hook := method_map.get(context.method):
            handler = partial(hook, call_next=handler)

        return partial(self.on_request, call_next=handler)

    async def on_request(self, context: MiddlewareContext[Any], call_next: NextFunctionT) -> Any:
        return await call_next(context)

    async def on_trigger(self, context: MiddlewareContext[Any], call_next: NextFunctionT) -> Any:
        return await call_next(context)

    async def on_filter(self, context: MiddlewareContext[Any], call_next: NextFunctionT) -> Any:
        return await call_next(context)


class MiddlewareManager:
    """Runs registered middlewares around a gate call."""

    def __init__(self, middlewares: list[Middleware] | None = None):
        self.middlewares: list[Middleware] = list(middlewares or [])

    def add_middleware(self, callback: Middleware) -> None:
        self.middlewares.append(callback)

    async def process_request(
        self, context: MiddlewareContext, original_call: Callable[[], Awaitable[Any]]
    ) -> GateResponseContext:
        """
        Runs the full middleware chain, captures timing and errors,
        and returns a structured GateResponseContext.
        """
        start_time = time.perf_counter()
        try:

            async def execute_call(_: MiddlewareContext) -> Any:
                return await original_call()

            call_chain = execute_call
            for middleware in reversed(self.middlewares):
                call_chain = partial(middleware, call_next=call_chain)

            response = GateResponseContext.create(request_id=context.id, result=await call_chain(context))
        except Exception as error:
            response = GateResponseContext.create(request_id=context.id, error=error)
        response.duration = time.perf_counter() - start_time
        response.metadata = context.metadata
        return response
