"""Gate service: wire protocol, decisions, asyncio server and load generator."""

from .bench import BenchReport, bench, build_corpus, corpus_from_dataset
from .gate import Decision, Gate, decide
from .protocol import PROTOCOL_VERSION, ErrorResponse, GateRequest, GateResponse, parse_request, parse_response
from .server import DEFAULT_HOST, DEFAULT_PORT, GateServer, serve

__all__ = [
    "DEFAULT_HOST",
    "DEFAULT_PORT",
    "PROTOCOL_VERSION",
    "BenchReport",
    "Decision",
    "ErrorResponse",
    "Gate",
    "GateRequest",
    "GateResponse",
    "GateServer",
    "bench",
    "build_corpus",
    "corpus_from_dataset",
    "decide",
    "parse_request",
    "parse_response",
    "serve",
]
