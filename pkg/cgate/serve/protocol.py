"""
Wire protocol: one JSON object per line in each direction.

Requests ``{"v", "id", "kind", "features", "context", "compilable"}``; responses
``{"v", "id", "pass", "score", "threshold", "rule_hit", "latency_us"}`` or, for a line
that cannot be served, ``{"v", "id", "error", "details"}``.
"""

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..events.types import FeatureBag
from ..exceptions import BadRequestError

PROTOCOL_VERSION = 1

Kind = Literal["trigger", "filter"]


class GateRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    v: int = PROTOCOL_VERSION
    id: str
    kind: Kind
    features: FeatureBag = Field(default_factory=FeatureBag)
    context: str | None = None
    compilable: bool = True

    @field_validator("v")
    @classmethod
    def _supported(cls, value: int) -> int:
        if value != PROTOCOL_VERSION:
            raise ValueError(f"unsupported protocol version {value}")
        return value


class GateResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    v: int = PROTOCOL_VERSION
    id: str
    passed: bool = Field(alias="pass")
    score: float
    threshold: float
    rule_hit: str | None = None
    latency_us: int = 0

    def to_line(self) -> bytes:
        return self.model_dump_json(by_alias=True).encode("utf-8") + b"\n"


class ErrorResponse(BaseModel):
    v: int = PROTOCOL_VERSION
    id: str | None = None
    error: str = BadRequestError.code
    details: str = ""

    def to_line(self) -> bytes:
        return self.model_dump_json().encode("utf-8") + b"\n"


def _request_id(line: bytes | str) -> str | None:
    try:
        document = json.loads(line)
    except (ValueError, TypeError):
        return None
    if isinstance(document, dict) and isinstance(document.get("id"), str):
        return document["id"]
    return None


def parse_request(line: bytes | str) -> GateRequest:
    """Parse one request line.

    Raises:
        BadRequestError: for anything that is not a valid request; ``request_id`` is
            set when the line carried a readable id.
    """
    try:
        return GateRequest.model_validate_json(line)
    except ValidationError as e:
        raise BadRequestError(" ".join(str(e).split()), request_id=_request_id(line)) from e


def parse_response(line: bytes | str) -> GateResponse | ErrorResponse:
    document = json.loads(line)
    if "error" in document:
        return ErrorResponse.model_validate(document)
    return GateResponse.model_validate(document)
