"""
Configuration loaders for cgate.

This module loads the JSON configuration files (``world.json``, ``policy.json``,
``serve.json``) into validated models and builds a serving gate from them.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError, model_validator

from .calibrate.policy import ThresholdPolicy
from .calibrate.policy import load_policy as _load_policy
from .exceptions import ConfigurationError, DatasetIOError, SynthConfigError
from .logging import logger
from .serve.gate import Gate
from .serve.server import DEFAULT_HOST, DEFAULT_PORT
from .synthgen.config import WorldConfig


class ServeConfig(BaseModel):
    """Artifacts and bind address of a gate service."""

    trigger_model: str | None = None
    filter_model: str | None = None
    policy: str
    host: str = DEFAULT_HOST
    port: int = Field(default=DEFAULT_PORT, ge=0, lt=65536)

    @model_validator(mode="after")
    def _needs_a_model(self) -> "ServeConfig":
        if self.trigger_model is None and self.filter_model is None:
            raise ValueError("serve config needs trigger_model, filter_model or both")
        return self

    def resolved(self, base: str | Path) -> "ServeConfig":
        """Copy with relative artifact paths anchored at ``base``."""
        base = Path(base)

        def anchor(path: str | None) -> str | None:
            if path is None or Path(path).is_absolute():
                return path
            return str(base / path)

        return self.model_copy(
            update={
                "trigger_model": anchor(self.trigger_model),
                "filter_model": anchor(self.filter_model),
                "policy": anchor(self.policy),
            }
        )


def load_config_file(filepath: str | Path) -> dict[str, Any]:
    """Load a JSON configuration file.

    Args:
        filepath: Path to the configuration file

    Returns:
        The parsed configuration

    Raises:
        DatasetIOError: if the file is missing or not valid JSON.
    """
    try:
        with open(filepath, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise DatasetIOError(f"cannot read config {filepath}: {e}") from e
    except json.JSONDecodeError as e:
        raise DatasetIOError(f"{filepath} is not valid JSON: {e}") from e


def load_world_config(filepath: str | Path, seed: int | None = None) -> WorldConfig:
    """Load ``world.json``; ``seed`` overrides the file's seed when given.

    Raises:
        SynthConfigError: if the file does not describe a valid world.
    """
    raw = load_config_file(filepath)
    if seed is not None:
        raw["seed"] = seed
    try:
        return WorldConfig.model_validate(raw)
    except ValidationError as e:
        raise SynthConfigError(f"{filepath}: {e}") from e


def load_policy(filepath: str | Path) -> ThresholdPolicy:
    return _load_policy(filepath)


def load_serve_config(filepath: str | Path) -> ServeConfig:
    """Load ``serve.json``; relative artifact paths are taken relative to the file.

    Raises:
        ConfigurationError: if the file does not describe a valid service.
    """
    raw = load_config_file(filepath)
    try:
        config = ServeConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"{filepath}: {e}") from e
    return config.resolved(Path(filepath).parent)


def create_gate_from_config(config: ServeConfig | dict[str, Any]) -> Gate:
    """Create a gate from a serve configuration.

    Args:
        config: A ``ServeConfig`` or its dict form

    Returns:
        The loaded gate, ready to be served

    Raises:
        ConfigurationError: if the configuration is invalid.
        SchemaMismatchError: if the models disagree on the feature schema.
    """
    if isinstance(config, dict):
        try:
            config = ServeConfig.model_validate(config)
        except ValidationError as e:
            raise ConfigurationError(str(e)) from e
    logger.debug(f"Creating gate from {config.model_dump(exclude_none=True)}")
    return Gate.load(config.policy, config.trigger_model, config.filter_model)
