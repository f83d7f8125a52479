"""Runtime configuration: JSON file merged with environment overrides.

Precedence, lowest to highest: built-in defaults, then the config file
(if any), then ``THREATGEN_*`` environment variables.  The CLI and the
HTTP service both load configuration through :func:`load_config`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

__all__ = ["AppConfig", "ConfigError", "ENV_PREFIX", "load_config"]

ENV_PREFIX = "THREATGEN_"

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


class ConfigError(Exception):
    """A config file or environment override could not be applied."""


@dataclass(frozen=True)
class AppConfig:
    """Settings shared by the service, the CLI, and the remote backends."""

    data_root: str = "threatgen-data"
    host: str = "127.0.0.1"
    port: int = 8172
    llm_endpoint: str | None = None
    llm_model: str = "default"
    llm_auth_token: str | None = None
    token_budget: int = 8000
    embed_endpoint: str | None = None
    auto_regenerate: bool = True


def _coerce(name: str, raw: object, target: type) -> object:
    if target is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in _TRUTHY:
            return True
        if text in _FALSY:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if target is int:
        if isinstance(raw, bool):
            raise ConfigError(f"{name}: expected an integer, got {raw!r}")
        try:
            return int(raw)  # type: ignore[call-overload]
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if raw is None:
        return None
    if not isinstance(raw, str):
        raise ConfigError(f"{name}: expected a string, got {raw!r}")
    return raw


_FIELD_TYPES = {
    "data_root": str,
    "host": str,
    "port": int,
    "llm_endpoint": str,
    "llm_model": str,
    "llm_auth_token": str,
    "token_budget": int,
    "embed_endpoint": str,
    "auto_regenerate": bool,
}


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> AppConfig:
    """Build an :class:`AppConfig` from defaults, a file, and environment.

    ``path`` names a JSON object whose keys are the AppConfig field
    names; unknown keys are rejected so typos fail loudly.  Environment
    variables are upper-cased field names under the ``THREATGEN_``
    prefix (``THREATGEN_PORT``, ``THREATGEN_DATA_ROOT``, ...).
    """
    env = os.environ if env is None else env
    values: dict[str, object] = {}

    if path is not None:
        try:
            raw_text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        try:
            data = json.loads(raw_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        for key, raw in data.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, _FIELD_TYPES[key])

    for field in fields(AppConfig):
        var = ENV_PREFIX + field.name.upper()
        if var in env:
            values[field.name] = _coerce(var, env[var], _FIELD_TYPES[field.name])

    return AppConfig(**values)  # type: ignore[arg-type]
