"""Service configuration: file values overridden by environment values."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping


@dataclass
class ServiceConfig:
    evaluation_host: str = "127.0.0.1"
    evaluation_port: int = 8400
    management_host: str = "127.0.0.1"
    management_port: int = 8401
    sink_url: str | None = None
    store_path: str | None = None
    default_managed_system: str | None = None
    confirmation_expiry_seconds: float = 900.0
    sweep_interval_seconds: float = 1.0
    sink_retry_attempts: int = 8
    sink_retry_backoff_seconds: float = 0.1
    sink_retry_backoff_cap_seconds: float = 2.0
    sink_timeout_seconds: float = 5.0
    evaluation_workers: int = 4

    @property
    def evaluation_bind(self) -> str:
        return f"{self.evaluation_host}:{self.evaluation_port}"

    @property
    def management_bind(self) -> str:
        return f"{self.management_host}:{self.management_port}"


_ENV_PREFIX = "ROE_GATE_"

_FLOAT_FIELDS = {
    "confirmation_expiry_seconds",
    "sweep_interval_seconds",
    "sink_retry_backoff_seconds",
    "sink_retry_backoff_cap_seconds",
    "sink_timeout_seconds",
}
_INT_FIELDS = {
    "evaluation_port",
    "management_port",
    "sink_retry_attempts",
    "evaluation_workers",
}


def _split_bind(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bind address must look like host:port, got {value!r}")
    return host, int(port)


def _coerce(name: str, value: object) -> object:
    if name in _FLOAT_FIELDS:
        return float(value)  # type: ignore[arg-type]
    if name in _INT_FIELDS:
        return int(value)  # type: ignore[arg-type]
    return value


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Build a config from defaults, then a JSON file, then the environment.

    The file may use either the split host/port fields or the combined
    ``evaluation_bind`` / ``management_bind`` forms; environment variables
    are the upper-cased field names under the ``ROE_GATE_`` prefix.
    """
    env = os.environ if env is None else env
    config = ServiceConfig()
    values: dict[str, object] = {}
    if path is not None:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(document, dict):
            raise ValueError("config file must hold a JSON object")
        values.update(document)
    known = {f.name for f in fields(ServiceConfig)}
    for field_obj in fields(ServiceConfig):
        raw = env.get(_ENV_PREFIX + field_obj.name.upper())
        if raw is not None:
            values[field_obj.name] = raw
    for combined in ("evaluation_bind", "management_bind"):
        raw = values.pop(combined, None)
        raw = env.get(_ENV_PREFIX + combined.upper(), raw)
        if raw is not None:
            host, port = _split_bind(str(raw))
            prefix = combined.split("_")[0]
            values[f"{prefix}_host"] = host
            values[f"{prefix}_port"] = port
    for name, value in values.items():
        if name not in known:
            raise ValueError(f"unknown config key {name!r}")
        setattr(config, name, _coerce(name, value))
    return config
