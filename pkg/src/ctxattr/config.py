"""Service configuration with flags > environment > config-file precedence.

The config file is plain ``key=value`` lines; ``#`` starts a comment. The
recognized environment variables are PROVIDER_URL, PROVIDER_KEY and
PROVIDER_TIMEOUT_MS.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping


@dataclass
class ServiceConfig:
    port: int = 8008
    provider_url: str | None = None
    provider_key: str | None = None
    provider_timeout_ms: int = 30000
    cache_dir: str | None = None
    max_in_flight: int = 8
    static_dir: str | None = None
    service_token: str | None = None
    adapter_file: str | None = None

    _INT_FIELDS = ("port", "provider_timeout_ms", "max_in_flight")


def _parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_ENV_KEYS = {
    "PROVIDER_URL": "provider_url",
    "PROVIDER_KEY": "provider_key",
    "PROVIDER_TIMEOUT_MS": "provider_timeout_ms",
}


def load_config(
    flags: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
    config_file: str | Path | None = None,
) -> ServiceConfig:
    """Merge sources into a ServiceConfig; later sources never override earlier.

    Precedence: explicit flags, then environment variables, then the file.
    """
    env = os.environ if env is None else env
    merged: dict[str, Any] = {}
    if config_file is not None:
        merged.update(_parse_config_file(config_file))
    for env_key, field_name in _ENV_KEYS.items():
        if env_key in env and env[env_key] != "":
            merged[field_name] = env[env_key]
    if flags:
        for key, value in flags.items():
            if value is not None:
                merged[key] = value
    known = {f.name for f in fields(ServiceConfig) if not f.name.startswith("_")}
    unknown = set(merged) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for int_field in ServiceConfig._INT_FIELDS:
        if int_field in merged:
            merged[int_field] = int(merged[int_field])
    return ServiceConfig(**merged)
