"""User-supplied environment description (``j2k.yml``)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from j2k.errors import InvalidEnvironmentSpec

DEFAULT_BROKER = "my-broker-address"
DEFAULT_BASE_IMAGE = "python:3.11-slim"
DEFAULT_INSTALL_COMMAND = "pip install --no-cache-dir {requirements}"
DEFAULT_RUNTIME = "python"


@dataclass
class EnvironmentSpec:
    package_map: dict[str, str] = field(default_factory=dict)
    pins: dict[str, str] = field(default_factory=dict)
    env: dict[str, str] = field(default_factory=dict)
    broker: str = DEFAULT_BROKER
    storage: str = "local"
    builtin_extra: list[str] = field(default_factory=list)
    base_image: str = DEFAULT_BASE_IMAGE
    install_command: str = DEFAULT_INSTALL_COMMAND
    runtime: str = DEFAULT_RUNTIME
    tag: str = "latest"
    # local: node_name, local_path, capacity; cloud: efs_handle, capacity
    storage_options: dict[str, str] = field(default_factory=dict)
    hpa: dict[str, int] = field(default_factory=dict)


_MAPPINGS = ("package_map", "pins", "env", "storage_options")
_STRINGS = ("broker", "base_image", "install_command", "runtime", "tag")


def _str_map(value, key: str) -> dict[str, str]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise InvalidEnvironmentSpec(f"'{key}' must be a mapping")
    out = {}
    for k, v in value.items():
        if not isinstance(k, str) or isinstance(v, (dict, list)) or v is None:
            raise InvalidEnvironmentSpec(f"'{key}' entries must map names to scalar values")
        out[k] = v if isinstance(v, str) else str(v)
    return out


def environment_from_dict(data: dict | None) -> EnvironmentSpec:
    if data is None:
        return EnvironmentSpec()
    if not isinstance(data, dict):
        raise InvalidEnvironmentSpec("environment spec must be a YAML mapping")
    known = {f.name for f in fields(EnvironmentSpec)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidEnvironmentSpec(f"unknown environment spec keys: {', '.join(unknown)}")
    kwargs: dict = {}
    for key in _MAPPINGS:
        if key in data:
            kwargs[key] = _str_map(data[key], key)
    for key in _STRINGS:
        if key in data:
            if not isinstance(data[key], str) or not data[key]:
                raise InvalidEnvironmentSpec(f"'{key}' must be a non-empty string")
            kwargs[key] = data[key]
    if "storage" in data:
        if data["storage"] not in ("local", "cloud"):
            raise InvalidEnvironmentSpec("'storage' must be 'local' or 'cloud'")
        kwargs["storage"] = data["storage"]
    if "builtin_extra" in data:
        extra = data["builtin_extra"] or []
        if not isinstance(extra, list) or not all(isinstance(x, str) for x in extra):
            raise InvalidEnvironmentSpec("'builtin_extra' must be a list of names")
        kwargs["builtin_extra"] = list(extra)
    if "hpa" in data:
        hpa = data["hpa"] or {}
        allowed = {"min_replicas", "max_replicas", "cpu_target_percent"}
        if not isinstance(hpa, dict) or set(hpa) - allowed or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in hpa.values()
        ):
            raise InvalidEnvironmentSpec(f"'hpa' may only set integer {', '.join(sorted(allowed))}")
        kwargs["hpa"] = dict(hpa)
    return EnvironmentSpec(**kwargs)


def load_environment(path: str | Path | None) -> EnvironmentSpec:
    if path is None:
        return EnvironmentSpec()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidEnvironmentSpec(f"cannot read environment spec {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidEnvironmentSpec(f"environment spec {path} is not valid YAML: {exc}") from None
    return environment_from_dict(data)
