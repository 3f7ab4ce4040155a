"""Run configuration, overridable from a JSON file named by ``ANALOGON_CONFIG``."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

CONFIG_ENV = "ANALOGON_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    partitions: bool = True
    remap: bool = True
    normalizer: int = 20
    d_near: int = 3
    d_far: int = 8
    mac_threshold: float = 0.9
    mac_cap: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.normalizer not in (20, 25):
            raise ConfigError("normalizer must be 20 or 25")
        if not 0 <= self.d_near <= self.d_far:
            raise ConfigError("need 0 <= d_near <= d_far")
        if not 0 < self.mac_threshold <= 1:
            raise ConfigError("mac_threshold must be in (0, 1]")
        if self.mac_cap < 1:
            raise ConfigError("mac_cap must be >= 1")

    def with_(self, **changes) -> "Config":
        return replace(self, **changes)

    def header(self) -> str:
        parts = []
        for k, v in asdict(self).items():
            parts.append(f"{k}={('on' if v else 'off') if isinstance(v, bool) else v}")
        return "# config " + " ".join(parts)

    @property
    def label(self) -> str:
        return f"partitions={'on' if self.partitions else 'off'};remap={'on' if self.remap else 'off'}"


def load_config(path: str | Path | None = None, environ=None) -> Config:
    """Defaults, overridden by the JSON object in ``path`` or in the file named by ``ANALOGON_CONFIG``."""
    environ = os.environ if environ is None else environ
    path = path or environ.get(CONFIG_ENV)
    if not path:
        return Config()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    known = {f.name: f.type for f in fields(Config)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for k, v in data.items():
        want = bool if k in ("partitions", "remap") else float if k == "mac_threshold" else int
        if want is float and isinstance(v, int) and not isinstance(v, bool):
            continue
        if not isinstance(v, want) or (want is int and isinstance(v, bool)):
            raise ConfigError(f"config key {k!r} must be {want.__name__}")
    return Config(**data)
