"""Service configuration: key = value text file with QIR_ env overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    corpus_path: Path
    embeddings_path: Path
    model_path: Path
    store_dir: Path
    corpus_format: str = "jsonl"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    delta: float = 0.8
    seed: int = 0
    result_size: int = 3
    pca_dim: int | None = None

    def validate(self) -> "ServiceConfig":
        for name in ("corpus_path", "embeddings_path", "model_path"):
            p = getattr(self, name)
            if not Path(p).exists():
                raise ConfigError(f"{name} does not exist: {p}")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError(f"delta must be in (0, 1], got {self.delta}")
        if self.corpus_format not in ("lines", "jsonl"):
            raise ConfigError(f"unknown corpus format: {self.corpus_format}")
        if self.result_size < 1:
            raise ConfigError("result_size must be >= 1")
        return self


_FIELD_PARSERS = {
    "corpus_path": Path, "embeddings_path": Path, "model_path": Path,
    "store_dir": Path, "corpus_format": str, "listen_host": str,
    "listen_port": int, "delta": float, "seed": int, "result_size": int,
    "pca_dim": lambda v: None if v in ("", "none") else int(v),
}

ENV_PREFIX = "QIR_"


def load_config(path: str | Path, env: dict[str, str] | None = None) -> ServiceConfig:
    """Parse "key = value" lines; QIR_<KEY> environment variables win."""
    values: dict[str, object] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _FIELD_PARSERS[key](value.strip())
    env = os.environ if env is None else env
    for key, parser in _FIELD_PARSERS.items():
        override = env.get(ENV_PREFIX + key.upper())
        if override is not None:
            values[key] = parser(override)
    missing = {"corpus_path", "embeddings_path", "model_path", "store_dir"} - values.keys()
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(sorted(missing))}")
    return ServiceConfig(**values).validate()
