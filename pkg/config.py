from __future__ import annotations

import os
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

from models import ConfigError, ScenarioConfig

load_dotenv()


@dataclass
class Settings:
    workers: int
    cache_path: Path
    log_level: str
    output_dir: Path

    @classmethod
    def from_env(cls) -> "Settings":
        raw_workers = os.getenv("WPDM_WORKERS", "1")
        log_level = os.getenv("WPDM_LOG_LEVEL", "INFO").upper()

        invalid = []
        try:
            workers = int(raw_workers)
            if workers < 1:
                raise ValueError
        except ValueError:
            workers = 1
            invalid.append(f"WPDM_WORKERS={raw_workers!r} (expected a positive integer)")
        if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            invalid.append(f"WPDM_LOG_LEVEL={log_level!r}")

        if invalid:
            raise ConfigError(f"Invalid environment variables: {', '.join(invalid)}")

        return cls(
            workers=workers,
            cache_path=Path(os.getenv("WPDM_CACHE_PATH", "cache.db")),
            log_level=log_level,
            output_dir=Path(os.getenv("WPDM_OUTPUT_DIR", "results")),
        )


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def parse_scenario(text: str, source: str = "<config>") -> ScenarioConfig:
    """Parse a flat TOML scenario; errors are anchored to ``source:line``."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: {e}") from e

    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{source}: tables are not supported, found [{nested[0]}]")

    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            key = str(err["loc"][0]) if err["loc"] else None
            line = _line_of(text, key) if key else None
            where = f"{source}:{line}" if line else source
            messages.append(f"{where}: {key + ': ' if key else ''}{err['msg']}")
        raise ConfigError("\n".join(messages)) from e


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    return parse_scenario(text, str(path))
