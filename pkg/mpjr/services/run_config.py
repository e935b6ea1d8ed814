"""
Flat text run configuration.

    # comment
    section.key = value

Values are handed to the pydantic `RunConfig` tree as strings; list-valued
keys use `a:b, c:d` pairs. Unset optional keys are omitted on write.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Union

import structlog
from pydantic import BaseModel, ValidationError

from mpjr.config import settings
from mpjr.core.exceptions import ConfigError, OutputError
from mpjr.schemas.run import Ramp, RunConfig, Section

logger = structlog.get_logger()

PathLike = Union[str, Path]


def _error_key(error: Dict[str, Any]) -> str:
    loc = [str(part) for part in error["loc"] if not isinstance(part, int)]
    return ".".join(loc) if loc else "config"


def config_from_mapping(values: Dict[str, Dict[str, str]]) -> RunConfig:
    """Validate nested section values; errors name the dotted key."""
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        error = e.errors()[0]
        raise ConfigError(_error_key(error), error["msg"])


def parse_config_text(text: str) -> RunConfig:
    values: Dict[str, Dict[str, str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}", f"expected 'section.key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(key, "keys must have the form section.key")
        section, name = key.split(".")
        if section not in RunConfig.model_fields:
            raise ConfigError(key, f"unknown section '{section}'")
        if name in values.get(section, {}):
            raise ConfigError(key, "duplicate key")
        values.setdefault(section, {})[name] = value
    return config_from_mapping(values)


def parse_config(path: PathLike) -> RunConfig:
    """Read and validate a run configuration file."""
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}")
    config = parse_config_text(text)
    logger.info("config_parsed", path=str(path))
    return config


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return settings.format_float(value)
    if isinstance(value, list):
        items = []
        for item in value:
            if isinstance(item, Ramp):
                items.append(f"{settings.format_float(item.target)}:{item.increments}")
            elif isinstance(item, Section):
                items.append(f"{item.axis}:{settings.format_float(item.position)}")
        return ", ".join(items)
    return str(value)


def config_text(config: RunConfig) -> str:
    """Canonical text form; parse_config_text(config_text(c)) == c."""
    lines = []
    for section_name in RunConfig.model_fields:
        section: BaseModel = getattr(config, section_name)
        lines.append(f"# {section_name}")
        for name in type(section).model_fields:
            value = getattr(section, name)
            if value is None:
                continue
            lines.append(f"{section_name}.{name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical text form."""
    return hashlib.sha256(config_text(config).encode()).hexdigest()


def write_config(config: RunConfig, path: PathLike) -> str:
    """Write the resolved config (echo for the run directory); returns its hash."""
    text = config_text(config)
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(str(path), str(e))
    return hashlib.sha256(text.encode()).hexdigest()
