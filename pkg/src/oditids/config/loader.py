from __future__ import annotations
import logging
import os
from pathlib import Path
from typing import Any

from platformdirs import user_config_dir
import tomli
import tomli_w

from oditids.config.config import RunConfig
from oditids.utils.errors import ConfigError
from oditids.utils.paths import ensure_parent_directory

logger = logging.getLogger(__name__)
CONFIG_FILE_NAME = "config.toml"
PROJECT_DIR_NAME = ".oditids"
RESOLVED_CONFIG_NAME = "run_config.toml"
ENV_PREFIX = "ODITIDS_"


def get_config_dir() -> Path:
    return Path(user_config_dir("oditids"))


def get_system_config_path() -> Path:
    return get_config_dir() / CONFIG_FILE_NAME


def _parse_toml(path: Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomli.load(f)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}", config_file=str(path)) from e
    except OSError as e:
        raise ConfigError(
            f"Failed to read config file {path}: {e}", config_file=str(path)
        ) from e


def _get_project_config(cwd: Path) -> Path | None:
    config_file = cwd.resolve() / PROJECT_DIR_NAME / CONFIG_FILE_NAME
    if config_file.is_file():
        return config_file

    return None


def _merge_dicts(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = _merge_dicts(result[key], value)
        else:
            result[key] = value

    return result


def _env_overrides() -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    if level := os.environ.get(f"{ENV_PREFIX}LOG_LEVEL"):
        overrides["log_level"] = level
    if seed := os.environ.get(f"{ENV_PREFIX}SEED"):
        try:
            overrides["seed"] = int(seed)
        except ValueError as e:
            raise ConfigError(
                f"{ENV_PREFIX}SEED must be an integer, got {seed!r}", config_key="seed"
            ) from e
    return overrides


def _set_dotted(target: dict[str, Any], dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    node = target
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config(
    cwd: Path | None = None,
    config_path: Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Resolve the run configuration.

    Layers, lowest precedence first: user config, project config
    (``.oditids/config.toml``), the explicit ``--config`` file, ``ODITIDS_*``
    environment variables, then command-line flags given as dotted keys
    (``{"detector.h": 12.0}``).
    """
    cwd = cwd or Path.cwd()

    config_dict: dict[str, Any] = {}

    system_path = get_system_config_path()
    if system_path.is_file():
        try:
            config_dict = _parse_toml(system_path)
        except ConfigError:
            logger.warning(f"Skipping invalid user config: {system_path}")

    project_path = _get_project_config(cwd)
    if project_path:
        try:
            config_dict = _merge_dicts(config_dict, _parse_toml(project_path))
        except ConfigError:
            logger.warning(f"Skipping invalid project config: {project_path}")

    if config_path is not None:
        if not config_path.is_file():
            raise ConfigError(
                f"Config file does not exist: {config_path}", config_file=str(config_path)
            )
        config_dict = _merge_dicts(config_dict, _parse_toml(config_path))

    config_dict = _merge_dicts(config_dict, _env_overrides())

    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(config_dict, key, value)

    if "cwd" not in config_dict:
        config_dict["cwd"] = cwd

    try:
        config = RunConfig(**config_dict)
    except Exception as e:
        raise ConfigError(
            f"Invalid configuration: {e}",
            config_file=str(config_path) if config_path else None,
        ) from e

    return config


def save_resolved_config(config: RunConfig, out_dir: Path) -> Path:
    path = ensure_parent_directory(out_dir / RESOLVED_CONFIG_NAME)

    config_dict = config.to_dict()
    config_dict.pop("cwd", None)

    with open(path, "wb") as f:
        tomli_w.dump(config_dict, f)

    return path
