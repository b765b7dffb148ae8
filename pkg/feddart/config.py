"""
This module contains the loaders of the configuration files: the server file, the device file and the worker file.
Files are JSON, YAML is accepted for the `.yml` and `.yaml` suffixes.
"""

import json
import os
from enum import Enum, auto
from pathlib import Path
from typing import Any, Optional, TypeVar

import yaml
from pydantic import BaseModel, ConfigDict, Field, RootModel, ValidationError

from .errors import ConfigError
from .server.models import ServerConfig

KEY_ENV = "FEDDART_KEY"

M = TypeVar("M", bound=BaseModel)


class ConfigErrorCodes(Enum):
    """Error codes of the configuration loaders"""
    COULD_NOT_FIND_CONFIGURATION = auto()
    COULD_NOT_PARSE_CONFIGURATION = auto()


class DeviceEntry(BaseModel):
    """One entry of the device file, the address field keeps its historical spelling"""
    model_config = ConfigDict(populate_by_name=True)

    ip_address: str = Field(default="", alias="ipAdress")
    port: int = 0
    hardware_config: Optional[dict[str, Any]] = None


class DeviceFile(RootModel[dict[str, DeviceEntry]]):
    """Expected roster of clients, keyed by device name"""

    @property
    def names(self) -> list[str]:
        return list(self.root)


def read_file(path: str | Path) -> Any:
    """
    Read a JSON or YAML file

    :param path: Path of the file
    :return: The decoded document
    """
    path = Path(path)

    try:
        with open(path, "r", encoding="utf-8") as file:
            if path.suffix.lower() in (".yml", ".yaml"):
                return yaml.safe_load(file)
            return json.load(file)
    except FileNotFoundError as exc:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_FIND_CONFIGURATION, f"{path} not found") from exc
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION, f"{path}: {exc}") from exc


def load_model(model: type[M], path: str | Path, **overrides: Any) -> M:
    """
    Parse a configuration file into a pydantic model

    :param model: Model class
    :param path: Path of the file
    :param overrides: Fields replacing the ones of the file when not None
    :return: The parsed configuration
    """
    data = read_file(path)

    if not isinstance(data, dict):
        raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION, f"{path} does not hold a mapping")

    data.update({k: v for k, v in overrides.items() if v is not None})

    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION, f"{path}: {exc}") from exc


def load_server_file(path: str | Path) -> ServerConfig:
    """
    Load a server file, the `FEDDART_KEY` environment variable replaces its client key

    :param path: Path of the server file
    :return: The server configuration
    """
    return load_model(ServerConfig, path, client_key=os.getenv(KEY_ENV))


def load_device_file(path: str | Path) -> DeviceFile:
    data = read_file(path)

    try:
        return DeviceFile.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(ConfigErrorCodes.COULD_NOT_PARSE_CONFIGURATION, f"{path}: {exc}") from exc
