import sys
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from src.pipeline.errors import ConfigError


def setup_logger(name: str = "src", level: Union[int, str] = logging.INFO) -> logging.Logger:
    """
    Creates a simple logger that prints messages to the console.

    Attaching to the ``src`` logger lets every ``logging.getLogger(__name__)``
    inside the package propagate to the same handler.
    """
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(level)
    return logger


def ensure_dir(path: Union[str, Path]) -> None:
    """
    Creates a folder (and parents) if it doesn’t exist.
    """
    Path(path).mkdir(parents=True, exist_ok=True)


def project_root() -> Path:
    """
    Returns the absolute path to the project root.
    (Goes two levels up from this file.)
    """
    return Path(__file__).resolve().parents[2]


def default_settings_path() -> Path:
    return project_root() / "src" / "config" / "settings.yaml"


def load_settings(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load the lab settings YAML.

    Args:
        path: Settings file; defaults to src/config/settings.yaml

    Returns:
        Parsed settings dictionary (empty sections are returned as {})

    Raises:
        ConfigError: If the file is missing or is not a YAML mapping
    """
    settings_path = Path(path) if path is not None else default_settings_path()
    try:
        data = yaml.safe_load(settings_path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError as err:
        raise ConfigError(f"Settings file not found: {settings_path}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"Failed to parse settings {settings_path}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"Settings {settings_path} must be a mapping, got {type(data).__name__}")
    return data


def settings_section(settings: Dict[str, Any], name: str) -> Dict[str, Any]:
    """Returns one top-level settings section, or {} if it is absent."""
    return settings.get(name) or {}
