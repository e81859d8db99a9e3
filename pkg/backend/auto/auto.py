"""
auto/auto.py - Infrastructure and Configuration

═══════════════════════════════════════════════════════════════════════════════
PURPOSE: Infrastructure ONLY
═══════════════════════════════════════════════════════════════════════════════

This file exists to provide:
- Environment variable access
- .env loading
- YAML document loading (maps, run specs)
- Logging setup
- Secret lookup for model endpoints

This file is "plumbing", not "brain".

═══════════════════════════════════════════════════════════════════════════════
NOT ALLOWED (Game Logic):
═══════════════════════════════════════════════════════════════════════════════

❌ Game rules
❌ Model calls
❌ Claim verification
❌ Metric formulas

Good:    get_model_api_key("OPENAI_API_KEY") → returns the key
Bad:     ask_model_for_action() → game logic, belongs in tools/agent
"""

import logging
import os
from pathlib import Path
from typing import Any, Optional

import yaml

BACKEND_DIR = Path(__file__).resolve().parent.parent
ASSETS_DIR = BACKEND_DIR / "assets"
DEFAULT_MAP_PATH = ASSETS_DIR / "maps" / "default_map.yaml"
PROMPTS_DIR = ASSETS_DIR / "prompts"

LOG_FORMAT = "[%(name)s] %(message)s"


class ConfigError(ValueError):
    """A configuration document or environment setting is missing or invalid."""


def get_env_variable(key: str, default: Optional[str] = None, required: bool = False) -> Optional[str]:
    """
    Get an environment variable value.

    Args:
        key (str): Environment variable name (e.g., "OPENAI_API_KEY")
        default (Optional[str]): Default value if not found
        required (bool): If True, raises ConfigError if variable is missing

    Returns:
        Optional[str]: The variable value, or default if not found

    Example:
        >>> get_env_variable("LOG_LEVEL", default="INFO")
        "INFO"
    """
    value = os.getenv(key, default)

    if required and value is None:
        raise ConfigError(
            f"Required environment variable '{key}' is not set. "
            f"Please add it to your .env file."
        )

    # surrounding whitespace and quote characters are stripped
    if isinstance(value, str):
        value = value.strip().strip('"').strip("'")

    return value


def get_model_api_key(env_name: str = "OPENAI_API_KEY") -> Optional[str]:
    """
    Get a model endpoint secret from the environment.

    The NAME of the variable comes from the run spec; the VALUE only ever
    comes from the environment, never from flags or config files.

    Returns None when unset (lets the caller decide what to do).
    """
    return get_env_variable(env_name, default=None, required=False)


def load_env_file():
    """
    Load environment variables from a .env file, if there is one.

    Safe to call multiple times. A missing .env is fine: production runs use
    real environment variables.
    """
    try:
        from dotenv import load_dotenv
        load_dotenv()
    except Exception as e:
        logging.getLogger("auto").debug(f"Could not load .env file: {e}")


def load_yaml_document(path: str | Path) -> Any:
    """
    Read a YAML document from disk.

    Raises:
        ConfigError: the file is missing or does not parse
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e


def configure_logging(level: Optional[str] = None) -> None:
    """
    Route all layer loggers to standard error as "[layer] message".

    Level comes from the argument, then LOG_LEVEL, then INFO.
    """
    level_name = (level or get_env_variable("LOG_LEVEL", default="INFO") or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )


def read_prompt_template(name: str) -> str:
    """Read a bundled prompt template (assets/prompts/<name>)."""
    path = PROMPTS_DIR / name
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Prompt template {path} is missing: {e}") from e


# Auto-load .env when this module is imported
load_env_file()
