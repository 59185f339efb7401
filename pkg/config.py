"""Application configuration for different environments and run config files."""
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from exceptions import ConfigurationError

load_dotenv()

PROJECT_ROOT = Path(__file__).parent
DEFAULT_RUN_CONFIG = PROJECT_ROOT / 'config' / 'default.yaml'
DEFAULT_ROUTINE_BANK = PROJECT_ROOT / 'config' / 'routines.yaml'

RUN_CONFIG_SECTIONS = ('generator', 'model', 'train', 'sweep')


class Config:
    """Base configuration."""
    # Output
    OUTPUT_ROOT = Path(os.getenv('TIMING_OUTPUT_ROOT', 'runs'))

    # Logging
    LOG_LEVEL = os.getenv('TIMING_LOG_LEVEL', 'INFO').upper()
    RUN_LOG_PATH = Path(os.getenv('TIMING_LOG_PATH', 'logs/training_events.log'))

    # Run registry
    DB_URL = os.getenv('TIMING_DB_URL', f"sqlite:///{PROJECT_ROOT / 'data' / 'runs.db'}")

    # Sweeps
    SWEEP_WORKERS = int(os.getenv('TIMING_SWEEP_WORKERS', 1))


class DevelopmentConfig(Config):
    """Development environment configuration."""
    DEBUG = True
    TESTING = False


class ProductionConfig(Config):
    """Production environment configuration."""
    DEBUG = False
    TESTING = False


class TestingConfig(Config):
    """Testing environment configuration."""
    DEBUG = True
    TESTING = True
    DB_URL = os.getenv('TIMING_DB_URL', 'sqlite://')
    RUN_LOG_PATH = Path(os.getenv('TIMING_LOG_PATH', 'logs/test_training_events.log'))


def get_config() -> Config:
    """Get appropriate config based on TIMING_ENV."""
    env = os.getenv('TIMING_ENV', 'development').lower()

    if env == 'production':
        return ProductionConfig()
    elif env == 'testing':
        return TestingConfig()
    else:
        return DevelopmentConfig()


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> Dict[str, Dict[str, Any]]:
    """
    Load a YAML run configuration and apply CLI overrides.

    Sections are 'generator', 'model', 'train' and 'sweep'. Values present in
    ``overrides`` win over the file; ``None`` overrides are ignored so unset
    flags never clobber file values.

    Args:
        path: YAML file to read. Defaults to config/default.yaml.
        overrides: Mapping of section -> {key: value}.

    Returns:
        Dict of section -> dict of settings.
    """
    path = Path(path) if path else DEFAULT_RUN_CONFIG
    if not path.exists():
        raise ConfigurationError('config', f"Config file not found: {path}")

    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw = yaml.safe_load(fh) or {}
    except yaml.YAMLError as e:
        raise ConfigurationError('config', f"Could not parse {path}: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigurationError('config', f"{path} must contain a mapping of sections")

    unknown = set(raw) - set(RUN_CONFIG_SECTIONS)
    if unknown:
        raise ConfigurationError(sorted(unknown)[0], f"Unknown config sections: {sorted(unknown)}")

    merged: Dict[str, Dict[str, Any]] = {name: dict(raw.get(name) or {}) for name in RUN_CONFIG_SECTIONS}
    for section, values in (overrides or {}).items():
        if section not in merged:
            raise ConfigurationError(section, f"Unknown config section '{section}'")
        for key, value in values.items():
            if value is not None:
                merged[section][key] = value
    return merged
