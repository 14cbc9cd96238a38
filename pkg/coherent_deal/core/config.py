"""
Engine configuration
Loads settings from a JSON file, overlays environment variables.
"""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

THREADS_ENV = "COHERENT_DEAL_THREADS"


class Config:
    """Configuration manager"""

    DEFAULT_CONFIG = {
        "threads": 1,
        "grid_size": 200,
        "resamples": 10000,
        "seed": 12345,
        "precision": 12,
        "bruteforce_cap": 14,
        "lp_tolerance": 1e-9,
        "log_level": "WARNING",
        "log_file": None
    }

    def __init__(self, config_file: Optional[str] = None, environ: Optional[Dict[str, str]] = None):
        """
        Initialize the configuration manager

        Args:
            config_file: JSON settings file (optional; defaults when absent)
            environ: environment mapping used for overlays (defaults to os.environ)
        """
        self.config_file = Path(config_file) if config_file else None
        self.config = self._load_config()
        self._apply_environment(os.environ if environ is None else environ)

    def _load_config(self) -> Dict[str, Any]:
        """Load settings from file"""
        config = self.DEFAULT_CONFIG.copy()
        if self.config_file is None:
            return config
        try:
            if self.config_file.exists():
                with open(self.config_file, "r", encoding="utf-8") as f:
                    loaded = json.load(f)
                if isinstance(loaded, dict):
                    config.update(loaded)
                else:
                    logger.warning("Config file %s is not a JSON object, using defaults", self.config_file)
        except (json.JSONDecodeError, IOError) as e:
            logger.warning("Cannot load config file %s: %s, using defaults", self.config_file, e)
        return config

    def _apply_environment(self, environ: Dict[str, str]) -> None:
        """Overlay the thread cap from the environment"""
        raw = environ.get(THREADS_ENV)
        if raw is None:
            return
        try:
            threads = int(raw)
        except ValueError:
            logger.warning("Ignoring %s=%r: not an integer", THREADS_ENV, raw)
            return
        if threads < 1:
            logger.warning("Ignoring %s=%r: must be positive", THREADS_ENV, raw)
            return
        self.config["threads"] = threads

    def save_config(self, path: Optional[str] = None) -> None:
        """Save settings to file"""
        target = Path(path) if path else self.config_file
        if target is None:
            return
        try:
            with open(target, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False)
        except IOError as e:
            logger.warning("Cannot save config file %s: %s", target, e)

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a setting

        Args:
            key: setting name
            default: fallback value

        Returns:
            Setting value
        """
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        """
        Set a setting

        Args:
            key: setting name
            value: setting value
        """
        self.config[key] = value

    def update(self, updates: Dict[str, Any]) -> None:
        """
        Update several settings, skipping None values

        Args:
            updates: settings to apply
        """
        self.config.update({k: v for k, v in updates.items() if v is not None})

    def reset_to_default(self) -> None:
        """Reset to defaults"""
        self.config = self.DEFAULT_CONFIG.copy()

    def get_all(self) -> Dict[str, Any]:
        """
        Get all settings

        Returns:
            Copy of the settings dictionary
        """
        return self.config.copy()

    @property
    def threads(self) -> int:
        """Worker cap for parallel grid points and resampling chunks"""
        return max(1, int(self.config.get("threads", 1)))
