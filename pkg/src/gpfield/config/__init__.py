"""Configuration management for gpfield."""

from gpfield.config.settings import Settings, get_settings

__all__ = [
    "Settings",
    "get_settings",
]
