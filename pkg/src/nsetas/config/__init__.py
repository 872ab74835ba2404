"""
Configuration management for nsetas.
"""

from nsetas.config.settings import RunConfig, Settings, get_settings, reset_settings

__all__ = ["RunConfig", "Settings", "get_settings", "reset_settings"]
