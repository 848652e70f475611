from config.settings import BASE_DIR, get_settings, settings

__all__ = ["BASE_DIR", "get_settings", "settings"]
