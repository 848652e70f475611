from config.settings.base import Settings as BaseSettings


class Settings(BaseSettings):
    DEBUG: bool = True
    LOG_LEVEL: str = "DEBUG"
