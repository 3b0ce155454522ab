from app.core.config import Settings, settings


def get_settings() -> Settings:
    """Settings instance for route handlers (overridable in tests)"""
    return settings
