from .app import ServiceConfig, create_app, load_service_config

__all__ = ["ServiceConfig", "create_app", "load_service_config"]
