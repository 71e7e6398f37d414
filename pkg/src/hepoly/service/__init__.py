from .app import create_app
from .client import RemoteKeyService, ServiceError

__all__ = ["RemoteKeyService", "ServiceError", "create_app"]
