from .client import HubClient, HubError, HubUnreachableError
from .server import create_app
from .storage import DocumentStore, FileStore, MemoryStore, content_address

__all__ = [
    "HubClient",
    "HubError",
    "HubUnreachableError",
    "create_app",
    "DocumentStore",
    "FileStore",
    "MemoryStore",
    "content_address",
]
