"""Content-addressed document storage backends.

Documents are immutable blobs keyed by the SHA-256 of their bytes, so writes
are idempotent and a stored id can always be revalidated against its content.
The interface is deliberately small (put/get/list) so a remote-drive adapter
can replace the local backends without touching the service layer.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
from typing import Dict, List, Optional


class StorageError(RuntimeError):
    pass


def content_address(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


_ID_RE = re.compile(r"^[0-9a-f]{64}$")


class DocumentStore:
    """Append-only blob store; subclasses override the three primitives."""

    def put(self, data: bytes) -> str:
        """Store ``data``; returns its content address.  Idempotent."""
        raise NotImplementedError

    def get(self, doc_id: str) -> Optional[bytes]:
        raise NotImplementedError

    def list_ids(self) -> List[str]:
        raise NotImplementedError


class MemoryStore(DocumentStore):
    def __init__(self):
        self._blobs: Dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, data: bytes) -> str:
        doc_id = content_address(data)
        with self._lock:
            self._blobs.setdefault(doc_id, data)
        return doc_id

    def get(self, doc_id: str) -> Optional[bytes]:
        return self._blobs.get(doc_id)

    def list_ids(self) -> List[str]:
        return sorted(self._blobs)


class FileStore(DocumentStore):
    """One file per document under ``root``, named by content address."""

    def __init__(self, root):
        self.root = os.fspath(root)
        os.makedirs(self.root, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, doc_id: str) -> str:
        if not _ID_RE.match(doc_id):
            raise StorageError(f"invalid document id {doc_id!r}")
        return os.path.join(self.root, doc_id)

    def put(self, data: bytes) -> str:
        doc_id = content_address(data)
        path = self._path(doc_id)
        with self._lock:
            if os.path.exists(path):
                return doc_id
            tmp = path + ".tmp"
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        return doc_id

    def get(self, doc_id: str) -> Optional[bytes]:
        try:
            with open(self._path(doc_id), "rb") as fh:
                return fh.read()
        except FileNotFoundError:
            return None

    def list_ids(self) -> List[str]:
        return sorted(n for n in os.listdir(self.root) if _ID_RE.match(n))
