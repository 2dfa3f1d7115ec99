"""Versioned key-addressed persistence for human sessions.

The default backend is a local filesystem tree mirroring the session key
structure, one numbered JSON file per version; an object-store client can be
dropped in behind the same three methods. Writes to the same key are
serialized so version ids are strictly monotonic, and old versions are never
deleted (puts overwrite nothing, they append).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from .sessions import SchemaError, SessionKey, validate_body


class StorageError(Exception):
    pass


class NotFoundError(StorageError):
    """Key (or version) does not exist; distinct from backend failures."""


class VersionedStore:
    """Filesystem-backed store: one directory per key, one file per version."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, key: SessionKey) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(key.storage_path(), threading.Lock())

    def _key_dir(self, key: SessionKey) -> Path:
        return self.root / key.storage_path()

    def _version_files(self, key: SessionKey) -> list[Path]:
        d = self._key_dir(key)
        if not d.is_dir():
            return []
        return sorted(d.glob("v*.json"))

    def put(self, key: SessionKey, body: dict) -> int:
        """Store a new version; returns its monotonically increasing id."""
        with self._lock_for(key):
            existing = self._version_files(key)
            version = len(existing) + 1
            d = self._key_dir(key)
            try:
                d.mkdir(parents=True, exist_ok=True)
                target = d / f"v{version:06d}.json"
                tmp = target.with_suffix(".tmp")
                tmp.write_text(json.dumps(body, sort_keys=True))
                tmp.replace(target)
            except OSError as exc:
                raise StorageError(f"write failed for {key.storage_path()}: {exc}") from exc
            return version

    def get(self, key: SessionKey, version: int | None = None) -> tuple[dict, int]:
        """Fetch (body, version); latest when no version is requested."""
        files = self._version_files(key)
        if not files:
            raise NotFoundError(f"no versions under {key.storage_path()}")
        if version is None:
            path = files[-1]
            version = len(files)
        else:
            path = self._key_dir(key) / f"v{version:06d}.json"
            if not path.is_file():
                raise NotFoundError(f"{key.storage_path()} has no version {version}")
        try:
            return json.loads(path.read_text()), version
        except OSError as exc:
            raise StorageError(f"read failed for {path}: {exc}") from exc

    def versions(self, key: SessionKey) -> list[int]:
        return list(range(1, len(self._version_files(key)) + 1))


def session_put(store: VersionedStore, key: SessionKey, body: dict) -> int:
    """Validate against the kind's schema, then store durably. Returns the
    new version id; previous versions stay readable."""
    validate_body(key.kind, body)  # raises SchemaError with a field path
    return store.put(key, body)


def session_get(store: VersionedStore, key: SessionKey, version: int | None = None) -> tuple[dict, int]:
    return store.get(key, version)


__all__ = [
    "NotFoundError",
    "SchemaError",
    "SessionKey",
    "StorageError",
    "VersionedStore",
    "session_get",
    "session_put",
]
