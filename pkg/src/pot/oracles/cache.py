"""Content-addressed on-disk cache of raw API response bodies."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Callable

log = logging.getLogger(__name__)


def request_digest(**fields) -> str:
    """Stable hash over api base, model, prompt, decode parameters and sample index."""
    blob = json.dumps(fields, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


class ResponseCache:
    """Bodies live at ``<dir>/<xx>/<digest>.json``; ``index.jsonl`` lists digests.

    Writes go through a temp file and ``os.replace``. A per-key lock ensures
    concurrent callers for the same digest fetch once.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def path(self, digest: str) -> Path:
        return self.directory / digest[:2] / f"{digest}.json"

    def _lock(self, digest: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(digest, threading.Lock())

    def get(self, digest: str) -> bytes | None:
        p = self.path(digest)
        try:
            body = p.read_bytes()
        except FileNotFoundError:
            return None
        try:
            json.loads(body)
        except ValueError:
            log.warning("corrupt cache entry %s, refetching", p)
            return None
        return body

    def put(self, digest: str, body: bytes, meta: dict | None = None) -> None:
        p = self.path(digest)
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(body)
            os.replace(tmp, p)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        line = json.dumps({"digest": digest, **(meta or {})}, sort_keys=True)
        with self._guard, open(self.directory / "index.jsonl", "a", encoding="utf-8") as f:
            f.write(line + "\n")

    def get_or_fetch(self, digest: str, fetch: Callable[[], bytes], meta: dict | None = None) -> bytes:
        with self._lock(digest):
            body = self.get(digest)
            if body is not None:
                self.hits += 1
                return body
            self.misses += 1
            body = fetch()
            self.put(digest, body, meta)
            return body
