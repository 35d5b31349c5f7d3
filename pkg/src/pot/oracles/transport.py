"""Minimal client for OpenAI-compatible completion endpoints."""
from __future__ import annotations

import json
import logging
import time
from typing import Callable

import httpx

from ..errors import TransportError

log = logging.getLogger(__name__)

# (url, headers, body) -> (status, body)
Send = Callable[[str, dict, bytes], tuple[int, bytes]]

RETRIABLE = {408, 409, 429, 500, 502, 503, 504}


def httpx_send(timeout: float = 60.0) -> Send:
    client = httpx.Client(timeout=timeout)

    def send(url: str, headers: dict, body: bytes) -> tuple[int, bytes]:
        r = client.post(url, headers=headers, content=body)
        return r.status_code, r.content

    return send


class OpenAICompatClient:
    def __init__(
        self,
        api_base: str,
        api_key: str | None,
        send: Send | None = None,
        max_retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 60.0,
        debug: bool = False,
    ):
        self.api_base = api_base.rstrip("/")
        self.api_key = api_key
        self._send = send
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.debug = debug
        self.calls = 0

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        if self.api_key:
            h["Authorization"] = f"Bearer {self.api_key}"
        return h

    def post(self, path: str, payload: dict) -> bytes:
        """POST ``payload`` and return the raw response body.

        Network errors, auth failures and retriable statuses are retried
        with exponential backoff; the last failure raises TransportError.
        """
        if self._send is None:
            self._send = httpx_send(self.timeout)
        url = f"{self.api_base}/{path.lstrip('/')}"
        body = json.dumps(payload, sort_keys=True).encode()
        if self.debug:
            log.debug("POST %s %s", url, body.decode())
        last = "no attempt made"
        for attempt in range(self.max_retries):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            self.calls += 1
            try:
                status, content = self._send(url, self._headers(), body)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if self.debug:
                log.debug("<- %s %s", status, content[:2000].decode(errors="replace"))
            if status == 200:
                return content
            last = f"HTTP {status}: {content[:200].decode(errors='replace')}"
            if status not in RETRIABLE and status not in (401, 403):
                break
        raise TransportError(f"{url}: {last}")
