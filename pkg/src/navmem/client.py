"""Minimal chat-completion client (OpenAI-style wire format)."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Optional

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "NAVMEM_API_KEY"
RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class TransportError(RuntimeError):
    pass


class ChatClient:
    """POSTs ``{base_url}/chat/completions`` and returns the first choice's content.

    At most ``max_in_flight`` requests run at once across threads. Transport
    errors and retryable HTTP statuses are retried with exponential backoff.
    """

    def __init__(self, base_url: str, model: str, *, api_key: Optional[str] = None,
                 temperature: float = 0.0, max_in_flight: int = 8, max_retries: int = 3,
                 backoff: float = 1.0, timeout: float = 60.0,
                 transport: Optional[httpx.BaseTransport] = None, sleep=time.sleep):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._http = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def payload(self, system: str, user: str) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }

    def complete(self, system: str, user: str) -> str:
        body = self.payload(system, user)
        last: Exception = TransportError("no attempt made")
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._http.post(f"{self.base_url}/chat/completions", json=body)
            except httpx.TransportError as e:
                last = TransportError(str(e))
                log.warning("chat request failed (%s), attempt %d", e, attempt + 1)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                log.warning("chat request got HTTP %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise TransportError(f"malformed completion response: {e}") from None
        raise last

    def close(self) -> None:
        self._http.close()
